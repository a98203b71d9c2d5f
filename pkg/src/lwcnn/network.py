"""Network assembly, parameter counting, and weight persistence.

The classifier is a fixed stack: four conv/ReLU/maxpool blocks, flatten,
a ReLU dense layer, dropout, and a linear output head whose logits feed
the softmax cross-entropy loss.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .layers import Conv2D, Dense, Dropout, Flatten, MaxPool2, ReLU, softmax

WEIGHTS_MAGIC = b"LWCNN1"


@dataclass
class NetworkConfig:
    """Hyperparameter tuple defining one model."""

    filters: tuple[int, int, int, int] = (32, 128, 128, 128)
    kernels: tuple[int, int, int, int] = (3, 4, 3, 3)
    dense_units: int = 384
    dropout_rate: float = 0.3
    learning_rate: float = 9.534e-4
    input_shape: tuple[int, int, int] = (150, 150, 3)
    num_classes: int = 4

    def __post_init__(self):
        self.filters = tuple(int(f) for f in self.filters)
        self.kernels = tuple(int(k) for k in self.kernels)
        self.input_shape = tuple(int(d) for d in self.input_shape)
        self.validate()

    def validate(self) -> None:
        if len(self.filters) != 4 or any(f < 1 for f in self.filters):
            raise ValueError(f"filters must be 4 positive integers, got {self.filters}")
        if len(self.kernels) != 4 or any(k not in (3, 4) for k in self.kernels):
            raise ValueError(f"kernels must be 4 values from {{3, 4}}, got {self.kernels}")
        if self.dense_units < 1:
            raise ValueError(f"dense_units must be positive, got {self.dense_units}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if len(self.input_shape) != 3 or any(d < 1 for d in self.input_shape):
            raise ValueError(f"input_shape must be (h, w, c), got {self.input_shape}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        h, w = self.input_shape[:2]
        for _ in range(4):
            if h < 2 or w < 2:
                raise ValueError(
                    f"input {self.input_shape[:2]} too small for four pooling stages"
                )
            h, w = h // 2, w // 2

    def flat_features(self) -> int:
        """Features entering the dense head after the four pooled blocks."""
        h, w = self.input_shape[:2]
        for _ in range(4):
            h, w = h // 2, w // 2
        return h * w * self.filters[3]

    def to_json(self) -> str:
        return json.dumps(
            {
                "filters": list(self.filters),
                "kernels": list(self.kernels),
                "dense_units": self.dense_units,
                "dropout_rate": self.dropout_rate,
                "learning_rate": self.learning_rate,
                "input_shape": list(self.input_shape),
                "num_classes": self.num_classes,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "NetworkConfig":
        raw = json.loads(text)
        return cls(
            filters=tuple(raw["filters"]),
            kernels=tuple(raw["kernels"]),
            dense_units=int(raw["dense_units"]),
            dropout_rate=float(raw["dropout_rate"]),
            learning_rate=float(raw["learning_rate"]),
            input_shape=tuple(raw["input_shape"]),
            num_classes=int(raw["num_classes"]),
        )


def param_count(config: NetworkConfig) -> int:
    """Closed-form trainable parameter total for a config."""
    config.validate()
    total = 0
    cin = config.input_shape[2]
    for f, k in zip(config.filters, config.kernels):
        total += k * k * cin * f + f
        cin = f
    flat = config.flat_features()
    total += flat * config.dense_units + config.dense_units
    total += config.dense_units * config.num_classes + config.num_classes
    return total


def _glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...],
                    fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float32)


class Network:
    """The fixed layer stack plus parameter bookkeeping.

    forward() returns logits; the softmax lives in the loss (training) or in
    predict_proba (inference).
    """

    def __init__(self, config: NetworkConfig, layers: list):
        self.config = config
        self.layers = layers
        self._grads: list[np.ndarray] | None = None

    @classmethod
    def _allocate(cls, config: NetworkConfig,
                  rng: np.random.Generator | None) -> "Network":
        config.validate()
        layers: list = []
        cin = config.input_shape[2]
        for f, k in zip(config.filters, config.kernels):
            fan_in, fan_out = k * k * cin, k * k * f
            if rng is None:
                kernel = np.zeros((k, k, cin, f), dtype=np.float32)
            else:
                kernel = _glorot_uniform(rng, (k, k, cin, f), fan_in, fan_out)
            layers += [Conv2D(kernel, np.zeros(f, dtype=np.float32)), ReLU(), MaxPool2()]
            cin = f
        layers.append(Flatten())
        flat = config.flat_features()
        for n_in, n_out in ((flat, config.dense_units), (config.dense_units, config.num_classes)):
            if rng is None:
                w = np.zeros((n_in, n_out), dtype=np.float32)
            else:
                w = _glorot_uniform(rng, (n_in, n_out), n_in, n_out)
            layers.append(Dense(w, np.zeros(n_out, dtype=np.float32)))
            if n_out == config.dense_units:
                layers += [ReLU(), Dropout(config.dropout_rate)]
        return cls(config, layers)

    def forward(self, x: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        for layer in self.layers:
            if isinstance(layer, Dropout):
                x = layer.forward(x, training=training, rng=rng)
            else:
                x = layer.forward(x, training=training)
        return x

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        """Backpropagate loss gradients; parameter gradients are stored for grads()."""
        grad = grad_logits
        collected: list[np.ndarray] = []
        for layer in reversed(self.layers):
            if isinstance(layer, (Conv2D, Dense)):
                grad, gw, gb = layer.backward(grad)
                collected += [gb, gw]
            else:
                grad = layer.backward(grad)
        collected.reverse()
        self._grads = collected
        return grad

    def params(self) -> list[np.ndarray]:
        """References to all trainable arrays, in persistence order."""
        out: list[np.ndarray] = []
        for layer in self.layers:
            if isinstance(layer, Conv2D):
                out += [layer.kernel, layer.bias]
            elif isinstance(layer, Dense):
                out += [layer.weights, layer.bias]
        return out

    def grads(self) -> list[np.ndarray]:
        if self._grads is None:
            raise RuntimeError("grads() requires a prior backward pass")
        return self._grads

    def set_params(self, values: list[np.ndarray]) -> None:
        params = self.params()
        if len(values) != len(params):
            raise ValueError(f"expected {len(params)} arrays, got {len(values)}")
        for p, v in zip(params, values):
            if p.shape != v.shape:
                raise ValueError(f"shape mismatch: {p.shape} vs {v.shape}")
            p[...] = v

    def snapshot(self) -> list[np.ndarray]:
        return [p.copy() for p in self.params()]

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.forward(x, training=False))

    def conv_activations(self, x: np.ndarray, blocks: int = 2) -> list[np.ndarray]:
        """Post-ReLU activations of the first `blocks` conv layers.

        Runs only as far into the stack as needed.
        """
        maps: list[np.ndarray] = []
        for layer in self.layers:
            x = layer.forward(x, training=False)
            if isinstance(layer, ReLU) and x.ndim == 4:
                maps.append(x)
                if len(maps) == blocks:
                    break
        return maps


def build_network(config: NetworkConfig, rng: np.random.Generator) -> Network:
    """Glorot-uniform weights, zero biases; deterministic for a given generator state."""
    return Network._allocate(config, rng)


def save_weights(network: Network, path) -> None:
    config_bytes = network.config.to_json().encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<I", len(config_bytes)))
        fh.write(config_bytes)
        for p in network.params():
            fh.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def load_weights(path) -> Network:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(WEIGHTS_MAGIC)] != WEIGHTS_MAGIC:
        raise ValueError(f"{path}: bad magic, not a {WEIGHTS_MAGIC.decode()} weights file")
    offset = len(WEIGHTS_MAGIC)
    if len(blob) < offset + 4:
        raise ValueError(f"{path}: truncated header")
    (config_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if len(blob) < offset + config_len:
        raise ValueError(
            f"{path}: truncated config, expected {config_len} bytes, found {len(blob) - offset}"
        )
    config = NetworkConfig.from_json(blob[offset:offset + config_len].decode("utf-8"))
    offset += config_len
    expected = 4 * param_count(config)
    actual = len(blob) - offset
    if actual != expected:
        raise ValueError(
            f"{path}: parameter payload is {actual} bytes, expected {expected}"
        )
    network = Network._allocate(config, rng=None)
    for p in network.params():
        n = 4 * p.size
        p[...] = np.frombuffer(blob, dtype="<f4", count=p.size, offset=offset).reshape(p.shape)
        offset += n
    return network
