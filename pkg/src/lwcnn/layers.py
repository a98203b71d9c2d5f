"""Forward/backward passes for the fixed layer vocabulary.

All image tensors are NHWC (batch, height, width, channels), all flat
tensors are (batch, features).  Layers keep whatever float dtype they are
fed, so the same code runs in float32 for training and in float64 for
numerical gradient checks.  Each layer caches what its backward pass needs
during a training-mode forward; backward without a matching forward is an
error.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# Upper bound on the transient im2col buffer; batches are processed in
# chunks so large channel counts do not blow up memory.
_COL_BUDGET_BYTES = 256 * 1024 * 1024


def same_padding(kernel_size: int) -> tuple[int, int]:
    """(before, after) zero padding that keeps spatial dims unchanged at stride 1.

    Total padding is kernel_size - 1; the extra pixel of an even kernel
    goes after (pad 1 before, 2 after for k=4).
    """
    total = kernel_size - 1
    before = total // 2
    return before, total - before


def _chunk_size(n: int, per_sample_cols: int, itemsize: int) -> int:
    per_sample = max(1, per_sample_cols * itemsize)
    return max(1, min(n, _COL_BUDGET_BYTES // per_sample))


def _im2col(x_padded: np.ndarray, k: int, out_h: int, out_w: int) -> np.ndarray:
    """Patch matrix of shape (n*out_h*out_w, k*k*c) from a padded NHWC block."""
    win = sliding_window_view(x_padded, (k, k), axis=(1, 2))  # (n, oh, ow, c, k, k)
    win = win.transpose(0, 1, 2, 4, 5, 3)  # (n, oh, ow, k, k, c)
    n = x_padded.shape[0]
    c = x_padded.shape[3]
    return win.reshape(n * out_h * out_w, k * k * c)


class Conv2D:
    """Stride-1 'same' convolution with a square kernel of size 3 or 4.

    kernel: (k, k, c_in, c_out), bias: (c_out,).
    """

    def __init__(self, kernel: np.ndarray, bias: np.ndarray):
        if kernel.ndim != 4 or kernel.shape[0] != kernel.shape[1]:
            raise ValueError(f"kernel must be (k, k, c_in, c_out), got {kernel.shape}")
        k = kernel.shape[0]
        if k not in (3, 4):
            raise ValueError(f"kernel size must be 3 or 4, got {k}")
        if bias.shape != (kernel.shape[3],):
            raise ValueError(f"bias shape {bias.shape} does not match {kernel.shape[3]} filters")
        self.kernel = kernel
        self.bias = bias
        self._cache = None

    @property
    def kernel_size(self) -> int:
        return self.kernel.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[2]

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[3]

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.ndim != 4 or x.shape[3] != self.in_channels:
            raise ValueError(
                f"expected NHWC input with {self.in_channels} channels, got shape {x.shape}"
            )
        n, h, w, _ = x.shape
        k = self.kernel_size
        pb, pa = same_padding(k)
        xp = np.pad(x, ((0, 0), (pb, pa), (pb, pa), (0, 0)))
        kmat = self.kernel.reshape(k * k * self.in_channels, self.out_channels)
        out = np.empty((n, h, w, self.out_channels), dtype=x.dtype)
        step = _chunk_size(n, h * w * k * k * self.in_channels, x.dtype.itemsize)
        for s in range(0, n, step):
            e = min(n, s + step)
            cols = _im2col(xp[s:e], k, h, w)
            out[s:e] = (cols @ kmat).reshape(e - s, h, w, self.out_channels)
        out += self.bias
        if training:
            self._cache = xp
        return out

    def backward(self, grad_out: np.ndarray):
        """Gradients of the loss w.r.t. input, kernel and bias.

        Returns (grad_input, grad_kernel, grad_bias).
        """
        if self._cache is None:
            raise RuntimeError("backward called without a training-mode forward")
        xp = self._cache
        n, h, w, f = grad_out.shape
        k = self.kernel_size
        cin = self.in_channels
        if f != self.out_channels or xp.shape[0] != n:
            raise ValueError(
                f"grad_out shape {grad_out.shape} does not match cached forward"
            )
        pb, _ = same_padding(k)
        kmat = self.kernel.reshape(k * k * cin, f)
        grad_kmat = np.zeros_like(kmat)
        grad_xp = np.zeros_like(xp)
        step = _chunk_size(n, h * w * k * k * cin, xp.dtype.itemsize)
        for s in range(0, n, step):
            e = min(n, s + step)
            g = grad_out[s:e].reshape((e - s) * h * w, f)
            cols = _im2col(xp[s:e], k, h, w)
            grad_kmat += cols.T @ g
            gcols = (g @ kmat.T).reshape(e - s, h, w, k, k, cin)
            for i in range(k):
                for j in range(k):
                    grad_xp[s:e, i:i + h, j:j + w, :] += gcols[:, :, :, i, j, :]
        grad_input = grad_xp[:, pb:pb + h, pb:pb + w, :]
        grad_kernel = grad_kmat.reshape(self.kernel.shape)
        grad_bias = grad_out.sum(axis=(0, 1, 2))
        return grad_input, grad_kernel, grad_bias


class MaxPool2:
    """2x2 max pooling with stride 2; odd trailing rows/columns are dropped."""

    def __init__(self):
        self._cache = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        n, h, w, c = x.shape
        if h < 2 or w < 2:
            raise ValueError(f"spatial dims must be >= 2 to pool, got {h}x{w}")
        h2, w2 = h // 2, w // 2
        windows = (
            x[:, : h2 * 2, : w2 * 2, :]
            .reshape(n, h2, 2, w2, 2, c)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(n, h2, w2, c, 4)
        )
        argmax = windows.argmax(axis=4)
        out = np.take_along_axis(windows, argmax[..., None], axis=4)[..., 0]
        if training:
            self._cache = (argmax, x.shape)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called without a training-mode forward")
        argmax, in_shape = self._cache
        n, h, w, c = in_shape
        h2, w2 = h // 2, w // 2
        if grad_out.shape != (n, h2, w2, c):
            raise ValueError(f"grad_out shape {grad_out.shape} does not match pooled {(n, h2, w2, c)}")
        scatter = np.zeros((n, h2, w2, c, 4), dtype=grad_out.dtype)
        np.put_along_axis(scatter, argmax[..., None], grad_out[..., None], axis=4)
        grad = np.zeros(in_shape, dtype=grad_out.dtype)
        grad[:, : h2 * 2, : w2 * 2, :] = (
            scatter.reshape(n, h2, w2, c, 2, 2)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(n, h2 * 2, w2 * 2, c)
        )
        return grad


class ReLU:
    """Element-wise max(x, 0); the subgradient at exactly 0 is 0."""

    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if training:
            self._mask = x > 0
        return np.maximum(x, 0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._mask is None:
            raise RuntimeError("backward called without a training-mode forward")
        return grad_out * self._mask


class Dense:
    """Fully connected layer: out = x @ weights + bias."""

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        if weights.ndim != 2 or bias.shape != (weights.shape[1],):
            raise ValueError(f"inconsistent dense shapes {weights.shape}, {bias.shape}")
        self.weights = weights
        self.bias = bias
        self._cache = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.weights.shape[0]:
            raise ValueError(
                f"expected (n, {self.weights.shape[0]}) input, got shape {x.shape}"
            )
        if training:
            self._cache = x
        return x @ self.weights + self.bias

    def backward(self, grad_out: np.ndarray):
        """Returns (grad_input, grad_weights, grad_bias)."""
        if self._cache is None:
            raise RuntimeError("backward called without a training-mode forward")
        x = self._cache
        if grad_out.shape != (x.shape[0], self.weights.shape[1]):
            raise ValueError(f"grad_out shape {grad_out.shape} does not match cached forward")
        return grad_out @ self.weights.T, x.T @ grad_out, grad_out.sum(axis=0)


class Dropout:
    """Inverted dropout: keep with probability 1-rate, scale kept values by 1/(1-rate).

    Identity at inference.  The scaled mask is cached so the backward pass
    multiplies by exactly the same mask.
    """

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self._mask = None

    def forward(self, x: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        if not training:
            return x
        if self.rate == 0.0:
            self._mask = np.ones_like(x)
            return x.copy()
        if rng is None:
            raise ValueError("training-mode dropout requires an explicit rng")
        keep = 1.0 - self.rate
        mask = (rng.random(x.shape) < keep).astype(x.dtype) / x.dtype.type(keep)
        self._mask = mask
        return x * mask

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._mask is None:
            raise RuntimeError("backward called without a training-mode forward")
        return grad_out * self._mask


class Flatten:
    """(n, h, w, c) -> (n, h*w*c), row-major."""

    def __init__(self):
        self._shape = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if training:
            self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._shape is None:
            raise RuntimeError("backward called without a training-mode forward")
        return grad_out.reshape(self._shape)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for stability."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, onehot: np.ndarray):
    """Softmax probabilities, mean cross-entropy loss, and logit gradients.

    Probabilities are clipped to [1e-7, 1 - 1e-7] inside the log so an
    exactly-saturated row cannot produce log(0).  Returns
    (probs, loss, grad_logits) with grad_logits = (probs - onehot) / n.
    """
    if logits.shape != onehot.shape:
        raise ValueError(f"logits {logits.shape} and labels {onehot.shape} disagree")
    rows_ok = (onehot.sum(axis=1) == 1) & (((onehot == 0) | (onehot == 1)).all(axis=1))
    if not rows_ok.all():
        raise ValueError("labels must be one-hot rows with a single 1")
    n = logits.shape[0]
    probs = softmax(logits)
    clipped = np.clip(probs, 1e-7, 1.0 - 1e-7)
    loss = float(-(onehot * np.log(clipped)).sum() / n)
    grad_logits = (probs - onehot) / n
    return probs, loss, grad_logits
