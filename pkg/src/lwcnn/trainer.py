"""Epoch loop with Adamax updates plus the two validation-loss callbacks.

EarlyStopping halts training after `patience` consecutive epochs without a
val-loss improvement larger than min_delta and restores the best weights;
ReduceLROnPlateau multiplies the learning rate by `factor` (floored at
min_lr) under the same stagnation rule. Per epoch the plateau automaton
updates first, then early stopping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .augment import AugmentConfig, augment_batch
from .layers import softmax_cross_entropy
from .network import Network
from .optim import AdamaxState, adamax_step

# Seed-stream namespaces, disjoint from augmentation's (seed, epoch, index)
# tuples because no realistic epoch count reaches these values.
_SHUFFLE_TAG = 0x53484646
_DROPOUT_TAG = 0x44524F50


@dataclass
class CallbackConfig:
    es_patience: int = 8
    es_min_delta: float = 1e-4
    rlrop_patience: int = 5
    rlrop_factor: float = 0.3
    rlrop_min_lr: float = 1e-6

    def __post_init__(self):
        if self.es_patience < 1 or self.rlrop_patience < 1:
            raise ValueError("callback patiences must be >= 1")
        if not 0.0 < self.rlrop_factor < 1.0:
            raise ValueError(f"rlrop_factor must be in (0, 1), got {self.rlrop_factor}")
        if self.rlrop_min_lr <= 0.0:
            raise ValueError(f"rlrop_min_lr must be positive, got {self.rlrop_min_lr}")


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    callbacks: CallbackConfig = field(default_factory=CallbackConfig)
    augment_enabled: bool = True

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class EarlyStopState:
    patience: int
    min_delta: float
    best_loss: float = math.inf
    wait: int = 0
    best_weights: list[np.ndarray] | None = None
    best_epoch: int = 0


@dataclass
class PlateauState:
    patience: int
    factor: float
    min_lr: float
    lr: float
    min_delta: float = 1e-4
    best_loss: float = math.inf
    wait: int = 0


def _check_finite(val_loss: float) -> None:
    if not math.isfinite(val_loss):
        raise ValueError(f"non-finite validation loss: {val_loss}")


def early_stop_update(state: EarlyStopState, val_loss: float,
                      weights: list[np.ndarray] | None = None,
                      epoch: int = 0) -> bool:
    """Advance the early-stop automaton; True means stop now.

    Improvement is strict: best_loss - val_loss > min_delta. On improvement
    the provided weights are snapshotted; stopping fires when the wait
    counter reaches the patience.
    """
    _check_finite(val_loss)
    if state.best_loss - val_loss > state.min_delta:
        state.best_loss = val_loss
        state.wait = 0
        state.best_epoch = epoch
        if weights is not None:
            state.best_weights = [w.copy() for w in weights]
        return False
    state.wait += 1
    return state.wait >= state.patience


def plateau_update(state: PlateauState, val_loss: float) -> float:
    """Advance the plateau automaton; returns the (possibly reduced) lr."""
    _check_finite(val_loss)
    if state.best_loss - val_loss > state.min_delta:
        state.best_loss = val_loss
        state.wait = 0
    else:
        state.wait += 1
        if state.wait >= state.patience:
            state.lr = max(state.lr * state.factor, state.min_lr)
            state.wait = 0
    return state.lr


@dataclass
class HistoryRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass
class History:
    """One record per completed epoch; lr is the value used during the epoch."""

    records: list[HistoryRecord] = field(default_factory=list)

    CSV_HEADER = "epoch,train_loss,train_acc,val_loss,val_acc,lr"

    def append(self, record: HistoryRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def val_accuracies(self) -> list[float]:
        return [r.val_acc for r in self.records]

    def val_losses(self) -> list[float]:
        return [r.val_loss for r in self.records]

    def to_csv_text(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.records:
            lines.append(",".join([
                str(r.epoch),
                repr(float(r.train_loss)), repr(float(r.train_acc)),
                repr(float(r.val_loss)), repr(float(r.val_acc)),
                repr(float(r.lr)),
            ]))
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv_text())

    @classmethod
    def from_csv_text(cls, text: str) -> "History":
        lines = [ln for ln in text.strip().splitlines() if ln]
        if not lines or lines[0] != cls.CSV_HEADER:
            raise ValueError("unrecognized history CSV header")
        out = cls()
        for ln in lines[1:]:
            e, tl, ta, vl, va, lr = ln.split(",")
            out.append(HistoryRecord(int(e), float(tl), float(ta),
                                     float(vl), float(va), float(lr)))
        return out


@dataclass
class EvalResult:
    loss: float
    accuracy: float
    predictions: np.ndarray
    probs: np.ndarray


def evaluate(network: Network, x: np.ndarray, y_onehot: np.ndarray,
             batch_size: int = 32) -> EvalResult:
    """Deterministic pass with dropout off and the 1/255 rescale only."""
    if x.shape[0] == 0:
        raise ValueError("cannot evaluate an empty sample set")
    if x.shape[0] != y_onehot.shape[0]:
        raise ValueError(f"{x.shape[0]} samples vs {y_onehot.shape[0]} labels")
    n = x.shape[0]
    total_loss = 0.0
    probs_parts = []
    for start in range(0, n, batch_size):
        xb = x[start:start + batch_size].astype(np.float32) / np.float32(255.0)
        yb = y_onehot[start:start + batch_size]
        logits = network.forward(xb, training=False)
        probs, loss, _ = softmax_cross_entropy(logits, yb)
        total_loss += float(loss) * xb.shape[0]
        probs_parts.append(probs)
    probs = np.concatenate(probs_parts, axis=0)
    predictions = np.argmax(probs, axis=1)
    accuracy = float(np.mean(predictions == np.argmax(y_onehot, axis=1)))
    return EvalResult(total_loss / n, accuracy, predictions, probs)


def fit(network: Network,
        train_data: tuple[np.ndarray, np.ndarray],
        val_data: tuple[np.ndarray, np.ndarray],
        cfg: TrainConfig) -> tuple[Network, History]:
    """Train with per-epoch seeded shuffling and per-batch Adamax steps.

    Each epoch: shuffle, run batches (final partial batch included) with
    augmentation when enabled, evaluate on the validation set, then apply
    the plateau and early-stop automata in that order. On termination the
    best-validation-loss weights are restored.
    """
    x_train, y_train = train_data
    x_val, y_val = val_data
    n = x_train.shape[0]
    if n == 0:
        raise ValueError("empty training set")
    params = network.params()
    opt = AdamaxState.for_params(params, alpha=network.config.learning_rate)
    cb = cfg.callbacks
    es = EarlyStopState(cb.es_patience, cb.es_min_delta)
    plateau = PlateauState(cb.rlrop_patience, cb.rlrop_factor, cb.rlrop_min_lr,
                           lr=opt.alpha, min_delta=cb.es_min_delta)
    dropout_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _DROPOUT_TAG]))
    history = History()
    for epoch in range(1, cfg.epochs + 1):
        epoch_lr = opt.alpha
        shuffle_rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, _SHUFFLE_TAG, epoch]))
        perm = shuffle_rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for batch_no, start in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[start:start + cfg.batch_size]
            if cfg.augment_enabled:
                xb = augment_batch(x_train[idx], cfg.augment, cfg.seed, epoch,
                                   training=True, expected_hw=None, sample_indices=idx)
            else:
                xb = x_train[idx].astype(np.float32) / np.float32(255.0)
            yb = y_train[idx]
            logits = network.forward(xb, training=True, rng=dropout_rng)
            probs, loss, grad_logits = softmax_cross_entropy(logits, yb)
            if not math.isfinite(float(loss)):
                raise RuntimeError(
                    f"non-finite training loss {loss} at epoch {epoch}, batch {batch_no}")
            network.backward(grad_logits)
            adamax_step(params, network.grads(), opt)
            loss_sum += float(loss) * len(idx)
            correct += int(np.sum(np.argmax(probs, axis=1) == np.argmax(yb, axis=1)))
        val = evaluate(network, x_val, y_val, cfg.batch_size)
        if not math.isfinite(val.loss):
            raise RuntimeError(f"non-finite validation loss {val.loss} at epoch {epoch}")
        opt.alpha = plateau_update(plateau, val.loss)
        stop = early_stop_update(es, val.loss, weights=params, epoch=epoch)
        history.append(HistoryRecord(epoch, loss_sum / n, correct / n,
                                     val.loss, val.accuracy, epoch_lr))
        if stop:
            break
    if es.best_weights is not None:
        network.set_params(es.best_weights)
    return network, history
