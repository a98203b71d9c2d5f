"""Random hyperparameter search scored by 5-fold cross-validation.

Each trial samples one configuration, trains it once per fold (fresh
weights every time, fold assignment frozen before trial 1), and scores the
trial by the mean over folds of the best validation accuracy seen during
training. The best trial (ties to the lowest id) is retrained on the full
training data with an internal 80/20 split for callback monitoring.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import DatasetIndex, FoldAssignment, stratified_kfold, stratified_split_positions
from .network import Network, NetworkConfig, build_network, save_weights
from .trainer import History, TrainConfig, fit

_TUNE_TAG = 0x54554E45
_RETRAIN_TAG = 0x52455452


@dataclass(frozen=True)
class SearchSpace:
    filter_choices: tuple[int, ...] = (32, 64, 128)
    kernel_choices: tuple[int, ...] = (3, 4)
    dense_choices: tuple[int, ...] = (256, 320, 384, 448, 512)
    dropout_choices: tuple[float, ...] = (0.3, 0.4, 0.5, 0.6)
    lr_log10_range: tuple[float, float] = (-4.0, -2.0)
    max_trials: int = 4

    def __post_init__(self):
        for name in ("filter_choices", "kernel_choices", "dense_choices", "dropout_choices"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        lo, hi = self.lr_log10_range
        if not lo < hi:
            raise ValueError(f"lr_log10_range must be ordered, got {self.lr_log10_range}")
        if self.max_trials < 1:
            raise ValueError(f"max_trials must be >= 1, got {self.max_trials}")


@dataclass(frozen=True)
class TrialConfig:
    config: NetworkConfig
    trial_id: int
    seed: int


@dataclass
class TrialResult:
    trial: TrialConfig
    fold_scores: list[float]
    mean_score: float


@dataclass
class TunerReport:
    trials: list[TrialResult]
    best_id: int
    k: int
    fold_paths: list[list[str]] = field(default_factory=list)

    def best(self) -> TrialResult:
        for t in self.trials:
            if t.trial.trial_id == self.best_id:
                return t
        raise ValueError(f"best trial id {self.best_id} not present")

    def to_json(self) -> str:
        return json.dumps(
            {
                "k": self.k,
                "best_trial_id": self.best_id,
                "trials": [
                    {
                        "trial_id": t.trial.trial_id,
                        "seed": t.trial.seed,
                        "config": json.loads(t.trial.config.to_json()),
                        "fold_scores": t.fold_scores,
                        "mean_score": t.mean_score,
                    }
                    for t in self.trials
                ],
                "fold_paths": self.fold_paths,
            },
            sort_keys=True, indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "TunerReport":
        raw = json.loads(text)
        trials = [
            TrialResult(
                TrialConfig(NetworkConfig.from_json(json.dumps(t["config"])),
                            int(t["trial_id"]), int(t["seed"])),
                [float(s) for s in t["fold_scores"]],
                float(t["mean_score"]),
            )
            for t in raw["trials"]
        ]
        return cls(trials, int(raw["best_trial_id"]), int(raw["k"]),
                   [list(p) for p in raw["fold_paths"]])


def sample_trial(space: SearchSpace, rng: np.random.Generator, trial_id: int = 0,
                 input_shape: tuple[int, int, int] = (150, 150, 3),
                 num_classes: int = 4) -> TrialConfig:
    """Uniform draw per field; lr is 10**u with u uniform over the log range.

    Draw order (filters x4, kernels x4, dense, dropout, lr exponent, trial
    seed) is part of the determinism contract.
    """
    filters = tuple(space.filter_choices[rng.integers(len(space.filter_choices))]
                    for _ in range(4))
    kernels = tuple(space.kernel_choices[rng.integers(len(space.kernel_choices))]
                    for _ in range(4))
    dense = int(space.dense_choices[rng.integers(len(space.dense_choices))])
    dropout = float(space.dropout_choices[rng.integers(len(space.dropout_choices))])
    lr = float(10.0 ** rng.uniform(*space.lr_log10_range))
    seed = int(rng.integers(0, 2**32))
    config = NetworkConfig(filters=filters, kernels=kernels, dense_units=dense,
                           dropout_rate=dropout, learning_rate=lr,
                           input_shape=input_shape, num_classes=num_classes)
    return TrialConfig(config, trial_id, seed)


def _fold_seed(trial_seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([trial_seed, fold]).generate_state(1)[0])


def run_fold(trial: TrialConfig, fold: int, folds: FoldAssignment,
             x: np.ndarray, y: np.ndarray,
             train_cfg: TrainConfig) -> tuple[float, History]:
    """Train a fresh network with fold `fold` held out; score = best val accuracy."""
    train_pos, val_pos = folds.train_val(fold)
    seed = _fold_seed(trial.seed, fold)
    network = build_network(trial.config,
                            np.random.default_rng(np.random.SeedSequence([trial.seed, fold])))
    cfg = replace(train_cfg, seed=seed)
    _, history = fit(network, (x[train_pos], y[train_pos]),
                     (x[val_pos], y[val_pos]), cfg)
    return max(history.val_accuracies()), history


def run_trial(trial: TrialConfig, folds: FoldAssignment, x: np.ndarray,
              y: np.ndarray, train_cfg: TrainConfig) -> TrialResult:
    """All k folds for one configuration; folds share no state."""
    scores: list[float] = []
    for fold in range(folds.k):
        try:
            score, _ = run_fold(trial, fold, folds, x, y, train_cfg)
        except Exception as exc:
            raise RuntimeError(f"trial {trial.trial_id} fold {fold}: {exc}") from exc
        scores.append(float(score))
    return TrialResult(trial, scores, float(np.mean(scores)))


def search(space: SearchSpace, index: DatasetIndex, x: np.ndarray, y: np.ndarray,
           train_cfg: TrainConfig, k: int = 5, seed: int = 0,
           max_trials: int | None = None) -> TunerReport:
    """Run the whole random search; fold assignment is computed once up front."""
    folds = stratified_kfold(index, k=k, seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _TUNE_TAG]))
    n_trials = space.max_trials if max_trials is None else max_trials
    input_shape = tuple(int(d) for d in x.shape[1:])
    trials: list[TrialResult] = []
    for trial_id in range(n_trials):
        trial = sample_trial(space, rng, trial_id=trial_id,
                             input_shape=input_shape, num_classes=y.shape[1])
        trials.append(run_trial(trial, folds, x, y, train_cfg))
    best_id = trials[0].trial.trial_id
    best_mean = trials[0].mean_score
    for t in trials[1:]:
        if t.mean_score > best_mean:
            best_id, best_mean = t.trial.trial_id, t.mean_score
    fold_paths = [[index.samples[p].path for p in folds.positions(f)]
                  for f in range(k)]
    return TunerReport(trials, best_id, k, fold_paths)


def retrain_best(report: TunerReport, index: DatasetIndex, x: np.ndarray,
                 y: np.ndarray, train_cfg: TrainConfig, weights_path,
                 frac: float = 0.8) -> tuple[Network, History]:
    """Retrain the winning config on all training data, 80/20 internally split.

    The internal split only feeds the callbacks; no test data is involved.
    Weights are persisted to weights_path.
    """
    if not report.trials:
        raise ValueError("empty tuner report")
    config = report.best().trial.config
    train_pos, val_pos = stratified_split_positions(index, frac=frac, seed=train_cfg.seed)
    network = build_network(
        config, np.random.default_rng(np.random.SeedSequence([train_cfg.seed, _RETRAIN_TAG])))
    network, history = fit(network, (x[train_pos], y[train_pos]),
                           (x[val_pos], y[val_pos]), train_cfg)
    save_weights(network, weights_path)
    return network, history
