"""Random hyperparameter search over a synthetic dataset, start to finish.

Builds an in-memory index of four procedurally drawn classes, cross-validates
a handful of sampled configurations, prints the trial table, then retrains
the winner and scores it on images the search never saw.
"""

from pathlib import Path

import numpy as np

from lwcnn.dataset import DatasetIndex, Sample, one_hot
from lwcnn.network import param_count
from lwcnn.trainer import TrainConfig, evaluate
from lwcnn.tuner import SearchSpace, retrain_best, search

# 32px inputs leave a 2x2 map after the four pooling stages; anything
# smaller collapses to a single pixel per filter and learns poorly.
SIZE = 32


def draw_pattern(label: int, rng: np.random.Generator) -> np.ndarray:
    img = rng.integers(0, 30, size=(SIZE, SIZE), dtype=np.uint8)
    yy, xx = np.mgrid[0:SIZE, 0:SIZE]
    if label == 0:
        img[8:24, 8:24] = 220
    elif label == 1:
        r2 = (yy - 16) ** 2 + (xx - 16) ** 2
        img[(r2 >= 64) & (r2 <= 144)] = 220
    elif label == 2:
        img[((yy + xx) // 4) % 2 == 0] = 220
    else:
        img[((yy // 4) + (xx // 4)) % 2 == 0] = 220
    return np.repeat(img[:, :, None], 3, axis=2)


def make_set(n_per_class: int, seed: int):
    rng = np.random.default_rng(seed)
    samples, images = [], []
    for label in range(4):
        for i in range(n_per_class):
            samples.append(Sample(f"mem://{label}/{i}", label))
            images.append(draw_pattern(label, rng))
    index = DatasetIndex(samples)
    x = np.stack(images)
    y = one_hot(index.labels(), 4)
    return index, x, y


index, x, y = make_set(10, seed=10)
_, x_eval, y_eval = make_set(8, seed=11)

space = SearchSpace(filter_choices=(4, 8), kernel_choices=(3,),
                    dense_choices=(16, 32), dropout_choices=(0.0, 0.25),
                    lr_log10_range=(-2.8, -2.2), max_trials=3)
train_cfg = TrainConfig(epochs=12, batch_size=6, seed=0, augment_enabled=False)

print(f"searching {space.max_trials} trials, 2-fold CV, "
      f"{len(index)} training images")
report = search(space, index, x, y, train_cfg, k=2, seed=4)

print()
print(f"{'trial':>5}  {'filters':>16}  {'dense':>5}  {'drop':>5}  "
      f"{'lr':>8}  {'fold scores':>14}  {'mean':>6}")
for result in report.trials:
    cfg = result.trial.config
    scores = "/".join(f"{s:.2f}" for s in result.fold_scores)
    print(f"{result.trial.trial_id:>5}  {str(cfg.filters):>16}  "
          f"{cfg.dense_units:>5}  {cfg.dropout_rate:>5.2f}  "
          f"{cfg.learning_rate:>8.1e}  {scores:>14}  {result.mean_score:>6.3f}")

best = report.best()
print()
print(f"best trial: {best.trial.trial_id} "
      f"(mean fold accuracy {best.mean_score:.3f}, "
      f"{param_count(best.trial.config)} parameters)")

out = Path("demo_out")
out.mkdir(exist_ok=True)
weights = out / "search_best.lwcnn"
network, history = retrain_best(report, index, x, y, train_cfg, weights)
print(f"retrained winner for {len(history)} epochs, weights in {weights}")

result = evaluate(network, x_eval, y_eval, batch_size=8)
print(f"fresh-image accuracy: {result.accuracy:.3f} on {len(x_eval)} samples")
