"""Command-line pipeline: stats, crop, train, tune, evaluate, featuremaps,
augment-preview.

Configuration comes from built-in defaults, optionally overlaid by a JSON
config file (--config), then by individual flags. The effective merged
config is echoed into the output directory as config.json so every run is
reproducible from its artifacts alone.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import augment as aug
from .dataset import (CLASS_NAMES, load_batch, scan_dataset,
                      stratified_split_positions)
from .imgio import load_rgb, save_image, tile_grid, to_uint8
from .metrics import build_report, confusion, render_confusion_csv, render_report
from .network import (NetworkConfig, build_network, load_weights, param_count,
                      save_weights)
from .preprocess import CropParams, bilinear_resize, crop_pipeline
from .trainer import CallbackConfig, TrainConfig, evaluate, fit
from .tuner import SearchSpace, retrain_best, search

log = logging.getLogger(__name__)

_INIT_TAG = 0x494E4954

SPLIT_DIRS = ("Training", "Testing")


@dataclass
class RunConfig:
    """Everything a run needs; mirrors the JSON config file."""

    data: str | None = None
    out: str = "run_out"
    seed: int = 0
    crop_on_the_fly: bool = False
    kfold: int = 5
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    search: SearchSpace = field(default_factory=SearchSpace)
    crop: CropParams = field(default_factory=CropParams)

    def __post_init__(self):
        if self.kfold < 2:
            raise ValueError(f"kfold must be >= 2, got {self.kfold}")
        # One global seed drives every module.
        self.train = replace(self.train, seed=int(self.seed))

    def to_json(self) -> str:
        raw = {
            "data": self.data,
            "out": self.out,
            "seed": self.seed,
            "crop_on_the_fly": self.crop_on_the_fly,
            "kfold": self.kfold,
            "network": json.loads(self.network.to_json()),
            "train": {
                "epochs": self.train.epochs,
                "batch_size": self.train.batch_size,
                "augment_enabled": self.train.augment_enabled,
                "augment": dataclasses.asdict(self.train.augment),
                "callbacks": dataclasses.asdict(self.train.callbacks),
            },
            "search": dataclasses.asdict(self.search),
            "crop": dataclasses.asdict(self.crop),
        }
        return json.dumps(raw, sort_keys=True, indent=2) + "\n"


def _network_from_dict(raw: dict) -> NetworkConfig:
    base = NetworkConfig()
    return NetworkConfig(
        filters=tuple(raw.get("filters", base.filters)),
        kernels=tuple(raw.get("kernels", base.kernels)),
        dense_units=int(raw.get("dense_units", base.dense_units)),
        dropout_rate=float(raw.get("dropout_rate", base.dropout_rate)),
        learning_rate=float(raw.get("learning_rate", base.learning_rate)),
        input_shape=tuple(raw.get("input_shape", base.input_shape)),
        num_classes=int(raw.get("num_classes", base.num_classes)),
    )


def _train_from_dict(raw: dict) -> TrainConfig:
    base = TrainConfig()
    augment = aug.AugmentConfig(**{**dataclasses.asdict(base.augment),
                                   **raw.get("augment", {})})
    callbacks = CallbackConfig(**{**dataclasses.asdict(base.callbacks),
                                  **raw.get("callbacks", {})})
    return TrainConfig(
        epochs=int(raw.get("epochs", base.epochs)),
        batch_size=int(raw.get("batch_size", base.batch_size)),
        augment=augment,
        callbacks=callbacks,
        augment_enabled=bool(raw.get("augment_enabled", base.augment_enabled)),
    )


def _search_from_dict(raw: dict) -> SearchSpace:
    base = SearchSpace()
    return SearchSpace(
        filter_choices=tuple(raw.get("filter_choices", base.filter_choices)),
        kernel_choices=tuple(raw.get("kernel_choices", base.kernel_choices)),
        dense_choices=tuple(raw.get("dense_choices", base.dense_choices)),
        dropout_choices=tuple(raw.get("dropout_choices", base.dropout_choices)),
        lr_log10_range=tuple(raw.get("lr_log10_range", base.lr_log10_range)),
        max_trials=int(raw.get("max_trials", base.max_trials)),
    )


def _crop_from_dict(raw: dict) -> CropParams:
    base = CropParams()
    return CropParams(
        threshold=int(raw.get("threshold", base.threshold)),
        erode_iterations=int(raw.get("erode_iterations", base.erode_iterations)),
        dilate_iterations=int(raw.get("dilate_iterations", base.dilate_iterations)),
        blur_sigma=float(raw.get("blur_sigma", base.blur_sigma)),
        out_size=tuple(raw.get("out_size", base.out_size)),
    )


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags; validates eagerly."""
    raw: dict = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            raw = json.load(fh)
    cfg = RunConfig(
        data=raw.get("data"),
        out=raw.get("out", "run_out"),
        seed=int(raw.get("seed", 0)),
        crop_on_the_fly=bool(raw.get("crop_on_the_fly", False)),
        kfold=int(raw.get("kfold", 5)),
        network=_network_from_dict(raw.get("network", {})),
        train=_train_from_dict(raw.get("train", {})),
        search=_search_from_dict(raw.get("search", {})),
        crop=_crop_from_dict(raw.get("crop", {})),
    )
    if getattr(args, "data", None):
        cfg.data = args.data
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "seed", None) is not None:
        cfg.seed = int(args.seed)
    if getattr(args, "crop", False):
        cfg.crop_on_the_fly = True
    if getattr(args, "no_augment", False):
        cfg.train = replace(cfg.train, augment_enabled=False)
    if getattr(args, "epochs", None) is not None:
        cfg.train = replace(cfg.train, epochs=int(args.epochs))
    if getattr(args, "batch_size", None) is not None:
        cfg.train = replace(cfg.train, batch_size=int(args.batch_size))
    if getattr(args, "max_trials", None) is not None:
        cfg.search = replace(cfg.search, max_trials=int(args.max_trials))
    if getattr(args, "kfold", None) is not None:
        cfg.kfold = int(args.kfold)
    cfg.__post_init__()
    return cfg


def _require_data(cfg: RunConfig) -> Path:
    if not cfg.data:
        raise ValueError("no dataset root given (use --data or the config file)")
    return Path(cfg.data)


def _class_tree(root: Path, split: str) -> Path:
    """Accept either a {Training,Testing} root or a bare class tree."""
    candidate = root / split
    if candidate.is_dir():
        return candidate
    return root


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(cfg: RunConfig, out: Path) -> None:
    (out / "config.json").write_text(cfg.to_json())


def _load_split(cfg: RunConfig, tree: Path):
    index = scan_dataset(tree)
    size = cfg.crop.out_size[0]
    x, y = load_batch(index.samples, size=size, crop=cfg.crop_on_the_fly,
                      crop_params=cfg.crop)
    return index, x, y


def cmd_stats(args: argparse.Namespace) -> int:
    cfg = build_run_config(args)
    root = _require_data(cfg)
    lines = ["split,class,count"]
    grand = 0
    for split in SPLIT_DIRS:
        tree = root / split
        if not tree.is_dir():
            if (root / CLASS_NAMES[0]).is_dir() and split == "Training":
                tree = root
            else:
                continue
        index = scan_dataset(tree)
        counts = index.class_counts
        for name, count in zip(CLASS_NAMES, counts):
            lines.append(f"{split},{name},{count}")
        lines.append(f"{split},total,{len(index)}")
        grand += len(index)
    if grand == 0:
        raise ValueError(f"{root}: no Training/Testing trees or class directories found")
    lines.append(f"all,total,{grand}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if getattr(args, "out", None):
        out = _out_dir(cfg)
        (out / "stats.csv").write_text(text)
    return 0


def cmd_crop(args: argparse.Namespace) -> int:
    cfg = build_run_config(args)
    root = _require_data(cfg)
    out = _out_dir(cfg)
    trees = [(split, root / split) for split in SPLIT_DIRS if (root / split).is_dir()]
    if not trees:
        trees = [("", root)]
    rows = ["path,top,left,bottom,right,fallback"]
    written = 0
    for split, tree in trees:
        index = scan_dataset(tree)
        for sample in index.samples:
            src = Path(sample.path)
            rel = Path(split) / CLASS_NAMES[sample.label] / (src.stem + ".png")
            try:
                img = load_rgb(src)
            except Exception as exc:
                log.warning("skipping %s: %s", src, exc)
                continue
            result = crop_pipeline(img, cfg.crop)
            dest = out / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            save_image(dest, result.image)
            box = result.box
            if box is None:
                rows.append(f"{rel.as_posix()},,,,,1")
            else:
                rows.append(f"{rel.as_posix()},{box.top},{box.left},"
                            f"{box.bottom},{box.right},0")
            written += 1
    (out / "crop_log.csv").write_text("\n".join(rows) + "\n")
    print(f"cropped {written} images into {out}")
    return 0


def _write_eval_artifacts(out: Path, y_true: np.ndarray, predictions: np.ndarray,
                          num_classes: int) -> None:
    cm = confusion(y_true, predictions, num_classes,
                   class_names=CLASS_NAMES if num_classes == len(CLASS_NAMES) else None)
    report = build_report(cm)
    (out / "report.csv").write_text(render_report(report, style="csv"))
    (out / "confusion.csv").write_text(render_confusion_csv(cm))
    print(render_report(report, style="text"))


def cmd_train(args: argparse.Namespace) -> int:
    cfg = build_run_config(args)
    root = _require_data(cfg)
    out = _out_dir(cfg)
    _echo_config(cfg, out)
    tree = _class_tree(root, "Training")
    index, x, y = _load_split(cfg, tree)
    train_pos, val_pos = stratified_split_positions(index, frac=0.8, seed=cfg.seed)
    network = build_network(
        cfg.network, np.random.default_rng(np.random.SeedSequence([cfg.seed, _INIT_TAG])))
    print(f"parameters: {param_count(cfg.network)}")
    network, history = fit(network, (x[train_pos], y[train_pos]),
                           (x[val_pos], y[val_pos]), cfg.train)
    save_weights(network, out / "weights.lwcnn")
    history.to_csv(out / "history.csv")
    result = evaluate(network, x[val_pos], y[val_pos], cfg.train.batch_size)
    _write_eval_artifacts(out, np.argmax(y[val_pos], axis=1), result.predictions,
                          y.shape[1])
    print(f"validation accuracy: {result.accuracy:.4f}")
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    cfg = build_run_config(args)
    root = _require_data(cfg)
    out = _out_dir(cfg)
    _echo_config(cfg, out)
    train_tree = _class_tree(root, "Training")
    index, x, y = _load_split(cfg, train_tree)
    report = search(cfg.search, index, x, y, cfg.train, k=cfg.kfold, seed=cfg.seed)
    (out / "tuner.json").write_text(report.to_json() + "\n")
    network, history = retrain_best(report, index, x, y, cfg.train,
                                    out / "best_weights.lwcnn")
    history.to_csv(out / "history.csv")
    best = report.best()
    print(f"best trial: {best.trial.trial_id} mean fold accuracy {best.mean_score:.4f}")
    test_tree = root / "Testing"
    if test_tree.is_dir():
        _, x_test, y_test = _load_split(cfg, test_tree)
        result = evaluate(network, x_test, y_test, cfg.train.batch_size)
        _write_eval_artifacts(out, np.argmax(y_test, axis=1), result.predictions,
                              y_test.shape[1])
        print(f"test accuracy: {result.accuracy:.4f}")
    else:
        log.warning("no Testing tree under %s; skipping final evaluation", root)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = build_run_config(args)
    root = _require_data(cfg)
    out = _out_dir(cfg)
    _echo_config(cfg, out)
    network = load_weights(args.weights)
    tree = _class_tree(root, "Testing")
    index, x, y = _load_split(cfg, tree)
    result = evaluate(network, x, y, cfg.train.batch_size)
    _write_eval_artifacts(out, index.labels(), result.predictions, y.shape[1])
    print(f"accuracy: {result.accuracy:.4f} on {len(index)} samples")
    return 0


def cmd_featuremaps(args: argparse.Namespace) -> int:
    cfg = build_run_config(args)
    out = _out_dir(cfg)
    network = load_weights(args.weights)
    img = load_rgb(args.image)
    cropped = crop_pipeline(img, cfg.crop).image
    x = cropped.astype(np.float32)[None] / np.float32(255.0)
    maps = network.conv_activations(x, blocks=2)
    save_image(out / "input_cropped.png", cropped)
    for i, activation in enumerate(maps, start=1):
        channels = activation.shape[3]
        tiles = [to_uint8(activation[0, :, :, c]) for c in range(channels)]
        columns = int(np.ceil(np.sqrt(channels)))
        save_image(out / f"conv{i}_features.png", tile_grid(tiles, columns))
        print(f"conv{i}: {channels} maps of "
              f"{activation.shape[1]}x{activation.shape[2]}")
    return 0


def cmd_augment_preview(args: argparse.Namespace) -> int:
    cfg = build_run_config(args)
    root = _require_data(cfg)
    out = _out_dir(cfg)
    tree = _class_tree(root, "Training")
    index = scan_dataset(tree)
    count = max(1, int(args.count))
    variants = max(1, int(args.variants))
    # Spread the preview rows across classes.
    by_class: dict[int, list] = {}
    for sample in index.samples:
        by_class.setdefault(sample.label, []).append(sample)
    chosen = []
    rank = 0
    while len(chosen) < count:
        added = False
        for label in sorted(by_class):
            bucket = by_class[label]
            if rank < len(bucket) and len(chosen) < count:
                chosen.append(bucket[rank])
                added = True
        if not added:
            break
        rank += 1
    size = cfg.crop.out_size[0]
    tiles: list[np.ndarray] = []
    for i, sample in enumerate(chosen):
        img = load_rgb(sample.path)
        if cfg.crop_on_the_fly:
            img = crop_pipeline(img, cfg.crop).image
        elif img.shape[:2] != (size, size):
            img = bilinear_resize(img, size, size)
        tiles.append(img)
        for v in range(1, variants + 1):
            stream = aug.sample_stream(cfg.seed, v, i)
            p = aug.sample_params(cfg.train.augment, stream, size=img.shape[:2])
            tiles.append(aug.apply_brightness(aug.apply_affine(img, p), p.brightness))
    sheet = tile_grid(tiles, columns=variants + 1)
    save_image(out / "augment_preview.png", sheet)
    print(f"wrote {out / 'augment_preview.png'} "
          f"({len(chosen)} rows x {variants + 1} columns)")
    return 0


def _add_common(parser: argparse.ArgumentParser, *, data: bool = True) -> None:
    parser.add_argument("--config", help="JSON config file mirroring RunConfig")
    parser.add_argument("--seed", type=int, default=None, help="global seed")
    parser.add_argument("--out", default=None, help="output directory")
    if data:
        parser.add_argument("--data", default=None, help="dataset root directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lwcnn",
        description="Lightweight CNN pipeline for 4-class brain MRI classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="per-class image counts as CSV")
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("crop", help="batch contour-crop a dataset tree")
    _add_common(p)
    p.set_defaults(func=cmd_crop)

    p = sub.add_parser("train", help="train the default or configured network")
    _add_common(p)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--crop", action="store_true", help="contour-crop images on the fly")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", help="random search with k-fold CV, then retrain best")
    _add_common(p)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--max-trials", type=int, default=None)
    p.add_argument("--kfold", type=int, default=None)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--crop", action="store_true")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("evaluate", help="evaluate saved weights on a test tree")
    _add_common(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--crop", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("featuremaps", help="export conv1/conv2 activation grids")
    _add_common(p, data=False)
    p.add_argument("--weights", required=True)
    p.add_argument("--image", required=True)
    p.set_defaults(func=cmd_featuremaps)

    p = sub.add_parser("augment-preview", help="contact sheet of augmented samples")
    _add_common(p)
    p.add_argument("--count", type=int, default=4, help="sample rows")
    p.add_argument("--variants", type=int, default=4, help="augmented columns per row")
    p.add_argument("--crop", action="store_true")
    p.set_defaults(func=cmd_augment_preview)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
