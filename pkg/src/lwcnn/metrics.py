"""Confusion matrix, per-class precision/recall/F1, and report rendering.

Matrix orientation is rows = true class, columns = predicted class, and is
printed in every header. All 0/0 ratios are defined as 0.0 so reports stay
total and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import CLASS_NAMES


@dataclass
class ConfusionMatrix:
    matrix: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.int64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {self.matrix.shape}")
        if len(self.class_names) != self.matrix.shape[0]:
            raise ValueError("one class name per matrix row required")
        if (self.matrix < 0).any():
            raise ValueError("confusion matrix entries must be non-negative")

    @property
    def total(self) -> int:
        return int(self.matrix.sum())

    def merged(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.class_names != other.class_names:
            raise ValueError("cannot merge matrices over different classes")
        return ConfusionMatrix(self.matrix + other.matrix, self.class_names)


@dataclass
class ClassMetrics:
    name: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class Report:
    per_class: list[ClassMetrics]
    accuracy: float
    macro: ClassMetrics
    weighted: ClassMetrics
    class_names: tuple[str, ...]

    @property
    def total_support(self) -> int:
        return sum(m.support for m in self.per_class)


def _default_names(num_classes: int) -> tuple[str, ...]:
    if num_classes == len(CLASS_NAMES):
        return CLASS_NAMES
    return tuple(f"class_{i}" for i in range(num_classes))


def confusion(true_labels, predicted_labels, num_classes: int,
              class_names: tuple[str, ...] | None = None) -> ConfusionMatrix:
    """Tally cm[t][p] over paired label vectors."""
    t = np.asarray(true_labels, dtype=np.int64).ravel()
    p = np.asarray(predicted_labels, dtype=np.int64).ravel()
    if t.shape != p.shape:
        raise ValueError(f"label vectors differ in length: {t.shape} vs {p.shape}")
    if t.size and not ((0 <= t).all() and (t < num_classes).all()
                       and (0 <= p).all() and (p < num_classes).all()):
        raise ValueError(f"labels outside [0, {num_classes})")
    matrix = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(matrix, (t, p), 1)
    names = _default_names(num_classes) if class_names is None else tuple(class_names)
    return ConfusionMatrix(matrix, names)


def _ratio(num: float, den: float) -> float:
    return float(num / den) if den > 0 else 0.0


def per_class_metrics(cm: ConfusionMatrix) -> list[ClassMetrics]:
    """Precision TP/(TP+FP), recall TP/(TP+FN), F1 harmonic mean, support row sum."""
    m = cm.matrix
    out: list[ClassMetrics] = []
    for i, name in enumerate(cm.class_names):
        tp = int(m[i, i])
        fp = int(m[:, i].sum()) - tp
        fn = int(m[i, :].sum()) - tp
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
        f1 = _ratio(2.0 * precision * recall, precision + recall)
        out.append(ClassMetrics(name, precision, recall, f1, tp + fn))
    return out


def aggregate(cm: ConfusionMatrix) -> tuple[float, ClassMetrics, ClassMetrics]:
    """Accuracy (trace over total) plus macro and support-weighted averages."""
    total = cm.total
    if total == 0:
        raise ValueError("cannot aggregate an empty confusion matrix")
    per = per_class_metrics(cm)
    accuracy = float(np.trace(cm.matrix)) / total
    macro = ClassMetrics(
        "macro avg",
        float(np.mean([m.precision for m in per])),
        float(np.mean([m.recall for m in per])),
        float(np.mean([m.f1 for m in per])),
        total,
    )
    weighted = ClassMetrics(
        "weighted avg",
        sum(m.support * m.precision for m in per) / total,
        sum(m.support * m.recall for m in per) / total,
        sum(m.support * m.f1 for m in per) / total,
        total,
    )
    return accuracy, macro, weighted


def build_report(cm: ConfusionMatrix) -> Report:
    accuracy, macro, weighted = aggregate(cm)
    return Report(per_class_metrics(cm), accuracy, macro, weighted, cm.class_names)


def render_report(report: Report, style: str = "text") -> str:
    """Rows: the classes, then Accuracy, Macro Avg, Weighted Avg.

    Text rounds to 2 decimals; CSV carries full precision and reloads via
    parse_report_csv.
    """
    if style == "text":
        return _render_text(report)
    if style == "csv":
        return _render_csv(report)
    raise ValueError(f"unknown style {style!r}, expected 'text' or 'csv'")


def _render_text(report: Report) -> str:
    label_w = max(12, max(len(m.name) for m in report.per_class))
    header = (f"{'(true rows)':<{label_w}}  {'Precision':>9}  {'Recall':>9}  "
              f"{'F1-score':>9}  {'Support':>8}")
    lines = [header, ""]
    for m in report.per_class:
        lines.append(f"{m.name:<{label_w}}  {m.precision:>9.2f}  {m.recall:>9.2f}  "
                     f"{m.f1:>9.2f}  {m.support:>8d}")
    lines.append("")
    total = report.total_support
    lines.append(f"{'Accuracy':<{label_w}}  {'':>9}  {'':>9}  "
                 f"{report.accuracy:>9.2f}  {total:>8d}")
    for m, label in ((report.macro, "Macro Avg"), (report.weighted, "Weighted Avg")):
        lines.append(f"{label:<{label_w}}  {m.precision:>9.2f}  {m.recall:>9.2f}  "
                     f"{m.f1:>9.2f}  {total:>8d}")
    return "\n".join(lines) + "\n"


def _render_csv(report: Report) -> str:
    lines = ["label,precision,recall,f1_score,support"]
    for m in report.per_class:
        lines.append(f"{m.name},{float(m.precision)!r},{float(m.recall)!r},"
                     f"{float(m.f1)!r},{m.support}")
    total = report.total_support
    lines.append(f"accuracy,,,{float(report.accuracy)!r},{total}")
    for m in (report.macro, report.weighted):
        lines.append(f"{m.name},{float(m.precision)!r},{float(m.recall)!r},"
                     f"{float(m.f1)!r},{total}")
    return "\n".join(lines) + "\n"


def parse_report_csv(text: str) -> Report:
    """Reload a CSV report written by render_report(style='csv')."""
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0] != "label,precision,recall,f1_score,support":
        raise ValueError("unrecognized report CSV header")
    per: list[ClassMetrics] = []
    accuracy = None
    macro = weighted = None
    for ln in lines[1:]:
        label, p, r, f1, support = ln.split(",")
        if label == "accuracy":
            accuracy = float(f1)
        elif label == "macro avg":
            macro = ClassMetrics(label, float(p), float(r), float(f1), int(support))
        elif label == "weighted avg":
            weighted = ClassMetrics(label, float(p), float(r), float(f1), int(support))
        else:
            per.append(ClassMetrics(label, float(p), float(r), float(f1), int(support)))
    if accuracy is None or macro is None or weighted is None:
        raise ValueError("report CSV missing aggregate rows")
    return Report(per, accuracy, macro, weighted, tuple(m.name for m in per))


def render_confusion_csv(cm: ConfusionMatrix) -> str:
    """C x C counts with the orientation spelled out in the corner cell."""
    lines = ["true\\pred," + ",".join(cm.class_names)]
    for name, row in zip(cm.class_names, cm.matrix):
        lines.append(name + "," + ",".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_confusion_csv(text: str) -> ConfusionMatrix:
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or not lines[0].startswith("true\\pred,"):
        raise ValueError("unrecognized confusion CSV header")
    names = tuple(lines[0].split(",")[1:])
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        rows.append([int(v) for v in parts[1:]])
    return ConfusionMatrix(np.array(rows, dtype=np.int64), names)
