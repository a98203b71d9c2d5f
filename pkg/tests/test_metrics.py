import numpy as np
import pytest

from lwcnn.metrics import (
    ConfusionMatrix,
    Report,
    build_report,
    confusion,
    parse_confusion_csv,
    parse_report_csv,
    per_class_metrics,
    render_confusion_csv,
    render_report,
)

from oracles import metrics_naive


# ---------------------------------------------------------------------------
# Confusion matrix
# ---------------------------------------------------------------------------

def test_confusion_rows_are_true_columns_are_predicted():
    cm = confusion([0, 1, 1], [0, 1, 0], num_classes=2, class_names=("a", "b"))
    np.testing.assert_array_equal(cm.matrix, [[1, 0], [1, 1]])
    assert cm.total == 3


def test_confusion_perfect_predictions_are_diagonal():
    labels = np.repeat(np.arange(4), 5)
    cm = confusion(labels, labels, num_classes=4)
    np.testing.assert_array_equal(cm.matrix, np.eye(4, dtype=int) * 5)
    assert cm.class_names == ("glioma", "meningioma", "notumor", "pituitary")


def test_confusion_validation():
    with pytest.raises(ValueError):
        confusion([0, 1], [0], num_classes=2)
    with pytest.raises(ValueError):
        confusion([0, 2], [0, 1], num_classes=2)
    with pytest.raises(ValueError):
        ConfusionMatrix(np.array([[1, 2, 3]]), ("a",))
    with pytest.raises(ValueError):
        ConfusionMatrix(np.array([[-1, 0], [0, 1]]), ("a", "b"))


def test_confusion_merge():
    a = confusion([0, 1], [0, 1], num_classes=2, class_names=("x", "y"))
    b = confusion([1, 1], [0, 1], num_classes=2, class_names=("x", "y"))
    merged = a.merged(b)
    np.testing.assert_array_equal(merged.matrix, [[1, 0], [1, 2]])
    other = confusion([0], [0], num_classes=2, class_names=("p", "q"))
    with pytest.raises(ValueError):
        a.merged(other)


# ---------------------------------------------------------------------------
# Per-class metrics
# ---------------------------------------------------------------------------

def test_worked_two_class_example():
    cm = ConfusionMatrix(np.array([[2, 1], [0, 3]]), ("a", "b"))
    per = per_class_metrics(cm)
    assert per[0].precision == 1.0
    assert per[0].recall == pytest.approx(2.0 / 3.0)
    assert per[0].f1 == pytest.approx(0.8)
    assert per[0].support == 3
    assert per[1].precision == pytest.approx(0.75)
    assert per[1].recall == 1.0
    assert per[1].f1 == pytest.approx(6.0 / 7.0)
    report = build_report(cm)
    assert report.accuracy == pytest.approx(5.0 / 6.0)


def test_clean_class_row_scores_perfect_recall():
    # one class predicted perfectly and never confused with the others
    matrix = np.zeros((4, 4), dtype=int)
    matrix[0, 0] = 280
    matrix[0, 1] = 20
    matrix[1, 1] = 306
    matrix[2, 2] = 405
    matrix[3, 3] = 300
    cm = ConfusionMatrix(matrix, ("glioma", "meningioma", "notumor", "pituitary"))
    per = per_class_metrics(cm)
    notumor = per[2]
    assert notumor.recall == 1.0
    assert notumor.precision == 1.0
    assert notumor.support == 405


def test_zero_support_class_scores_zero_not_nan():
    cm = ConfusionMatrix(np.array([[5, 0], [0, 0]]), ("a", "b"))
    per = per_class_metrics(cm)
    assert per[1].precision == 0.0
    assert per[1].recall == 0.0
    assert per[1].f1 == 0.0
    assert per[1].support == 0
    report = build_report(cm)
    assert np.isfinite(report.macro.f1)


def test_metrics_match_counting_oracle_on_random_vectors():
    rng = np.random.default_rng(80)
    for _ in range(5):
        n = 1000
        num_classes = int(rng.integers(2, 6))
        y_true = rng.integers(0, num_classes, n)
        y_pred = rng.integers(0, num_classes, n)
        cm = confusion(y_true, y_pred, num_classes)
        want = metrics_naive(y_true, y_pred, num_classes)
        np.testing.assert_array_equal(cm.matrix, want["cm"])
        report = build_report(cm)
        assert report.accuracy == pytest.approx(want["accuracy"], abs=1e-12)
        for got, ref in zip(report.per_class, want["per_class"]):
            assert got.precision == pytest.approx(ref["precision"], abs=1e-12)
            assert got.recall == pytest.approx(ref["recall"], abs=1e-12)
            assert got.f1 == pytest.approx(ref["f1"], abs=1e-12)
            assert got.support == ref["support"]
        for name in ("precision", "recall", "f1"):
            assert getattr(report.macro, name) == pytest.approx(
                want["macro"][name], abs=1e-12)
            assert getattr(report.weighted, name) == pytest.approx(
                want["weighted"][name], abs=1e-12)


def test_equal_supports_make_weighted_equal_macro():
    rng = np.random.default_rng(81)
    y_true = np.repeat(np.arange(4), 25)
    y_pred = rng.integers(0, 4, 100)
    report = build_report(confusion(y_true, y_pred, 4))
    assert report.weighted.precision == pytest.approx(report.macro.precision)
    assert report.weighted.recall == pytest.approx(report.macro.recall)
    assert report.weighted.f1 == pytest.approx(report.macro.f1)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _example_report() -> Report:
    cm = confusion([0, 0, 0, 1, 1, 2, 3, 3], [0, 0, 1, 1, 1, 2, 3, 0], 4)
    return build_report(cm)


def test_text_report_layout_and_rounding():
    report = _example_report()
    text = render_report(report, style="text")
    lines = text.splitlines()
    assert lines[0].startswith("(true rows)")
    for column in ("Precision", "Recall", "F1-score", "Support"):
        assert column in lines[0]
    assert lines[2].startswith("glioma")
    assert "0.67" in lines[2]  # precision 2/3 rounded to 2 decimals
    labels = [ln.split()[0] for ln in lines if ln]
    assert "Accuracy" in labels and "Macro" in labels and "Weighted" in labels
    accuracy_line = next(ln for ln in lines if ln.startswith("Accuracy"))
    assert f"{report.accuracy:.2f}" in accuracy_line
    assert str(report.total_support) in accuracy_line


def test_csv_report_roundtrip_is_exact():
    report = _example_report()
    text = render_report(report, style="csv")
    assert text.splitlines()[0] == "label,precision,recall,f1_score,support"
    back = parse_report_csv(text)
    assert back.accuracy == report.accuracy
    for got, ref in zip(back.per_class, report.per_class):
        assert got == ref
    assert back.macro == report.macro
    assert back.weighted == report.weighted
    assert render_report(back, style="csv") == text


def test_render_report_rejects_unknown_style():
    with pytest.raises(ValueError):
        render_report(_example_report(), style="yaml")
    with pytest.raises(ValueError):
        parse_report_csv("nope\n")


def test_confusion_csv_roundtrip():
    cm = confusion([0, 1, 2, 3, 3, 2], [0, 1, 2, 3, 2, 2], 4)
    text = render_confusion_csv(cm)
    assert text.splitlines()[0] == "true\\pred,glioma,meningioma,notumor,pituitary"
    back = parse_confusion_csv(text)
    np.testing.assert_array_equal(back.matrix, cm.matrix)
    assert back.class_names == cm.class_names
    with pytest.raises(ValueError):
        parse_confusion_csv("bogus,header\n1,2\n")
