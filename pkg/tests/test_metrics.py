import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smotune.errors import EmptyMask, InvalidEpsilon, InvalidInput, ShapeMismatch
from smotune.metrics import (
    CSV_COLUMNS,
    ConfusionCounts,
    accuracy,
    categorical_dice_loss,
    confusion,
    dataset_rows,
    dice,
    iou,
    macro_report,
    one_hot,
    pooled_report,
    report_rows,
)


def brute_counts(pred, gt, c):
    tp = tn = fp = fn = 0
    for p, g in zip(pred.ravel().tolist(), gt.ravel().tolist()):
        if p == c and g == c:
            tp += 1
        elif p == c:
            fp += 1
        elif g == c:
            fn += 1
        else:
            tn += 1
    return tp, tn, fp, fn


def test_hand_count_2x2():
    pred = np.array([[1, 0], [0, 1]])
    gt = np.array([[1, 1], [0, 0]])
    k = confusion(pred, gt, 1)
    assert (k.tp, k.fp, k.fn, k.tn) == (1, 1, 1, 1)
    assert accuracy(k) == 0.5


def test_confusion_trivial_cases():
    gt = np.ones((4, 5), dtype=int)
    k = confusion(gt, gt, 1)
    assert k.fp == k.fn == 0
    k = confusion(np.zeros_like(gt), gt, 1)
    assert k.fn == 20 and k.tp == 0
    assert accuracy(ConfusionCounts(0, 0, 3, 2)) == 0.0
    with pytest.raises(EmptyMask):
        accuracy(ConfusionCounts(0, 0, 0, 0))
    with pytest.raises(ShapeMismatch):
        confusion(np.zeros((2, 2)), np.zeros((2, 3)), 0)


def test_dice_iou_hand_count():
    # |P & G| = 2, |P| = 3, |G| = 4
    pred = np.array([1, 1, 1, 0, 0, 0, 0])
    gt = np.array([1, 1, 0, 1, 1, 0, 0])
    assert dice(pred, gt, 1) == pytest.approx(4 / 7)
    assert iou(pred, gt, 1) == pytest.approx(2 / 5)


def test_identical_and_disjoint():
    a = np.array([[0, 1], [1, 1]])
    b = 1 - a
    assert dice(a, a, 1) == iou(a, a, 1) == 1.0
    assert dice(a, b, 1) == iou(a, b, 1) == 0.0
    empty = np.zeros((3, 3), dtype=int)
    assert dice(empty, empty, 1) == iou(empty, empty, 1) == 1.0


masks = arrays(np.int64, (6, 7), elements=st.integers(0, 2))


@settings(max_examples=200, deadline=None)
@given(masks, masks)
def test_identity_symmetry_bounds(p, g):
    for c in range(3):
        d, j = dice(p, g, c), iou(p, g, c)
        assert abs(d - 2 * j / (1 + j)) <= 1e-12
        assert d == dice(g, p, c) and j == iou(g, p, c)
        assert 0.0 <= j <= d <= 1.0
        k = confusion(p, g, c)
        assert (k.tp, k.tn, k.fp, k.fn) == brute_counts(p, g, c)
        assert k.total == p.size


def test_dice_loss_perfect_and_complement():
    gt = np.array([[0, 1, 1], [1, 0, 0]])
    assert categorical_dice_loss(one_hot(gt, 2), gt) <= 1e-6
    loss = categorical_dice_loss(one_hot(1 - gt, 2), gt)
    assert 1 - 1e-6 < loss < 1.0


def test_dice_loss_uniform_prediction():
    gt = np.array([[0, 1], [1, 0]] * 4)
    prob = np.full(gt.shape + (2,), 0.5)
    assert categorical_dice_loss(prob, gt) == pytest.approx(0.5, abs=1e-7)


@settings(max_examples=100, deadline=None)
@given(masks, masks)
def test_dice_loss_matches_mean_dice_for_one_hot(p, g):
    loss = categorical_dice_loss(one_hot(p, 3), g, epsilon=1e-12)
    # classes absent from both are ε/ε = 1, matching the vacuous convention
    assert loss == pytest.approx(1 - np.mean([dice(p, g, c) for c in range(3)]), abs=1e-9)
    assert 0.0 <= loss < 1.0


def test_dice_loss_errors():
    gt = np.zeros((2, 2), dtype=int)
    with pytest.raises(ShapeMismatch):
        categorical_dice_loss(np.full((2, 3, 2), 0.5), gt)
    with pytest.raises(InvalidEpsilon):
        categorical_dice_loss(one_hot(gt, 2), gt, epsilon=0.0)
    with pytest.raises(InvalidInput):
        categorical_dice_loss(np.full((2, 2, 2), 0.7), gt)
    with pytest.raises(InvalidInput):
        one_hot(np.array([[3]]), 2)


def test_macro_report_perfect_and_vacuous():
    gt = np.array([[0, 1], [1, 0]])
    r = macro_report(gt, gt)
    assert r.mean_accuracy == r.mean_dice == r.mean_iou == r.overall_accuracy == 1.0
    r3 = macro_report(gt, gt, num_classes=3)
    assert r3.per_class[2].dice == 1.0 and r3.per_class[2].iou == 1.0
    assert r3.vacuous_classes == [2]
    with pytest.raises(InvalidInput):
        macro_report(gt + 1, gt, num_classes=2)
    with pytest.raises(EmptyMask):
        macro_report(np.zeros((0, 0)), np.zeros((0, 0)))


def test_macro_report_matches_brute_force():
    rng = np.random.default_rng(0)
    pred = rng.integers(0, 3, (64, 64))
    gt = rng.integers(0, 3, (64, 64))
    r = macro_report(pred, gt)
    dices, ious, accs = [], [], []
    for c in range(3):
        tp, tn, fp, fn = brute_counts(pred, gt, c)
        accs.append((tp + tn) / pred.size)
        dices.append(2 * tp / (2 * tp + fp + fn))
        ious.append(tp / (tp + fp + fn))
    assert r.mean_accuracy == pytest.approx(np.mean(accs), abs=1e-12)
    assert r.mean_dice == pytest.approx(np.mean(dices), abs=1e-12)
    assert r.mean_iou == pytest.approx(np.mean(ious), abs=1e-12)
    joint = sum(int(a == b) for a, b in zip(pred.ravel(), gt.ravel())) / pred.size
    assert r.overall_accuracy == pytest.approx(joint, abs=1e-12)


def test_pooled_report_sums_counts():
    a = (np.array([[0, 1]]), np.array([[1, 1]]))
    b = (np.array([[2, 2]]), np.array([[2, 0]]))
    ra, rb = macro_report(*a, num_classes=3), macro_report(*b, num_classes=3)
    pooled = pooled_report([ra, rb])
    whole = macro_report(np.hstack([a[0], b[0]]), np.hstack([a[1], b[1]]), num_classes=3)
    assert pooled == whole


def test_report_rows_layout():
    gt = np.array([[0, 1], [1, 0]])
    rows = report_rows("img", macro_report(gt, gt))
    assert [r[1] for r in rows] == ["0", "1", "mean", "overall"]
    assert all(len(r) == len(CSV_COLUMNS) for r in rows)
    rows = dataset_rows({"b": macro_report(gt, gt), "a": macro_report(gt, 1 - gt)})
    assert [r[0] for r in rows] == ["a"] * 4 + ["b"] * 4 + ["*"] * 4
