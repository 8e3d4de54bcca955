import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import boundary_set, dice_sets, hd95_allpairs, percentile_linear
from roodbench.metrics import (
    SampleMetrics,
    boundary_points,
    dice,
    evaluate_sample,
    hd95,
    hd95_bruteforce,
    percentile95,
)
from roodbench.volume import LabelVolume, VolumeError


def L(data, spacing=(1, 1, 1)):
    return LabelVolume(np.asarray(data, dtype=bool), spacing)


def single(shape, *points):
    m = np.zeros(shape, bool)
    for p in points:
        m[p] = True
    return L(m)


def test_dice_examples():
    a = single((4, 4, 4), (0, 0, 0), (1, 1, 1))
    b = single((4, 4, 4), (0, 0, 0), (2, 2, 2))
    assert dice(a, a) == 1.0
    assert dice(a, single((4, 4, 4), (3, 3, 3))) == 0.0
    assert dice(a, b) == 0.5
    empty = L(np.zeros((4, 4, 4)))
    assert dice(empty, empty) == 1.0


def test_hd95_examples():
    a = single((5, 5, 2), (0, 0, 0))
    b = single((5, 5, 2), (3, 4, 0))
    assert hd95(a, b) == 5.0
    assert hd95(a, a) == 0.0
    assert hd95(a, L(np.zeros((5, 5, 2)))) is None


def test_percentile_example():
    assert percentile95([1.0] * 19 + [10.0]) == pytest.approx(1.45, abs=1e-12)
    assert percentile_linear([1.0] * 19 + [10.0]) == pytest.approx(1.45, abs=1e-12)


def test_boundary_is_surface_only():
    m = np.zeros((7, 7, 7), bool)
    m[1:6, 1:6, 1:6] = True
    pts = boundary_points(L(m))
    assert len(pts) == 5 ** 3 - 3 ** 3
    full = np.ones((3, 3, 3), bool)
    assert len(boundary_points(L(full))) == 26  # grid edge counts as background


def test_boundary_uses_spacing():
    pts = boundary_points(L(np.ones((1, 1, 2)), spacing=(2.0, 3.0, 0.5)))
    np.testing.assert_array_equal(pts, [[0, 0, 0], [0, 0, 0.5]])


def test_anisotropic_distance():
    a = L(single((4, 4, 4), (0, 0, 0)).data, spacing=(2.0, 1.0, 3.0))
    b = L(single((4, 4, 4), (1, 0, 1)).data, spacing=(2.0, 1.0, 3.0))
    assert hd95(a, b) == pytest.approx(np.sqrt(4 + 9))


masks = arrays(np.bool_, (8, 8, 8), elements=st.booleans())


@settings(max_examples=200, deadline=None)
@given(masks, masks)
def test_against_oracles(a, b):
    la, lb = L(a), L(b)
    assert dice(la, lb) == dice_sets(a, b)
    assert dice(la, lb) == dice(lb, la)
    got, ref = hd95(la, lb), hd95_allpairs(a, b)
    if ref is None:
        assert got is None
    else:
        assert abs(got - ref) <= 1e-9
        assert hd95(lb, la) == got
        assert hd95_bruteforce(la, lb) == pytest.approx(got, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(masks, masks)
def test_hd95_not_above_hausdorff(a, b):
    if not a.any() or not b.any():
        return
    pa = np.array(boundary_set(a), float)
    pb = np.array(boundary_set(b), float)
    d = np.sqrt(((pa[:, None] - pb[None]) ** 2).sum(-1))
    hausdorff = max(d.min(1).max(), d.min(0).max())
    assert hd95(L(a), L(b)) <= hausdorff + 1e-12


def test_dice_permutation_invariant():
    rng = np.random.default_rng(0)
    a, b = rng.random((2, 6, 6, 6)) > 0.5
    perm = rng.permutation(216)
    pa = a.ravel()[perm].reshape(a.shape)
    pb = b.ravel()[perm].reshape(b.shape)
    assert dice(L(a), L(b)) == dice(L(pa), L(pb))


def test_evaluate_sample_conventions():
    gt = single((4, 4, 4), (1, 1, 1))
    empty = L(np.zeros((4, 4, 4)))
    m = evaluate_sample(empty, gt, "x")
    assert (m.dsc, m.hd95_mm, m.null_prediction) == (0.0, None, True)
    m = evaluate_sample(gt, gt, "x", "affine", 2)
    assert (m.dsc, m.hd95_mm, m.null_prediction, m.transform, m.severity) == (1.0, 0.0, False, "affine", 2)
    with pytest.raises(VolumeError):
        evaluate_sample(gt, empty, "x")
    with pytest.raises(VolumeError):
        evaluate_sample(gt, L(np.zeros((3, 4, 4))), "x")


def test_sample_metrics_invariants():
    with pytest.raises(ValueError):
        SampleMetrics("a", "clean", 0, 1.5, 0.0, False)
    with pytest.raises(ValueError):
        SampleMetrics("a", "clean", 0, 0.5, None, False)
    with pytest.raises(ValueError):
        SampleMetrics("a", "clean", 0, 0.0, 1.0, True)
