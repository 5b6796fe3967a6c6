import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from irstd import metrics
from irstd.metrics import UndefinedMetric


def test_binarize_relative_threshold():
    t = np.array([[2.0, 0.9], [0.7, -0.85]])
    assert np.array_equal(metrics.binarize(t, 0.4), [[True, True], [False, True]])
    assert np.array_equal(metrics.binarize(t, 1.0), [[False, False], [False, False]])
    assert not metrics.binarize(np.zeros((3, 3)), 0.4).any()


def test_binarize_absolute_threshold():
    t = np.array([0.1, 0.3, -0.5])
    assert np.array_equal(metrics.binarize(t, 0.2, absolute=True), [False, True, True])


def test_binarize_keeps_only_strict_maximum_at_tr_near_one():
    t = np.array([[1.0, 0.5], [0.2, 0.0]])
    assert metrics.binarize(t, 0.99).sum() == 1


def test_components_single_pixel_and_diagonal():
    m = np.zeros((5, 5), dtype=bool)
    m[2, 2] = True
    (c,) = metrics.connected_components(m)
    assert c.area == 1 and c.centroid == (2.0, 2.0)
    m[3, 3] = True
    (c,) = metrics.connected_components(m)
    assert c.area == 2 and c.centroid == (2.5, 2.5)
    m[0, 4] = True
    assert len(metrics.connected_components(m)) == 2


def test_pixel_metrics_hand_example():
    pred = np.zeros((2, 2), dtype=bool)
    gt = np.zeros((2, 2), dtype=bool)
    pred[0, 0] = pred[0, 1] = True
    gt[0, 1] = gt[1, 1] = True
    iou, f1 = metrics.pixel_metrics(pred, gt)
    assert np.isclose(iou, 1 / 3) and np.isclose(f1, 1 / 2)
    assert metrics.pixel_metrics(np.zeros_like(gt), gt) == (0.0, 0.0)
    assert metrics.pixel_metrics(np.zeros_like(gt), np.zeros_like(gt)) == (1.0, 1.0)


def test_pixel_metrics_pool_frames():
    pred = np.zeros((2, 2, 2), dtype=bool)
    gt = np.zeros((2, 2, 2), dtype=bool)
    pred[0, 0, 0] = gt[0, 0, 0] = True
    gt[1, 1, 1] = True
    assert metrics.confusion(pred, gt) == (1, 0, 1)
    assert metrics.pixel_metrics(pred, gt) == (0.5, 2 / 3)


def blob_mask(shape, r, c, half=1):
    m = np.zeros(shape, dtype=bool)
    m[r - half:r + half + 1, c - half:c + half + 1] = True
    return m


def test_target_metrics_identical_masks():
    gt = blob_mask((20, 20), 10, 10)[..., None]
    assert metrics.target_metrics(gt, gt) == (1.0, 0.0)


def test_target_metrics_nearby_blob_counts_as_detected():
    gt = blob_mask((20, 20), 10, 10, half=0)[..., None]
    pred = blob_mask((20, 20), 12, 10, half=0)[..., None]
    pd, fa = metrics.target_metrics(pred, gt, match_radius=3.0)
    assert pd == 1.0
    # a detection that touches no GT pixel still counts towards Fa
    assert fa == 1 / 400
    assert metrics.target_metrics(pred, gt, match_radius=1.5)[0] == 0.0


def test_target_metrics_spurious_blob_false_alarm():
    gt = blob_mask((100, 100), 20, 20)[..., None]
    pred = gt.copy()
    pred[70:72, 70:72, 0] = True
    pd, fa = metrics.target_metrics(pred, gt)
    assert pd == 1.0 and fa == 4 / 10_000


def test_target_metrics_overlap_beyond_radius():
    gt = np.zeros((30, 30, 1), dtype=bool)
    gt[5, 2:25, 0] = True
    pred = np.zeros_like(gt)
    pred[5, 20, 0] = True
    assert metrics.target_metrics(pred, gt, match_radius=1.0) == (1.0, 0.0)


def test_target_metrics_undefined_without_targets():
    z = np.zeros((5, 5, 2), dtype=bool)
    with pytest.raises(UndefinedMetric):
        metrics.target_metrics(z, z)
    with pytest.raises(ValueError):
        metrics.target_metrics(z, np.zeros((5, 5, 3), dtype=bool))


def test_evaluate_and_report_csv(tmp_path):
    gt = np.zeros((10, 10, 2), dtype=bool)
    gt[4:6, 4:6, :] = True
    pred = gt.copy()
    pred[0, 0, 1] = True
    rep = metrics.evaluate(pred, gt)
    assert rep.pd == 1.0 and rep.fa == 1 / 200
    assert rep.frames[0] == (0, 4, 0, 0, 1.0, 1.0)
    path = tmp_path / "r.csv"
    metrics.write_report_csv(path, rep)
    lines = path.read_text().splitlines()
    assert lines[0] == "frame,tp,fp,fn,iou,f1"
    assert lines[3].startswith("all,8,1,0,")
    assert lines[-2] == "iou_1e-2,f1_1e-2,pd_1e-2,fa_1e-5"
    assert np.isclose(float(lines[-1].split(",")[3]), 500.0)


masks = st.integers(0, 10_000).map(
    lambda s: (np.random.default_rng(s).random((6, 6, 3)) < 0.3,
               np.random.default_rng(s + 1).random((6, 6, 3)) < 0.3)
)


@settings(max_examples=60)
@given(masks)
def test_iou_never_exceeds_f1(pair):
    pred, gt = pair
    iou, f1 = metrics.pixel_metrics(pred, gt)
    assert 0 <= iou <= f1 <= 1


@settings(max_examples=40)
@given(masks, st.permutations(range(3)))
def test_metrics_invariant_to_frame_order(pair, perm):
    pred, gt = pair
    gt[0, 0, :] = True
    a = metrics.evaluate(pred, gt)
    b = metrics.evaluate(pred[..., list(perm)], gt[..., list(perm)])
    assert np.isclose(a.iou, b.iou) and np.isclose(a.f1, b.f1)
    assert np.isclose(a.pd, b.pd) and np.isclose(a.fa, b.fa)


@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_binarize_scale_invariant(seed, scale):
    t = np.random.default_rng(seed).normal(size=(5, 5))
    t[0, 0] = 3.0
    assert np.array_equal(metrics.binarize(t, 0.4), metrics.binarize(scale * t, 0.4))
