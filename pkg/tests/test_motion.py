import cv2
import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st
from scipy import ndimage

from irstd import motion
from irstd.motion import FlowConfig, FlowField


def textured(seed=0, size=96):
    rng = np.random.default_rng(seed)
    base = ndimage.gaussian_filter(rng.random((size, size)), 2.0)
    return (base - base.min()) / (base.max() - base.min())


def shifted_pair(dx, dy, seed=0):
    base = textured(seed)
    prev = base[10:74, 10:74]
    nxt = np.roll(base, shift=(dy, dx), axis=(0, 1))[10:74, 10:74]
    return prev, nxt


def test_identical_frames_give_zero_flow():
    img = textured(1)[:64, :64]
    flow = motion.farneback_flow(img, img)
    assert np.abs(flow.dx).max() <= 1e-6 and np.abs(flow.dy).max() <= 1e-6


@pytest.mark.parametrize("dx,dy", [(1, 0), (0, 1), (-1, 2)])
def test_integer_translation_recovered(dx, dy):
    prev, nxt = shifted_pair(dx, dy)
    flow = motion.farneback_flow(prev, nxt)
    c = slice(12, -12)
    assert abs(np.median(flow.dx[c, c]) - dx) <= 0.3
    assert abs(np.median(flow.dy[c, c]) - dy) <= 0.3


def test_agrees_with_opencv_farneback():
    prev, nxt = shifted_pair(1, 0, seed=4)
    ours = motion.farneback_flow(prev, nxt)
    ref = cv2.calcOpticalFlowFarneback(
        (prev * 255).astype(np.float32), (nxt * 255).astype(np.float32), None, 0.5, 3, 15, 3, 5, 1.1, 0
    )
    c = slice(12, -12)
    assert np.abs(ours.dx[c, c] - ref[c, c, 0]).mean() < 0.05
    assert np.abs(ours.dy[c, c] - ref[c, c, 1]).mean() < 0.05


def test_noise_frames_finite():
    rng = np.random.default_rng(2)
    flow = motion.farneback_flow(rng.random((48, 48)), rng.random((48, 48)))
    assert np.all(np.isfinite(flow.dx)) and np.all(np.isfinite(flow.dy))


def test_small_frames_rejected():
    with pytest.raises(ValueError):
        motion.farneback_flow(np.zeros((8, 8)), np.zeros((8, 8)))
    with pytest.raises(ValueError):
        motion.farneback_flow(np.zeros((20, 20)), np.zeros((20, 21)))


def test_flow_magnitude():
    f = FlowField(np.array([[3.0, 0.0]]), np.array([[4.0, 0.0]]))
    assert np.array_equal(motion.flow_magnitude(f), [[5.0, 0.0]])
    flipped = FlowField(-f.dx, -f.dy)
    assert np.array_equal(motion.flow_magnitude(flipped), motion.flow_magnitude(f))


def test_alpha_half_when_peak_equals_beta():
    mags = np.zeros((2, 2, 2))
    mags[0, 0, 1] = 0.1
    assert motion.fusion_weights(mags, beta=0.1)[1] == 0.5


def test_zero_frame_takes_history_mean():
    rng = np.random.default_rng(0)
    mags = rng.random((4, 4, 6))
    mags[..., 5] = 0.0
    fused = motion.dynamic_fuse(mags, k=4, beta=0.1)
    assert np.allclose(fused[..., 5], mags[..., 1:5].mean(axis=2))


def test_first_frame_passes_through_and_short_history():
    rng = np.random.default_rng(1)
    mags = rng.random((3, 3, 4))
    fused = motion.dynamic_fuse(mags, k=4, beta=0.1)
    assert np.array_equal(fused[..., 0], mags[..., 0])
    a = motion.fusion_weights(mags, 0.1)[2]
    assert np.allclose(fused[..., 2], a * mags[..., 2] + (1 - a) * mags[..., :2].mean(axis=2))


def test_fuse_rejects_empty():
    with pytest.raises(ValueError):
        motion.dynamic_fuse(np.zeros((2, 2, 0)))


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.integers(1, 6), st.floats(0.01, 5.0), st.integers(0, 5))
def test_fused_is_nonnegative_convex_combination(seed, n3, beta, k):
    mags = np.random.default_rng(seed).random((3, 4, n3))
    alpha = motion.fusion_weights(mags, beta)
    assert np.all((alpha >= 0) & (alpha < 1))
    fused = motion.dynamic_fuse(mags, k, beta)
    assert np.all(fused >= 0)
    for f in range(n3):
        lo = max(0, f - k)
        window = mags[..., lo:f + 1]
        # weights alpha and (1 - alpha) / count sum to one, so the blend stays in the hull
        assert np.all(fused[..., f] <= window.max(axis=2) + 1e-12)
        assert np.all(fused[..., f] >= window.min(axis=2) - 1e-12)
        if f > 0 and k > 0:
            count = f - lo
            weights = np.array([(1 - alpha[f]) / count] * count + [alpha[f]])
            assert abs(weights.sum() - 1.0) <= 1e-12
            assert np.allclose(fused[..., f], np.tensordot(window, weights, axes=([2], [0])),
                               rtol=0, atol=1e-12)


def test_motion_enhance_examples():
    d = np.array([[0.5]])
    m = np.array([[1.0]])
    assert np.array_equal(motion.motion_enhance(d, m, 0.0), d)
    assert np.array_equal(motion.motion_enhance(d, m, 1.0), m)
    assert np.isclose(motion.motion_enhance(d, m, 0.05)[0, 0], 0.525)
    with pytest.raises(ValueError):
        motion.motion_enhance(d, np.zeros((2, 1)), 0.1)


@given(st.integers(0, 1000), st.floats(0.0, 1.0))
def test_motion_enhance_preserves_unit_range(seed, gamma):
    rng = np.random.default_rng(seed)
    out = motion.motion_enhance(rng.random((4, 4, 2)), rng.random((4, 4, 2)), gamma)
    assert out.min() >= 0 and out.max() <= 1


def test_flow_magnitudes_stack_and_threads():
    rng = np.random.default_rng(3)
    stack = np.stack([textured(0)[i:i + 40, 5:45] for i in range(4)], axis=2)
    mags = motion.flow_magnitudes(stack, FlowConfig())
    assert mags.shape == stack.shape
    assert np.array_equal(mags[..., 0], mags[..., 1])
    assert np.array_equal(mags, motion.flow_magnitudes(stack, FlowConfig(), threads=2))
    # content moves up one row per frame
    assert abs(np.median(mags[10:30, 10:30, 2]) - 1.0) < 0.3
    assert not np.any(motion.flow_magnitudes(rng.random((20, 20, 1))))
