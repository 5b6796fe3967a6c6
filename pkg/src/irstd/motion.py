"""Dense optical flow and motion-based enhancement of an image stack.

Flow follows Farneback's two-frame method: each frame is locally approximated
by a quadratic polynomial (weighted least squares under a Gaussian
applicability), and the displacement that best maps one polynomial onto the
other is solved for per pixel, averaged over a window, refined iteratively
and propagated coarse-to-fine through an image pyramid.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass
class FlowConfig:
    pyr_scale: float = 0.5
    levels: int = 3
    winsize: int = 15
    poly_n: int = 5
    poly_sigma: float = 1.1
    iterations: int = 3


@dataclass
class FlowField:
    dx: np.ndarray
    dy: np.ndarray


def _poly_filters(n, sigma):
    x = np.arange(-n, n + 1, dtype=float)
    g = np.exp(-x * x / (2.0 * sigma * sigma))
    g /= g.sum()
    return x, g


def _poly_inverse(n, sigma):
    """Inverse Gram matrix of the 6 quadratic basis functions under the applicability."""
    x, g = _poly_filters(n, sigma)
    yy, xx = np.meshgrid(x, x, indexing="ij")
    w = np.outer(g, g)
    basis = np.stack([np.ones_like(xx), xx, yy, xx * xx, yy * yy, xx * yy])
    gram = np.einsum("aij,bij,ij->ab", basis, basis, w)
    return np.linalg.inv(gram)


def poly_expansion(img, n=5, sigma=1.1):
    """Per-pixel quadratic fit ``f(x) ~ x^T A x + b^T x + c``.

    Returns ``(a, b)`` with ``a`` of shape ``(h, w, 2, 2)`` and ``b`` of shape
    ``(h, w, 2)``; the vector order is ``(x, y)`` = (column, row).
    """
    img = np.asarray(img, dtype=float)
    x, g = _poly_filters(n, sigma)
    inv = _poly_inverse(n, sigma)

    def corr(wy, wx):
        # Separable weighted correlation: rows (y) then columns (x).
        out = ndimage.correlate1d(img, g * wy, axis=0, mode="reflect")
        return ndimage.correlate1d(out, g * wx, axis=1, mode="reflect")

    one = np.ones_like(x)
    proj = np.stack([
        corr(one, one),
        corr(one, x),
        corr(x, one),
        corr(one, x * x),
        corr(x * x, one),
        corr(x, x),
    ])
    r = np.einsum("ab,bij->aij", inv, proj)
    a = np.empty(img.shape + (2, 2))
    a[..., 0, 0] = r[3]
    a[..., 1, 1] = r[4]
    a[..., 0, 1] = a[..., 1, 0] = r[5] / 2.0
    b = np.stack([r[1], r[2]], axis=-1)
    return a, b


def _warp(field, flow):
    """Sample ``field`` (h, w, ...) at ``p + flow`` with bilinear interpolation."""
    h, w = field.shape[:2]
    rows, cols = np.mgrid[0:h, 0:w].astype(float)
    coords = [rows + flow[..., 1], cols + flow[..., 0]]
    flat = field.reshape(h, w, -1)
    out = np.empty_like(flat)
    for c in range(flat.shape[2]):
        out[..., c] = ndimage.map_coordinates(flat[..., c], coords, order=1, mode="nearest")
    return out.reshape(field.shape)


def _refine(a1, b1, a2, b2, flow, winsize):
    a2w = _warp(a2, flow)
    b2w = _warp(b2, flow)
    a = 0.5 * (a1 + a2w)
    db = -0.5 * (b2w - b1) + np.einsum("...ij,...j->...i", a, flow)
    # Normal equations A^T A d = A^T db, averaged over the window.
    ata = np.einsum("...ki,...kj->...ij", a, a)
    atb = np.einsum("...ki,...k->...i", a, db)
    size = (winsize, winsize)
    g11 = ndimage.uniform_filter(ata[..., 0, 0], size, mode="reflect")
    g12 = ndimage.uniform_filter(ata[..., 0, 1], size, mode="reflect")
    g22 = ndimage.uniform_filter(ata[..., 1, 1], size, mode="reflect")
    h1 = ndimage.uniform_filter(atb[..., 0], size, mode="reflect")
    h2 = ndimage.uniform_filter(atb[..., 1], size, mode="reflect")
    det = g11 * g22 - g12 * g12
    det = np.where(np.abs(det) < 1e-12, 1e-12, det)
    out = np.empty_like(flow)
    out[..., 0] = (g22 * h1 - g12 * h2) / det
    out[..., 1] = (g11 * h2 - g12 * h1) / det
    return out


def _pyramid(img, levels, scale):
    pyr = [img]
    for _ in range(1, levels):
        sigma = max((1.0 / scale - 1.0) * 0.5, 0.5)
        smooth = ndimage.gaussian_filter(pyr[-1], sigma, mode="reflect")
        h = max(1, int(round(pyr[-1].shape[0] * scale)))
        w = max(1, int(round(pyr[-1].shape[1] * scale)))
        pyr.append(ndimage.zoom(smooth, (h / smooth.shape[0], w / smooth.shape[1]), order=1, mode="nearest"))
    return pyr


def farneback_flow(prev, nxt, cfg=None):
    """Dense displacement ``(dx, dy)`` such that ``nxt(p) ~ prev(p - d)``."""
    cfg = cfg or FlowConfig()
    prev = np.asarray(prev, dtype=float)
    nxt = np.asarray(nxt, dtype=float)
    if prev.shape != nxt.shape or prev.ndim != 2:
        raise ValueError("frames must be 2-D and equally shaped")
    window = 2 * cfg.poly_n + 1
    if min(prev.shape) < window:
        raise ValueError(f"frames {prev.shape} smaller than the {window}-pixel polynomial window")

    pyr1 = _pyramid(prev, cfg.levels, cfg.pyr_scale)
    pyr2 = _pyramid(nxt, cfg.levels, cfg.pyr_scale)
    flow = None
    for lvl in range(cfg.levels - 1, -1, -1):
        f1, f2 = pyr1[lvl], pyr2[lvl]
        if min(f1.shape) < window:
            continue
        if flow is None:
            flow = np.zeros(f1.shape + (2,))
        elif flow.shape[:2] != f1.shape:
            zoom = (f1.shape[0] / flow.shape[0], f1.shape[1] / flow.shape[1])
            flow = np.stack([
                ndimage.zoom(flow[..., 0], zoom, order=1, mode="nearest") * zoom[1],
                ndimage.zoom(flow[..., 1], zoom, order=1, mode="nearest") * zoom[0],
            ], axis=-1)
        a1, b1 = poly_expansion(f1, cfg.poly_n, cfg.poly_sigma)
        a2, b2 = poly_expansion(f2, cfg.poly_n, cfg.poly_sigma)
        win = max(1, int(round(cfg.winsize * f1.shape[0] / prev.shape[0])) | 1)
        for _ in range(cfg.iterations):
            flow = _refine(a1, b1, a2, b2, flow, win)
    flow = np.nan_to_num(flow, nan=0.0, posinf=0.0, neginf=0.0)
    return FlowField(flow[..., 0], flow[..., 1])


def flow_magnitude(flow):
    return np.sqrt(flow.dx ** 2 + flow.dy ** 2)


def flow_magnitudes(stack, cfg=None, threads=1):
    """Per-frame magnitude maps ``(n1, n2, n3)``.

    Frame ``f`` uses the pair ``(f-1, f)``; the first frame reuses the pair
    ``(0, 1)`` since it has no predecessor. A single frame yields zeros.
    """
    stack = np.asarray(stack, dtype=float)
    n3 = stack.shape[2]
    if n3 < 2:
        return np.zeros_like(stack)
    pairs = [(f - 1, f) for f in range(1, n3)]

    def one(pair):
        return flow_magnitude(farneback_flow(stack[..., pair[0]], stack[..., pair[1]], cfg))

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            mags = list(pool.map(one, pairs))
    else:
        mags = [one(p) for p in pairs]
    return np.stack([mags[0]] + mags, axis=2)


def normalize_magnitudes(mags):
    peak = float(np.max(mags)) if mags.size else 0.0
    return mags / peak if peak > 0 else mags.copy()


def fusion_weights(mags, beta=0.1):
    """Per-frame motion confidence ``alpha = m / (m + beta)``, ``m`` the frame max."""
    peaks = np.asarray(mags).reshape(-1, np.shape(mags)[-1]).max(axis=0)
    return peaks / (peaks + beta)


def dynamic_fuse(mags, k=4, beta=0.1):
    """Blend each magnitude map with the mean of its (up to) ``k`` predecessors."""
    mags = np.asarray(mags, dtype=float)
    if mags.ndim != 3 or mags.shape[2] == 0:
        raise ValueError("dynamic_fuse needs a non-empty (n1, n2, n3) stack")
    if k < 0 or beta <= 0:
        raise ValueError("need k >= 0 and beta > 0")
    alpha = fusion_weights(mags, beta)
    fused = np.empty_like(mags)
    for f in range(mags.shape[2]):
        lo = max(0, f - k)
        if f == 0 or k == 0:
            fused[..., f] = mags[..., f]
            continue
        history = mags[..., lo:f].mean(axis=2)
        fused[..., f] = alpha[f] * mags[..., f] + (1.0 - alpha[f]) * history
    return fused


def motion_enhance(d, fused, gamma=0.05):
    d = np.asarray(d, dtype=float)
    fused = np.asarray(fused, dtype=float)
    if d.shape != fused.shape:
        raise ValueError(f"shape mismatch {d.shape} vs {fused.shape}")
    return (1.0 - gamma) * d + gamma * fused


def enhance_sequence(d, cfg=None, k=4, beta=0.1, gamma=0.05, threads=1):
    """Flow, normalization, fusion and enhancement in one call; returns ``(x, fused)``."""
    mags = normalize_magnitudes(flow_magnitudes(d, cfg, threads))
    fused = dynamic_fuse(mags, k, beta)
    return motion_enhance(d, fused, gamma), fused
