"""Plain matrix RPCA baseline (inexact augmented Lagrangian) on the frame stack.

Frames are vectorized into the columns of an ``(n1*n2) x n3`` matrix, split
into low-rank plus sparse parts, and the sparse part is thresholded with the
same rule as the main detector.
"""

import numpy as np

from irstd.admm import soft_threshold


def svt(m, tau):
    """Singular value thresholding."""
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    k = int(np.count_nonzero(s))
    return (u[:, :k] * s[:k]) @ vt[:k]


def rpca_ialm(m, lam=None, tol=1e-7, max_iter=500, mu_scale=1.25, growth=1.5):
    """``min ||L||_* + lam ||S||_1  s.t.  M = L + S``; returns ``(L, S, iterations)``."""
    m = np.asarray(m, dtype=float)
    if lam is None:
        lam = 1.0 / np.sqrt(max(m.shape))
    norm_m = np.linalg.norm(m)
    if norm_m == 0:
        return np.zeros_like(m), np.zeros_like(m), 0
    spec = np.linalg.norm(m, 2)
    y = m / max(spec, np.abs(m).max() / lam)
    mu = mu_scale / spec
    mu_max = mu * 1e7
    low = np.zeros_like(m)
    sparse = np.zeros_like(m)
    for it in range(1, max_iter + 1):
        low = svt(m - sparse + y / mu, 1.0 / mu)
        sparse = soft_threshold(m - low + y / mu, lam / mu)
        resid = m - low - sparse
        y += mu * resid
        mu = min(mu * growth, mu_max)
        if np.linalg.norm(resid) <= tol * norm_m:
            break
    return low, sparse, it


def rpca_detect(d, lam=None):
    """Sparse component of a ``(n1, n2, n3)`` stack under Casorati-matrix RPCA."""
    n1, n2, n3 = d.shape
    _, sparse, _ = rpca_ialm(np.asarray(d, dtype=float).reshape(n1 * n2, n3), lam)
    return sparse.reshape(n1, n2, n3)
