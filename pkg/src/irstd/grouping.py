"""Coarse background fit and nonlocal patch grouping.

The image stack is cut into non-overlapping ``p x p x n3`` patches. Similar
patches are searched on a coarse low-rank background (so targets do not drive
the matching) and each key patch is stacked with its ``S`` nearest neighbours
into a 5-way tensor of shape ``(L, p, p, n3, S + 1)``.
"""

import csv
from dataclasses import dataclass

import numpy as np

from irstd import inr


@dataclass
class LrtfrConfig:
    ranks: tuple = (8, 8, 6)
    iters: int = 500
    lr: float = 1e-3
    width: int = 128
    depth: int = 3
    omega: float = 30.0
    seed: int = 0


def lrtfr_fit(x, cfg=None):
    """Fit a 3-way Tucker INR to ``x`` under an l1 loss with full-batch Adam.

    Returns the best parameters seen and the per-step loss history.
    """
    cfg = cfg or LrtfrConfig()
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        raise ValueError("coarse fit expects an (n1, n2, n3) stack")
    theta = inr.init_inr(1, x.shape, cfg.ranks, cfg.width, cfg.depth, cfg.omega, cfg.seed)
    target = x[None]
    state = inr.AdamState(lr=cfg.lr)
    best, best_loss = theta, np.inf
    history = []
    for _ in range(cfg.iters):
        loss, grads = inr.l1_loss_and_grad(theta, target)
        history.append(loss)
        if loss < best_loss:
            best, best_loss = theta, loss
        arrays, state = inr.adam_step(theta.arrays(), grads.arrays(), state)
        theta = theta.with_arrays(arrays)
    loss = float(np.abs(inr.assemble_background(theta) - target).sum())
    if not np.isfinite(loss):
        raise inr.NumericFailure("coarse background fit diverged")
    history.append(loss)
    if loss < best_loss:
        best = theta
    return best, history


def fit_coarse_background(x, cfg=None):
    """Low-rank coarse background of ``x``, clamped to ``[0, 1]``."""
    best, _ = lrtfr_fit(x, cfg)
    return np.clip(inr.assemble_background(best)[0], 0.0, 1.0)


@dataclass
class PatchGrid:
    p: int
    rows: int
    cols: int
    pad_rows: int = 0
    pad_cols: int = 0

    @property
    def n_patches(self):
        return self.rows * self.cols

    @classmethod
    def for_shape(cls, n1, n2, p):
        if p < 1:
            raise ValueError("patch size must be positive")
        pr = (-n1) % p
        pc = (-n2) % p
        return cls(p, (n1 + pr) // p, (n2 + pc) // p, pr, pc)


def pad_to_grid(x, grid):
    if grid.pad_rows == 0 and grid.pad_cols == 0:
        return np.asarray(x, dtype=float)
    return np.pad(x, ((0, grid.pad_rows), (0, grid.pad_cols), (0, 0)), mode="reflect")


def split_patches(x, grid):
    """``(L, p, p, n3)`` patches of the padded stack, row-major over the grid."""
    xp = pad_to_grid(x, grid)
    p = grid.p
    n3 = xp.shape[2]
    blocks = xp.reshape(grid.rows, p, grid.cols, p, n3).transpose(0, 2, 1, 3, 4)
    return blocks.reshape(grid.n_patches, p, p, n3).copy()


def stitch_patches(patches, grid):
    """Inverse of :func:`split_patches`; returns the padded stack."""
    p = grid.p
    n3 = patches.shape[-1]
    blocks = patches.reshape(grid.rows, grid.cols, p, p, n3).transpose(0, 2, 1, 3, 4)
    return blocks.reshape(grid.rows * p, grid.cols * p, n3)


def patch_distances(patches, l):
    diff = patches.reshape(len(patches), -1) - patches[l].reshape(1, -1)
    return np.sqrt(np.sum(diff * diff, axis=1))


def top_s_similar(patches, l, s, return_distances=False):
    """Indices of the ``s`` patches nearest to patch ``l`` (Frobenius distance).

    Ordered by distance, ties by index; ``l`` itself is excluded.
    """
    n = len(patches)
    if not 0 <= s <= n - 1:
        raise ValueError(f"s={s} must lie in [0, {n - 1}]")
    d = patch_distances(patches, l)
    idx = np.arange(n)
    keep = idx != l
    order = np.lexsort((idx[keep], d[keep]))[:s]
    chosen = idx[keep][order]
    if return_distances:
        return chosen, d[chosen]
    return chosen


def nonlocal_index(patches, s):
    """``(L, s)`` neighbour table and the matching distances."""
    rows = [top_s_similar(patches, l, s, return_distances=True) for l in range(len(patches))]
    index = np.array([r[0] for r in rows], dtype=int).reshape(len(patches), s)
    dist = np.array([r[1] for r in rows], dtype=float).reshape(len(patches), s)
    return index, dist


def _slots(index):
    n = len(index)
    return np.concatenate([np.arange(n)[:, None], np.asarray(index, dtype=int).reshape(n, -1)], axis=1)


def build_group_tensor(patches, index):
    """``(L, p, p, n3, S+1)``: slot 0 is the key patch, then its neighbours."""
    slots = _slots(index)
    return np.moveaxis(patches[slots], 1, -1)


def scatter_back(tp, index, grid, dims, mode="mean"):
    """Return group tensor content to image space.

    ``mode="mean"`` averages every occurrence of a base patch (its own slot 0
    plus every slot where another group references it); ``mode="slot0"`` uses
    only the key-patch slot.
    """
    tp = np.asarray(tp, dtype=float)
    n1, n2, n3 = dims
    slots = _slots(index)
    expected = (grid.n_patches, grid.p, grid.p, n3, slots.shape[1])
    if tp.shape != expected:
        raise ValueError(f"group tensor shape {tp.shape} != expected {expected}")
    if mode == "slot0":
        patches = tp[..., 0]
    elif mode == "mean":
        per_slot = np.moveaxis(tp, -1, 1)
        sums = np.zeros((grid.n_patches,) + tp.shape[1:4])
        np.add.at(sums, slots.ravel(), per_slot.reshape((-1,) + tp.shape[1:4]))
        counts = np.bincount(slots.ravel(), minlength=grid.n_patches)
        patches = sums / counts[:, None, None, None]
    else:
        raise ValueError(f"unknown scatter mode {mode!r}")
    return stitch_patches(patches, grid)[:n1, :n2, :]


def write_index_csv(path, index, distances):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["l", "rank", "j", "distance"])
        for l, (row, drow) in enumerate(zip(index, distances)):
            for rank, (j, d) in enumerate(zip(row, drow), start=1):
                w.writerow([l, rank, int(j), f"{d:.9g}"])
