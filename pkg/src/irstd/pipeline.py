"""End-to-end detection: enhance, group, separate, scatter back, binarize."""

from dataclasses import dataclass, replace
import logging
import os

import numpy as np

from irstd import admm, grouping, metrics, motion
from irstd.inr import NumericFailure
from irstd.io import save_masks, save_sequence
from irstd.tensor import write_nlt1

log = logging.getLogger(__name__)


class StageFailure(RuntimeError):
    """Numeric failure tagged with the pipeline stage it came from."""

    def __init__(self, stage, err):
        super().__init__(f"{stage}: {err}")
        self.stage = stage


@dataclass
class DetectionOutputs:
    enhanced: np.ndarray
    fused: np.ndarray
    coarse: np.ndarray
    grid: grouping.PatchGrid
    index: np.ndarray
    distances: np.ndarray
    grouped: np.ndarray
    solve: admm.SolveResult
    targets: np.ndarray
    masks: np.ndarray
    report: metrics.MetricReport = None


def effective_similar(cfg, grid):
    s = min(cfg.similar, grid.n_patches - 1)
    if s < cfg.similar:
        log.warning("only %d patches: using S=%d instead of %d", grid.n_patches, s, cfg.similar)
    return s


def _f32(a):
    # Stage outputs are rounded to what an NLT1 dump stores, so a run resumed
    # from dumped intermediates sees exactly the same inputs downstream.
    return np.asarray(a, dtype=np.float32).astype(float)


def detect(d, cfg, gt=None, dump_dir=None, enhanced=None, coarse=None, state_dir=None):
    """Run the whole pipeline on a ``(n1, n2, n3)`` stack in ``[0, 1]``.

    ``enhanced`` and ``coarse`` resume from dumped intermediates and skip the
    stages that produced them. ``state_dir`` receives per-iteration solver
    snapshots.
    """
    cfg.validate()
    d = np.asarray(d, dtype=float)
    if d.ndim != 3:
        raise ValueError("input must be an (n1, n2, n3) stack")
    n1, n2, n3 = d.shape
    for name, a in (("enhanced", enhanced), ("coarse", coarse)):
        if a is not None and np.shape(a) != d.shape:
            raise ValueError(f"{name} stack has shape {np.shape(a)}, expected {d.shape}")
    lrtfr_cfg = replace(cfg.lrtfr, seed=cfg.seed)
    solver_cfg = replace(cfg.solver, seed=cfg.seed)
    threads = cfg.threads or os.cpu_count() or 1

    fused = np.zeros_like(d)
    if enhanced is not None:
        x = _f32(enhanced)
    elif cfg.gamma > 0:
        try:
            x, fused = motion.enhance_sequence(d, cfg.flow, cfg.k, cfg.beta, cfg.gamma, threads)
        except FloatingPointError as err:
            raise StageFailure("motion", err) from err
        x = _f32(x)
    else:
        x = _f32(d)

    if coarse is None:
        try:
            coarse = grouping.fit_coarse_background(x, lrtfr_cfg)
        except NumericFailure as err:
            raise StageFailure("coarse background", err) from err
    coarse = _f32(coarse)

    grid = grouping.PatchGrid.for_shape(n1, n2, cfg.patch)
    s = effective_similar(cfg, grid)
    index, dist = grouping.nonlocal_index(grouping.split_patches(coarse, grid), s)
    grouped = grouping.build_group_tensor(grouping.split_patches(x, grid), index)

    try:
        result = admm.solve(grouped, solver_cfg, dump_dir=state_dir)
    except NumericFailure as err:
        raise StageFailure("admm", err) from err

    targets = grouping.scatter_back(result.targets, index, grid, d.shape, cfg.scatter)
    masks = metrics.binarize(targets, cfg.tr, cfg.absolute_threshold)
    report = metrics.evaluate(masks, gt, cfg.match_radius) if gt is not None else None
    out = DetectionOutputs(x, fused, coarse, grid, index, dist, grouped, result, targets, masks, report)
    if dump_dir:
        write_outputs(dump_dir, out)
    return out


def write_outputs(out_dir, out):
    os.makedirs(out_dir, exist_ok=True)
    write_nlt1(os.path.join(out_dir, "targets.nlt"), out.targets)
    write_nlt1(os.path.join(out_dir, "background_groups.nlt"), out.solve.background)
    write_nlt1(os.path.join(out_dir, "coarse.nlt"), out.coarse)
    write_nlt1(os.path.join(out_dir, "enhanced.nlt"), out.enhanced)
    grouping.write_index_csv(os.path.join(out_dir, "nonlocal_index.csv"), out.index, out.distances)
    save_masks(os.path.join(out_dir, "masks"), out.masks)
    save_sequence(os.path.join(out_dir, "fused"), out.fused / max(float(out.fused.max()), 1e-12))
    if out.report is not None:
        metrics.write_report_csv(os.path.join(out_dir, "report.csv"), out.report)
