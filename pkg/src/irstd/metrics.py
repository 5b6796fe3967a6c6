"""Binarization and detection metrics (pixel IoU/F1, target-level Pd/Fa)."""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

EIGHT = np.ones((3, 3), dtype=int)


class UndefinedMetric(ValueError):
    pass


def binarize(t, tr=0.4, absolute=False):
    """Masks of ``|t| > tr * max|t|`` (or ``|t| > tr`` when ``absolute``)."""
    mag = np.abs(np.asarray(t, dtype=float))
    if absolute:
        return mag > tr
    peak = float(mag.max()) if mag.size else 0.0
    if peak == 0.0:
        return np.zeros(mag.shape, dtype=bool)
    return mag > tr * peak


@dataclass
class Component:
    pixels: np.ndarray  # (k, 2) array of (row, col)
    centroid: tuple

    @property
    def area(self):
        return len(self.pixels)


def connected_components(mask):
    """8-connected components of a 2-D mask, in label order."""
    labels, n = ndimage.label(np.asarray(mask, dtype=bool), structure=EIGHT)
    out = []
    for k in range(1, n + 1):
        pix = np.argwhere(labels == k)
        out.append(Component(pix, tuple(pix.mean(axis=0))))
    return out


def _frames(masks):
    masks = np.asarray(masks, dtype=bool)
    if masks.ndim == 2:
        masks = masks[..., None]
    return masks


def confusion(pred, gt):
    pred, gt = _frames(pred), _frames(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    tp = int(np.sum(pred & gt))
    fp = int(np.sum(pred & ~gt))
    fn = int(np.sum(~pred & gt))
    return tp, fp, fn


def iou_f1(tp, fp, fn):
    if tp + fp + fn == 0:
        return 1.0, 1.0
    return tp / (tp + fp + fn), 2 * tp / (2 * tp + fp + fn)


def pixel_metrics(pred, gt):
    """Pixel IoU and F1 with counts pooled over all frames."""
    return iou_f1(*confusion(pred, gt))


def _match_frame(pred2d, gt2d, radius):
    pcs = connected_components(pred2d)
    gcs = connected_components(gt2d)
    detected = 0
    for g in gcs:
        gmask = np.zeros(gt2d.shape, dtype=bool)
        gmask[g.pixels[:, 0], g.pixels[:, 1]] = True
        for pc in pcs:
            dist = np.hypot(pc.centroid[0] - g.centroid[0], pc.centroid[1] - g.centroid[1])
            if dist <= radius or gmask[pc.pixels[:, 0], pc.pixels[:, 1]].any():
                detected += 1
                break
    # False-alarm pixels: predicted components touching no GT pixel.
    false_px = sum(pc.area for pc in pcs if not gt2d[pc.pixels[:, 0], pc.pixels[:, 1]].any())
    return detected, len(gcs), false_px


def target_metrics(pred, gt, match_radius=3.0):
    """Target-level detection probability and pixel false-alarm rate.

    A GT component is detected when a predicted component overlaps it or has
    its centroid within ``match_radius`` pixels. ``Fa`` counts pixels of
    predicted components that overlap no GT pixel, over all pixels.
    """
    pred, gt = _frames(pred), _frames(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    if match_radius <= 0:
        raise ValueError("match_radius must be positive")
    detected = total = false_px = 0
    for f in range(pred.shape[2]):
        d, n, fpx = _match_frame(pred[..., f], gt[..., f], match_radius)
        detected += d
        total += n
        false_px += fpx
    if total == 0:
        raise UndefinedMetric("no ground-truth targets in the sequence; Pd is undefined")
    return detected / total, false_px / pred.size


@dataclass
class MetricReport:
    iou: float
    f1: float
    pd: float
    fa: float
    frames: list = field(default_factory=list)  # (frame, tp, fp, fn, iou, f1)

    def scaled(self):
        """Values in the customary reporting units (x1e-2, x1e-2, x1e-2, x1e-5)."""
        return self.iou * 100, self.f1 * 100, self.pd * 100, self.fa * 1e5


def evaluate(pred, gt, match_radius=3.0):
    pred, gt = _frames(pred), _frames(gt)
    iou, f1 = pixel_metrics(pred, gt)
    pd, fa = target_metrics(pred, gt, match_radius)
    rows = []
    for f in range(pred.shape[2]):
        tp, fp, fn = confusion(pred[..., f], gt[..., f])
        rows.append((f, tp, fp, fn) + iou_f1(tp, fp, fn))
    return MetricReport(iou, f1, pd, fa, rows)


def write_report_csv(path, report):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "tp", "fp", "fn", "iou", "f1"])
        for f, tp, fp, fn, iou, f1 in report.frames:
            w.writerow([f, tp, fp, fn, f"{iou:.6f}", f"{f1:.6f}"])
        tp = sum(r[1] for r in report.frames)
        fp = sum(r[2] for r in report.frames)
        fn = sum(r[3] for r in report.frames)
        w.writerow(["all", tp, fp, fn, f"{report.iou:.6f}", f"{report.f1:.6f}"])
        w.writerow([])
        w.writerow(["iou_1e-2", "f1_1e-2", "pd_1e-2", "fa_1e-5"])
        w.writerow([f"{v:.4f}" for v in report.scaled()])
