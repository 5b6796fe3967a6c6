"""Synthetic infrared sequences with known targets.

Backgrounds are Tucker tensors with smooth (low-frequency cosine) factors,
rescaled into a mid-grey range. Targets are Gaussian blobs moving on straight
lines; the ground-truth mask marks pixels where a clean blob exceeds half its
amplitude.
"""

from dataclasses import dataclass, field

import numpy as np

from irstd.tensor import multi_mode_product


@dataclass
class Target:
    row: float
    col: float
    v_row: float = 0.0
    v_col: float = 0.0
    amplitude: float = 0.6
    radius: float = 2.0

    @property
    def sigma(self):
        # radius ~ 2 sigma of the blob
        return self.radius / 2.0

    def position(self, f):
        return self.row + self.v_row * f, self.col + self.v_col * f


@dataclass
class SyntheticScene:
    n1: int = 64
    n2: int = 64
    n3: int = 16
    bg_ranks: tuple = (3, 3, 2)
    bg_low: float = 0.15
    bg_high: float = 0.65
    targets: list = field(default_factory=list)
    noise: float = 0.01

    def validate(self):
        for i, t in enumerate(self.targets):
            if not 0 < t.amplitude <= 1:
                raise ValueError(f"target {i}: amplitude must lie in (0, 1]")
            if t.radius <= 0:
                raise ValueError(f"target {i}: radius must be positive")
            for f in range(self.n3):
                r, c = t.position(f)
                if not (0 <= r <= self.n1 - 1 and 0 <= c <= self.n2 - 1):
                    raise ValueError(f"target {i} leaves the frame at frame {f} ({r:.2f}, {c:.2f})")


def smooth_factor(n, rank, rng, max_freq=2.0):
    """``n x rank`` matrix whose columns are sums of a few low-frequency cosines."""
    x = np.linspace(0.0, 1.0, n)
    cols = []
    for _ in range(rank):
        col = np.zeros(n)
        for _ in range(3):
            freq = rng.uniform(0.0, max_freq)
            col += rng.normal() * np.cos(np.pi * freq * x + rng.uniform(0, 2 * np.pi))
        cols.append(col)
    return np.stack(cols, axis=1)


def render_background(scene, rng):
    ranks = scene.bg_ranks
    core = rng.normal(size=ranks)
    factors = [
        smooth_factor(scene.n1, ranks[0], rng),
        smooth_factor(scene.n2, ranks[1], rng),
        smooth_factor(scene.n3, ranks[2], rng, max_freq=0.5),
    ]
    bg = multi_mode_product(core, factors, (1, 2, 3))
    lo, hi = bg.min(), bg.max()
    bg = scene.bg_low + (scene.bg_high - scene.bg_low) * (bg - lo) / (hi - lo if hi > lo else 1.0)
    return np.clip(bg, 0.0, 1.0)


def render_blob(n1, n2, row, col, amplitude, sigma):
    r = np.arange(n1)[:, None] - row
    c = np.arange(n2)[None, :] - col
    return amplitude * np.exp(-(r * r + c * c) / (2.0 * sigma * sigma))


def generate_scene(scene, seed=0):
    """Return ``(images, gt_masks)``, both ``(n1, n2, n3)``; masks are boolean."""
    scene.validate()
    rng = np.random.default_rng(seed)
    bg = render_background(scene, rng)
    signal = np.zeros_like(bg)
    gt = np.zeros(bg.shape, dtype=bool)
    for t in scene.targets:
        for f in range(scene.n3):
            r, c = t.position(f)
            blob = render_blob(scene.n1, scene.n2, r, c, t.amplitude, t.sigma)
            signal[..., f] += blob
            gt[..., f] |= blob > 0.5 * t.amplitude
    noise = scene.noise * rng.normal(size=bg.shape) if scene.noise > 0 else 0.0
    images = np.clip(bg + signal + noise, 0.0, 1.0)
    return images, gt


def default_scene(seed=0, n_targets=1, speed=1.0, amplitude=0.6, radius=2.0,
                  size=(64, 64, 16), noise=0.01):
    """Desk-scale scene with targets on random straight, in-frame trajectories."""
    n1, n2, n3 = size
    rng = np.random.default_rng(10_000 + seed)
    margin = 4.0
    targets = []
    for _ in range(n_targets):
        for _ in range(1000):
            angle = rng.uniform(0, 2 * np.pi)
            vr, vc = speed * np.sin(angle), speed * np.cos(angle)
            r0 = rng.uniform(margin, n1 - 1 - margin)
            c0 = rng.uniform(margin, n2 - 1 - margin)
            r1, c1 = r0 + vr * (n3 - 1), c0 + vc * (n3 - 1)
            if margin <= r1 <= n1 - 1 - margin and margin <= c1 <= n2 - 1 - margin:
                break
        else:
            raise ValueError("could not place a target trajectory inside the frame")
        targets.append(Target(round(r0, 3), round(c0, 3), round(vr, 6), round(vc, 6), amplitude, radius))
    return SyntheticScene(n1, n2, n3, targets=targets, noise=noise)
