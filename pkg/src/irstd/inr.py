"""Tucker background model with sine-activated factor networks.

Each mode ``d`` of the background has a factor matrix ``U_d`` whose row ``i`` is
a small MLP evaluated at the normalized coordinate ``i / n_d``. A stack of
``L`` core tensors (one per nonlocal group) is contracted with the shared
factor matrices to give the ``L x n_1 x ... x n_N`` background.

Gradients are computed by hand (reverse mode) so the whole model stays in
numpy; ``tests/test_inr.py`` checks them against central differences.
"""

from dataclasses import dataclass, field
import os

import numpy as np

from irstd.tensor import forward_diff, forward_diff_adjoint, mode_product, read_nlt1, write_nlt1


class NumericFailure(RuntimeError):
    """Raised when a loss or iterate stops being finite."""


@dataclass
class FactorNet:
    """MLP ``R -> R^r``: sine hidden layers, linear output layer, no biases."""

    weights: list
    omega: float = 30.0

    @property
    def rank(self):
        return self.weights[-1].shape[0]

    def forward(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, 1)
        acts = [x]
        pre = []
        h = x
        for w in self.weights[:-1]:
            z = h @ w.T
            h = np.sin(self.omega * z)
            pre.append(z)
            acts.append(h)
        out = h @ self.weights[-1].T
        return out, (acts, pre)

    def backward(self, cache, g_out):
        acts, pre = cache
        grads = [None] * len(self.weights)
        grads[-1] = g_out.T @ acts[-1]
        g = g_out @ self.weights[-1]
        for m in range(len(self.weights) - 2, -1, -1):
            g = g * (self.omega * np.cos(self.omega * pre[m]))
            grads[m] = g.T @ acts[m]
            if m > 0:
                g = g @ self.weights[m]
        return grads


def init_siren(width, depth, rank, omega=30.0, seed=0):
    """Sine-network initialization.

    First layer uniform in ``[-1/fan_in, 1/fan_in]``, later layers uniform in
    ``[-sqrt(6/fan_in)/omega, sqrt(6/fan_in)/omega]``. ``depth`` counts weight
    matrices, so ``depth=1`` is a single linear map.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    rng = np.random.default_rng(seed)
    shapes = []
    fan_in = 1
    for _ in range(depth - 1):
        shapes.append((width, fan_in))
        fan_in = width
    shapes.append((rank, fan_in))
    weights = []
    for i, shape in enumerate(shapes):
        bound = 1.0 / shape[1] if i == 0 else np.sqrt(6.0 / shape[1]) / omega
        weights.append(rng.uniform(-bound, bound, size=shape))
    return FactorNet(weights, float(omega))


def coordinates(n):
    return np.arange(1, n + 1, dtype=float) / n


def factor_matrix(net, n):
    """``n x r`` factor matrix whose row ``i`` is ``net((i + 1) / n)``."""
    if n < 1:
        raise ValueError("extent must be >= 1")
    return net.forward(coordinates(n))[0]


def output_bound(net):
    """Largest row l1 norm of the output layer; bounds every factor entry."""
    return float(np.abs(net.weights[-1]).sum(axis=1).max())


@dataclass
class InrParameters:
    """Group cores ``(L, r_1, ..., r_N)`` plus one factor net per mode."""

    cores: np.ndarray
    nets: list
    extents: tuple
    seed: int = 0

    @property
    def ranks(self):
        return self.cores.shape[1:]

    def arrays(self):
        out = [self.cores]
        for net in self.nets:
            out.extend(net.weights)
        return out

    def with_arrays(self, arrays):
        arrays = list(arrays)
        cores = arrays[0]
        nets = []
        pos = 1
        for net in self.nets:
            k = len(net.weights)
            nets.append(FactorNet(arrays[pos:pos + k], net.omega))
            pos += k
        return InrParameters(cores, nets, self.extents, self.seed)

    def copy(self):
        return self.with_arrays([a.copy() for a in self.arrays()])


def clip_ranks(ranks, extents):
    return tuple(max(1, min(int(r), int(n))) for r, n in zip(ranks, extents))


def init_inr(n_groups, extents, ranks, width=128, depth=3, omega=30.0, seed=0):
    """Draw a fresh parameter bundle; ranks are clipped to the extents."""
    extents = tuple(int(n) for n in extents)
    ranks = clip_ranks(ranks, extents)
    nets = [
        init_siren(width, depth, r, omega, seed=seed * 1000 + 1 + d)
        for d, r in enumerate(ranks)
    ]
    rng = np.random.default_rng(seed * 1000)
    bound = 1.0 / np.sqrt(ranks[0])
    cores = rng.uniform(-bound, bound, size=(n_groups,) + ranks)
    return InrParameters(cores, nets, extents, seed)


def _check_shapes(theta):
    if len(theta.nets) != theta.cores.ndim - 1 or len(theta.extents) != len(theta.nets):
        raise ValueError("core order, factor-net count and extents disagree")
    for d, net in enumerate(theta.nets):
        if net.rank != theta.cores.shape[d + 1]:
            raise ValueError(
                f"mode {d + 1}: factor rank {net.rank} != core extent {theta.cores.shape[d + 1]}"
            )


def _forward(theta):
    _check_shapes(theta)
    factors, caches = [], []
    for net, n in zip(theta.nets, theta.extents):
        u, cache = net.forward(coordinates(n))
        factors.append(u)
        caches.append(cache)
    b = theta.cores
    for d, u in enumerate(factors):
        b = mode_product(b, u, d + 2)
    return b, factors, caches


def assemble_background(theta):
    """``B[l] = C_l x_1 U_1 x_2 U_2 ... x_N U_N`` with factors shared across groups."""
    return _forward(theta)[0]


def _backward(theta, factors, caches, g):
    """Pull ``dLoss/dB`` back to the cores and every factor-net weight."""
    n_modes = len(factors)
    g_core = g
    for d, u in enumerate(factors):
        g_core = mode_product(g_core, u.T, d + 2)
    grads = [g_core]
    for d in range(n_modes):
        # Contract the gradient with every other factor, then against the core.
        q = g
        for e, u in enumerate(factors):
            if e != d:
                q = mode_product(q, u.T, e + 2)
        q_mat = np.moveaxis(q, d + 1, 0).reshape(q.shape[d + 1], -1)
        c_mat = np.moveaxis(theta.cores, d + 1, 0).reshape(theta.cores.shape[d + 1], -1)
        g_u = q_mat @ c_mat.T
        grads.extend(theta.nets[d].backward(caches[d], g_u))
    return theta.with_arrays(grads)


def charbonnier(u, eps):
    return np.sqrt(u * u + eps)


def tv_value_and_grad(b, axes, weights, eps=1e-6):
    """Charbonnier-smoothed anisotropic TV and its gradient w.r.t. ``b``."""
    value = 0.0
    grad = np.zeros_like(b)
    for axis, w in zip(axes, weights):
        if w == 0:
            continue
        du = forward_diff(b, axis)
        s = charbonnier(du, eps)
        value += w * float(s.sum())
        grad += w * forward_diff_adjoint(du / s, axis)
    return value, grad


# 5-way layout (group, row, col, frame, slot): x/y act on rows/cols, z on frames.
TV_AXES = (1, 2, 3)


def loss_and_grad(theta, target, rho, phi, eta=1.0, eps_c=1e-6):
    """Background subproblem loss and its exact gradient.

    ``loss = rho/2 * ||target - B||_F^2 + phi * TV(B)`` where ``TV`` sums the
    Charbonnier-smoothed forward differences along rows, columns and
    (weighted by ``eta``) frames.
    """
    b, factors, caches = _forward(theta)
    if b.shape != np.shape(target):
        raise ValueError(f"target shape {np.shape(target)} != background shape {b.shape}")
    r = b - target
    loss = 0.5 * rho * float(np.sum(r * r))
    g = rho * r
    if phi > 0:
        tv, g_tv = tv_value_and_grad(b, TV_AXES, (1.0, 1.0, eta), eps_c)
        loss += phi * tv
        g = g + phi * g_tv
    if not np.isfinite(loss):
        raise NumericFailure("non-finite background loss")
    return loss, _backward(theta, factors, caches, g)


def loss_only(theta, target, rho, phi, eta=1.0, eps_c=1e-6):
    b = assemble_background(theta)
    r = b - target
    loss = 0.5 * rho * float(np.sum(r * r))
    if phi > 0:
        loss += phi * tv_value_and_grad(b, TV_AXES, (1.0, 1.0, eta), eps_c)[0]
    if not np.isfinite(loss):
        raise NumericFailure("non-finite background loss")
    return loss


def l1_loss_and_grad(theta, target):
    """Sum of absolute residuals and a subgradient (sign of the residual)."""
    b, factors, caches = _forward(theta)
    r = b - target
    loss = float(np.abs(r).sum())
    if not np.isfinite(loss):
        raise NumericFailure("non-finite l1 fitting loss")
    return loss, _backward(theta, factors, caches, np.sign(r))


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state):
    """One bias-corrected Adam update on a list of arrays; returns new arrays."""
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ValueError(f"parameter {i}: shape {p.shape} vs gradient {g.shape}")
        m = state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        v = state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        out.append(p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
    return out, state


def save_checkpoint(directory, theta):
    """Write every parameter array back to back as NLT1 plus a text manifest.

    NLT1 stores float32, so a resumed run continues from rounded weights.
    """
    os.makedirs(directory, exist_ok=True)
    arrays = theta.arrays()
    with open(os.path.join(directory, "params.nlt"), "wb") as fh:
        for a in arrays:
            write_nlt1(fh, a)
    lines = [
        f"seed = {theta.seed}",
        f"extents = {','.join(str(n) for n in theta.extents)}",
        f"omega = {','.join(repr(net.omega) for net in theta.nets)}",
        f"layers = {','.join(str(len(net.weights)) for net in theta.nets)}",
    ]
    lines += [f"shape{i} = {','.join(str(s) for s in a.shape)}" for i, a in enumerate(arrays)]
    with open(os.path.join(directory, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(directory):
    manifest = {}
    with open(os.path.join(directory, "manifest.txt")) as fh:
        for line in fh:
            if "=" in line:
                key, value = line.split("=", 1)
                manifest[key.strip()] = value.strip()
    layers = [int(v) for v in manifest["layers"].split(",")]
    omegas = [float(v) for v in manifest["omega"].split(",")]
    arrays = []
    with open(os.path.join(directory, "params.nlt"), "rb") as fh:
        for _ in range(1 + sum(layers)):
            arrays.append(read_nlt1(fh))
    nets, pos = [], 1
    for k, omega in zip(layers, omegas):
        nets.append(FactorNet(arrays[pos:pos + k], omega))
        pos += k
    extents = tuple(int(v) for v in manifest["extents"].split(","))
    return InrParameters(arrays[0], nets, extents, int(manifest["seed"]))
