"""Plug-and-play ADMM separating a grouped stack into background and targets.

Solves ``min ||X - B(theta) - T||_F^2 + lam ||T||_1 + phi TV(B(theta))`` by
splitting ``B`` off through an auxiliary ``A``::

    A     <- argmin ||X - A - T||^2 + rho/2 ||A - B + Lam||^2      (closed form)
    theta <- a few Adam steps on rho/2 ||A + Lam - B||^2 + phi TV(B)
    T     <- soft(X - A, lam / 2)
    Lam   <- Lam + A - B;  rho <- kappa * rho
"""

from dataclasses import dataclass, field
import csv
import logging
import os

import numpy as np

from irstd import inr
from irstd.tensor import fro_norm, write_nlt1

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    lambda_sparse: float = 0.25
    phi: float = 1e-6
    eta: float = 1.0
    rho0: float = 0.01
    kappa: float = 1.05
    inner_steps: int = 10
    lr: float = 1e-3
    max_outer: int = 150
    min_outer: int = 1
    tol: float = 1e-3
    ranks: tuple = (8, 8, 6, 4)
    width: int = 128
    depth: int = 3
    omega: float = 30.0
    seed: int = 0

    def validate(self):
        if self.lambda_sparse <= 0:
            raise ValueError("lambda_sparse must be > 0")
        if self.kappa <= 1:
            raise ValueError("kappa must be > 1")
        if self.tol <= 0 or self.rho0 <= 0:
            raise ValueError("tol and rho0 must be > 0")
        if self.inner_steps < 1 or self.max_outer < 1:
            raise ValueError("inner_steps and max_outer must be >= 1")


@dataclass
class AdmmState:
    a: np.ndarray
    tp: np.ndarray
    lam: np.ndarray
    rho: float
    t: int = 0
    re_history: list = field(default_factory=list)
    rho_history: list = field(default_factory=list)
    inner_history: list = field(default_factory=list)


@dataclass
class SolveResult:
    background: np.ndarray
    targets: np.ndarray
    re_history: list
    rho_history: list
    inner_history: list
    theta: object
    converged: bool
    iterations: int


def update_a(xp, tp, b, lam, rho):
    """Stationary point of ``||xp - A - tp||^2 + rho/2 ||A - b + lam||^2``."""
    return (2.0 * (xp - tp) + rho * (b - lam)) / (2.0 + rho)


def a_stationarity(xp, a, tp, b, lam, rho):
    """Sup norm of the A-subproblem gradient; zero at the exact update."""
    return float(np.max(np.abs(-2.0 * (xp - a - tp) + rho * (a - b + lam))))


def soft_threshold(x, xi):
    """``sign(x) * max(|x| - xi, 0)``, elementwise."""
    if np.any(np.asarray(xi) < 0):
        raise ValueError("threshold must be non-negative")
    return np.sign(x) * np.maximum(np.abs(x) - xi, 0.0)


def update_theta(theta, a, lam, rho, phi, eta, inner_steps, adam=None, lr=1e-3):
    """Inner Adam loop on the background subproblem with target ``a + lam``.

    Returns the parameters with the lowest loss seen, that loss, and the Adam
    state (moments carry over between outer iterations).
    """
    if inner_steps < 1:
        raise ValueError("inner_steps must be >= 1")
    adam = adam if adam is not None else inr.AdamState(lr=lr)
    target = a + lam
    best, best_loss = theta, np.inf
    for _ in range(inner_steps):
        loss, grads = inr.loss_and_grad(theta, target, rho, phi, eta)
        if loss < best_loss:
            best, best_loss = theta, loss
        arrays, adam = inr.adam_step(theta.arrays(), grads.arrays(), adam)
        theta = theta.with_arrays(arrays)
    loss = inr.loss_only(theta, target, rho, phi, eta)
    if loss < best_loss:
        best, best_loss = theta, loss
    return best, best_loss, adam


def update_multiplier(state, b, kappa):
    state.lam = state.lam + (state.a - b)
    state.rho = state.rho * kappa
    return state


def relative_change(new, old, eps=1e-12):
    return fro_norm(new - old) / max(fro_norm(old), eps)


def solve(xp, cfg=None, theta=None, dump_dir=None):
    """Run the ADMM on a grouped stack ``xp`` of shape ``(L, p, p, n3, S+1)``.

    Stops early once ``t >= min_outer`` and the relative change of a nonzero
    target iterate is ``<= tol``. A step between two all-zero iterates does not
    count: every residual may still sit inside the shrinkage dead zone. At
    ``max_outer`` the run reports ``converged`` iff the last change met ``tol``.
    """
    cfg = cfg or SolverConfig()
    cfg.validate()
    xp = np.asarray(xp, dtype=float)
    if not np.all(np.isfinite(xp)):
        raise inr.NumericFailure("input contains non-finite values")
    if theta is None:
        theta = inr.init_inr(xp.shape[0], xp.shape[1:], cfg.ranks, cfg.width, cfg.depth,
                             cfg.omega, cfg.seed)
    b = inr.assemble_background(theta)
    state = AdmmState(a=xp.copy(), tp=np.zeros_like(xp), lam=np.zeros_like(xp), rho=cfg.rho0)
    adam = inr.AdamState(lr=cfg.lr)
    writer = None
    if dump_dir:
        os.makedirs(dump_dir, exist_ok=True)
        fh = open(os.path.join(dump_dir, "re_history.csv"), "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["t", "re", "rho", "inner_loss"])
    converged = False
    try:
        while state.t < cfg.max_outer:
            state.a = update_a(xp, state.tp, b, state.lam, state.rho)
            try:
                theta, inner_loss, adam = update_theta(
                    theta, state.a, state.lam, state.rho, cfg.phi, cfg.eta, cfg.inner_steps, adam
                )
            except inr.NumericFailure as err:
                raise inr.NumericFailure(f"outer iteration {state.t + 1}: {err}") from err
            b = inr.assemble_background(theta)
            tp_new = soft_threshold(xp - state.a, cfg.lambda_sparse / 2.0)
            re = relative_change(tp_new, state.tp)
            informative = bool(np.any(state.tp))
            state.tp = tp_new
            rho_used = state.rho
            state = update_multiplier(state, b, cfg.kappa)
            state.t += 1
            if not np.isfinite(re) or not np.all(np.isfinite(state.lam)):
                raise inr.NumericFailure(f"outer iteration {state.t}: non-finite iterate")
            state.re_history.append(re)
            state.rho_history.append(rho_used)
            state.inner_history.append(inner_loss)
            if writer:
                writer.writerow([state.t, f"{re:.9g}", f"{rho_used:.9g}", f"{inner_loss:.9g}"])
                write_nlt1(os.path.join(dump_dir, f"tp_{state.t:04d}.nlt"), state.tp)
                write_nlt1(os.path.join(dump_dir, f"b_{state.t:04d}.nlt"), b)
            if informative and state.t >= cfg.min_outer and re <= cfg.tol:
                converged = True
                break
        else:
            converged = bool(state.re_history) and state.re_history[-1] <= cfg.tol
    finally:
        if writer:
            fh.close()
    if not converged:
        log.warning("ADMM stopped at max_outer=%d without reaching tol=%g", cfg.max_outer, cfg.tol)
    return SolveResult(b, state.tp, state.re_history, state.rho_history, state.inner_history,
                       theta, converged, state.t)
