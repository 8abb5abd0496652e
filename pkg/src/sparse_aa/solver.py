"""Block proximal-gradient descent for the penalized sparse-archetype objective

    Psi(W, Wt, H) = ||X - W H||_F^2 + lam * ||H - Wt X||_F^2

over nonnegative ell-sparse H and row-stochastic W, Wt.  One sweep updates
H, then W, then Wt, each by a half-step of its block gradient (step
``1/(2 L_block)``) followed by the block's exact projection.  The three
displayed update rules fold the leading minus sign of each gradient into
the step, so every block is a descent step; the objective never increases
across a sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    Factorization,
    InvalidInputError,
    SaaConfig,
    _spectral_norm_raw,
    as_matrix,
    spectral_norm,
)
from .projections import _simplex_rows_raw, _topk_raw, clamp_nonneg

_OBJ_FLOOR = 1e-30


@dataclass(frozen=True)
class ObjectiveBreakdown:
    fit: float
    reg: float
    total: float


@dataclass
class SolveTrace:
    """Per-sweep objective values and step sizes of one solve."""

    objectives: list[float] = field(default_factory=list)
    fits: list[float] = field(default_factory=list)
    regs: list[float] = field(default_factory=list)
    step_sizes: list[tuple[float, float, float]] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    stationarity_residual: float = float("nan")
    boundary_tie: bool = False

    def rows(self) -> list[tuple[int, float, float, float]]:
        return [
            (i, self.fits[i], self.regs[i], self.objectives[i])
            for i in range(len(self.objectives))
        ]


@dataclass(frozen=True)
class StationarityReport:
    """Largest block change after one full sweep, plus the top-ell tie flag."""

    residual: float
    boundary_tie: bool


def _objective_raw(X, H, W, Wt, lam: float) -> tuple[float, float, float]:
    r1 = X - W @ H
    r2 = H - Wt @ X
    fit = float(np.sum(r1 * r1))
    reg = float(np.sum(r2 * r2))
    return fit, reg, fit + lam * reg


def objective(X, fac: Factorization, lam: float) -> ObjectiveBreakdown:
    """Exact evaluation of the penalized objective and its two terms."""
    Xm = as_matrix(X, "X")
    if fac.W.shape[0] != Xm.shape[0] or fac.H.shape[1] != Xm.shape[1]:
        raise InvalidInputError("objective: shapes of X and factorization differ")
    fit, reg, total = _objective_raw(Xm, fac.H, fac.W, fac.Wt, lam)
    return ObjectiveBreakdown(fit=fit, reg=reg, total=total)


def lipschitz_constants(
    W,
    H,
    X,
    lam: float,
    eps: float = 1e-6,
    smax_x: float | None = None,
) -> tuple[float, float, float]:
    """Block gradient Lipschitz constants (L1 for H, L2 for W, L3 for Wt)."""
    if eps <= 0:
        raise InvalidInputError("lipschitz_constants: eps must be positive")
    sw = spectral_norm(W)
    sh = spectral_norm(H)
    if smax_x is None:
        smax_x = spectral_norm(X)
    l1 = 2.0 * (lam + sw * sw)
    l2 = 2.0 * max(sh * sh, eps)
    l3 = 2.0 * lam * smax_x * smax_x
    return l1, l2, l3


def grad_H(X, fac: Factorization, lam: float) -> np.ndarray:
    return -2.0 * fac.W.T @ (X - fac.W @ fac.H) + 2.0 * lam * (fac.H - fac.Wt @ X)


def grad_W(X, fac: Factorization) -> np.ndarray:
    return -2.0 * (X - fac.W @ fac.H) @ fac.H.T


def grad_Wt(X, fac: Factorization, lam: float) -> np.ndarray:
    return -2.0 * lam * (fac.H - fac.Wt @ X) @ X.T


def _step_h_raw(X, H, W, Wt, lam, ell, l1):
    pi = H - (-(W.T @ (X - W @ H)) + lam * (H - Wt @ X)) / l1
    out, _ = _topk_raw(np.maximum(pi, 0.0), ell)
    return out


def _step_w_raw(X, H, W, l2):
    return _simplex_rows_raw(W + ((X - W @ H) @ H.T) / l2)


def _step_wt_raw(X, H, Wt, lam, l3):
    if lam == 0.0:
        return Wt.copy()
    return _simplex_rows_raw(Wt + (lam / l3) * ((H - Wt @ X) @ X.T))


def step_H(X, fac: Factorization, lam: float, ell: int, l1: float | None = None) -> np.ndarray:
    """Proximal descent step on H: clamp then keep the top ``ell`` entries."""
    Xm = as_matrix(X, "X")
    if l1 is None:
        sw = spectral_norm(fac.W)
        l1 = 2.0 * (lam + sw * sw)
    return _step_h_raw(Xm, fac.H, fac.W, fac.Wt, lam, ell, l1)


def step_W(
    X,
    fac: Factorization,
    lam: float = 0.0,
    eps: float = 1e-6,
    l2: float | None = None,
) -> np.ndarray:
    """Projected descent step on W; the gradient does not involve ``lam``."""
    Xm = as_matrix(X, "X")
    if l2 is None:
        sh = spectral_norm(fac.H)
        l2 = 2.0 * max(sh * sh, eps)
    return _step_w_raw(Xm, fac.H, fac.W, l2)


def step_Wt(X, fac: Factorization, lam: float, l3: float | None = None) -> np.ndarray:
    """Projected descent step on Wt; skipped (input returned) when lam == 0."""
    Xm = as_matrix(X, "X")
    if lam == 0.0:
        return fac.Wt.copy()
    if l3 is None:
        sx = spectral_norm(Xm)
        l3 = 2.0 * lam * sx * sx
    return _step_wt_raw(Xm, fac.H, fac.Wt, lam, l3)


def default_init(X, cfg: SaaConfig) -> Factorization:
    """Feasible-by-construction start: uniform weights, thresholded Wt X."""
    Xm = as_matrix(X, "X")
    m = Xm.shape[0]
    W = np.full((m, cfg.k), 1.0 / cfg.k)
    Wt = np.full((cfg.k, m), 1.0 / m)
    H, _ = _topk_raw(np.maximum(Wt @ Xm, 0.0), cfg.ell)
    return Factorization(H=H, W=W, Wt=Wt)


def _sweep_raw(X, H, W, Wt, lam, ell, eps, smax_x):
    sw = _spectral_norm_raw(W)
    l1 = 2.0 * (lam + sw * sw)
    H1 = _step_h_raw(X, H, W, Wt, lam, ell, l1)
    sh = _spectral_norm_raw(H1)
    l2 = 2.0 * max(sh * sh, eps)
    W1 = _step_w_raw(X, H1, W, l2)
    l3 = 2.0 * lam * smax_x * smax_x
    Wt1 = _step_wt_raw(X, H1, Wt, lam, l3)
    return H1, W1, Wt1, (l1, l2, l3)


def solve(
    X,
    init: Factorization | None,
    cfg: SaaConfig,
    lam: float | None = None,
) -> tuple[Factorization, SolveTrace]:
    """Run sweeps until the objective decrease and the iterate movement both
    fall below their tolerances, or ``cfg.max_iter`` sweeps elapse.

    ``lam`` overrides the configured penalty (used by continuation); the
    default is the last value of the schedule.
    """
    Xm = as_matrix(X, "X")
    if lam is None:
        lam = cfg.final_lambda
    if lam <= 0:
        raise InvalidInputError("solve: lam must be positive")
    fac = default_init(Xm, cfg) if init is None else init.copy()
    try:
        fac.validate(cfg.ell)
    except InvalidInputError as exc:
        raise InvalidInputError(f"solve: infeasible initialization: {exc}") from exc
    if fac.H.shape != (cfg.k, Xm.shape[1]) or fac.W.shape[0] != Xm.shape[0]:
        raise InvalidInputError("solve: initialization shape mismatch")

    smax_x = _spectral_norm_raw(Xm)
    H, W, Wt = fac.H, fac.W, fac.Wt
    trace = SolveTrace()
    fit, reg, total = _objective_raw(Xm, H, W, Wt, lam)
    trace.objectives.append(total)
    trace.fits.append(fit)
    trace.regs.append(reg)

    for _ in range(cfg.max_iter):
        H1, W1, Wt1, (l1, l2, l3) = _sweep_raw(
            Xm, H, W, Wt, lam, cfg.ell, cfg.eps_safeguard, smax_x
        )
        fit, reg, new_total = _objective_raw(Xm, H1, W1, Wt1, lam)
        change = max(
            float(np.linalg.norm(H1 - H)),
            float(np.linalg.norm(W1 - W)),
            float(np.linalg.norm(Wt1 - Wt)),
        )
        trace.iterations += 1
        trace.objectives.append(new_total)
        trace.fits.append(fit)
        trace.regs.append(reg)
        trace.step_sizes.append((0.5 / l1, 0.5 / l2, 0.5 / l3 if l3 > 0 else np.inf))
        decreased_enough = (total - new_total) <= cfg.tol_objective * max(
            total, _OBJ_FLOOR
        )
        H, W, Wt, total = H1, W1, Wt1, new_total
        if decreased_enough and change <= cfg.tol_stationary:
            trace.converged = True
            break

    out = Factorization(H=H, W=W, Wt=Wt)
    report = stationarity_residual(Xm, out, cfg, lam=lam, smax_x=smax_x)
    trace.stationarity_residual = report.residual
    trace.boundary_tie = report.boundary_tie
    return out, trace


def stationarity_residual(
    X,
    fac: Factorization,
    cfg: SaaConfig,
    lam: float | None = None,
    smax_x: float | None = None,
) -> StationarityReport:
    """Apply one full sweep from ``fac`` and measure the largest block change.

    A zero residual means ``fac`` is a fixed point of the sweep map.  Also
    reports whether the clamped H-step target has a magnitude tie at the
    sparsity boundary, in which case the thresholded update is not unique.
    """
    Xm = as_matrix(X, "X")
    if lam is None:
        lam = cfg.final_lambda
    if lam <= 0:
        raise InvalidInputError("stationarity_residual: lam must be positive")
    if smax_x is None:
        smax_x = _spectral_norm_raw(Xm)
    H1, W1, Wt1, (l1, _, _) = _sweep_raw(
        Xm, fac.H, fac.W, fac.Wt, lam, cfg.ell, cfg.eps_safeguard, smax_x
    )
    residual = max(
        float(np.linalg.norm(H1 - fac.H)),
        float(np.linalg.norm(W1 - fac.W)),
        float(np.linalg.norm(Wt1 - fac.Wt)),
    )
    pi = fac.H - (1.0 / l1) * (
        -fac.W.T @ (Xm - fac.W @ fac.H) + lam * (fac.H - fac.Wt @ Xm)
    )
    t_mat = clamp_nonneg(pi)
    tie = False
    if np.count_nonzero(t_mat) > cfg.ell:
        flat = np.sort(t_mat.ravel())[::-1]
        tie = bool(flat[cfg.ell - 1] == flat[cfg.ell])
    return StationarityReport(residual=residual, boundary_tie=tie)
