"""Initialization by binary convex optimization over the archetype support.

The large-penalty limit of the sparse-archetype problem asks only for an
ell-sparse nonnegative H close to row-convex combinations of the data:

    min ||H - Wt X||_F^2   s.t.  H >= 0, Wt row-stochastic, ||H||_0 <= ell.

``eval_F`` computes the convex inner value F(Z) for a fixed support pattern
Z (H box-constrained entrywise to [0, sqrt(b) Z]), ``subgradient_F``
produces a valid cut from the inner minimizers, and ``outer_approximation``
alternates evaluation with an exact cut-based master problem.  The master
is a small MILP solved by the built-in branch-and-bound backend; any other
solver can be slotted in through the ``MilpBackend`` interface.
"""

from __future__ import annotations

import math
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from ._fista import minimize as _minimize
from .core import (
    Factorization,
    InvalidInputError,
    SaaConfig,
    as_matrix,
    spectral_norm,
)
from .projections import clamp_nonneg, project_simplex_rows, project_sparse
from .solver import SolveTrace, solve, step_W

_F_ABS_STOP = 1e-22


@dataclass(frozen=True)
class Cut:
    """One linear under-estimator of F: value and subgradient at ``pattern``."""

    pattern: np.ndarray
    value: float
    grad: np.ndarray

    @property
    def offset(self) -> float:
        """Constant term of the cut written as offset + <grad, Z>."""
        return self.value - float(np.sum(self.grad * self.pattern))


@dataclass
class CutSet:
    """Accumulated cuts with the incumbent bounds of the outer loop."""

    k: int
    n: int
    ell: int
    cuts: list[Cut] = field(default_factory=list)
    best_upper: float = math.inf
    best_lower: float = 0.0
    gap_history: list[float] = field(default_factory=list)

    @property
    def gap(self) -> float:
        if not math.isfinite(self.best_upper):
            return math.inf
        if self.best_upper <= _F_ABS_STOP:
            return 0.0
        return (self.best_upper - self.best_lower) / self.best_upper

    def add(self, cut: Cut) -> None:
        self.cuts.append(cut)
        self.best_upper = min(self.best_upper, cut.value)

    def to_json(self) -> dict:
        return {
            "schema": "sparse-aa-cutset-v1",
            "k": self.k,
            "n": self.n,
            "ell": self.ell,
            "best_upper": self.best_upper,
            "best_lower": self.best_lower,
            "gap_history": list(self.gap_history),
            "cuts": [
                {
                    "pattern": c.pattern.astype(int).tolist(),
                    "value": c.value,
                    "grad": c.grad.tolist(),
                }
                for c in self.cuts
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> "CutSet":
        cs = cls(k=d["k"], n=d["n"], ell=d["ell"])
        cs.best_upper = d["best_upper"]
        cs.best_lower = d["best_lower"]
        cs.gap_history = list(d.get("gap_history", []))
        for c in d["cuts"]:
            cs.cuts.append(
                Cut(
                    pattern=np.asarray(c["pattern"], dtype=np.float64),
                    value=float(c["value"]),
                    grad=np.asarray(c["grad"], dtype=np.float64),
                )
            )
        return cs


def norm_bound_b(X, k: int) -> float:
    """Bound on ||H*||_F^2 for the support problem: k (max + sqrt(k) min)^2
    over the data row norms."""
    Xm = as_matrix(X, "X")
    if Xm.shape[0] == 0:
        raise InvalidInputError("norm_bound_b: X must be nonempty")
    if k < 1:
        raise InvalidInputError("norm_bound_b: k must be positive")
    norms = np.linalg.norm(Xm, axis=1)
    return float(k * (norms.max() + math.sqrt(k) * norms.min()) ** 2)


def eval_F(
    Z,
    X,
    b: float,
    ell: int | None = None,
    tol: float = 1e-10,
    max_iter: int = 20_000,
    h0: np.ndarray | None = None,
    wt0: np.ndarray | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and minimizers of the inner convex problem at pattern ``Z``.

    Accelerated projected gradient on the joint block (H, Wt) with a box
    projection for H (entrywise [0, sqrt(b) Z]) and row-simplex projection
    for Wt, joint step ``1 / (2 (1 + smax(X)^2))``.  ``Z`` may be a relaxed
    pattern in [0, 1]; binary patterns are the mainline use.
    """
    Zm = as_matrix(Z, "Z")
    Xm = as_matrix(X, "X")
    k, n = Zm.shape
    m = Xm.shape[0]
    if Xm.shape[1] != n:
        raise InvalidInputError("eval_F: Z and X column counts differ")
    if np.any(Zm < -1e-12) or np.any(Zm > 1.0 + 1e-12):
        raise InvalidInputError("eval_F: pattern entries must lie in [0, 1]")
    if ell is not None and Zm.sum() > ell + 1e-9:
        raise InvalidInputError("eval_F: pattern exceeds the sparsity budget")
    if b < 0:
        raise InvalidInputError("eval_F: b must be nonnegative")

    upper = math.sqrt(b) * np.clip(Zm, 0.0, 1.0)
    smax = spectral_norm(Xm) if Xm.size else 0.0

    Wt = np.full((k, m), 1.0 / m) if wt0 is None else project_simplex_rows(wt0)
    H = Wt @ Xm if h0 is None else np.asarray(h0, dtype=np.float64)
    H = np.clip(H, 0.0, upper)

    # the joint block travels as one k x (n + m) matrix [H | Wt]
    def residual(v: np.ndarray) -> np.ndarray:
        return v[:, :n] - v[:, n:] @ Xm

    def f(v: np.ndarray) -> float:
        r = residual(v)
        return float(np.sum(r * r))

    def grad(v: np.ndarray) -> np.ndarray:
        r = residual(v)
        return np.hstack([2.0 * r, -2.0 * r @ Xm.T])

    def project(v: np.ndarray) -> np.ndarray:
        return np.hstack(
            [np.clip(v[:, :n], 0.0, upper), project_simplex_rows(v[:, n:])]
        )

    v_opt, f_cur, _ = _minimize(
        f,
        grad,
        project,
        np.hstack([H, Wt]),
        step=1.0 / (2.0 * (1.0 + smax * smax)),
        tol=tol,
        max_iter=max_iter,
        abs_stop=_F_ABS_STOP,
    )
    return f_cur, v_opt[:, :n].copy(), v_opt[:, n:].copy()


def subgradient_F(H, Wt, X, b: float) -> np.ndarray:
    """Subgradient of F at the pattern whose inner minimizers are (H, Wt).

    Nonpositive entrywise: relaxing a pattern entry can only lower F.
    """
    Hm = as_matrix(H, "H")
    Wm = as_matrix(Wt, "Wt")
    Xm = as_matrix(X, "X")
    resid = Wm @ Xm - Hm
    lam_mult = np.where(resid > 0.0, 2.0 * resid, 0.0)
    return -math.sqrt(b) * lam_mult


@dataclass(frozen=True)
class MilpSolution:
    Z: np.ndarray
    eta: float
    optimal: bool
    nodes: int


class MilpBackend(ABC):
    """Solver interface for the cut-based master problem

        min_Z max_i (offset_i + <grad_i, Z>)   s.t. Z binary, sum(Z) <= ell.

    ``eta`` must be a valid global lower bound; it equals the optimum when
    ``optimal`` is true.
    """

    @abstractmethod
    def minimize_cuts(self, offsets, grads, shape, ell) -> MilpSolution:
        raise NotImplementedError


class BranchAndBound(MilpBackend):
    """Exact depth-first branch-and-bound over the pattern binaries.

    The node bound is the max over cuts of the cut's own greedy minimum
    (take the most negative free gradients up to the remaining budget),
    which lower-bounds the min-max.  Branches on the free variable with the
    largest absolute summed gradient, exploring the better-bound child
    first.  Zero-impact variables are fixed to zero up front: they never
    change any cut and the tie-break prefers sparser patterns.  With
    ``node_cap`` set, the search may stop early and returns the best global
    lower bound instead of a certificate.
    """

    def __init__(self, node_cap: int | None = None):
        self.node_cap = node_cap

    def minimize_cuts(self, offsets, grads, shape, ell) -> MilpSolution:
        k, n = shape
        offs = np.asarray(offsets, dtype=np.float64)
        G = np.asarray(grads, dtype=np.float64).reshape(len(offs), k * n)
        if len(offs) == 0:
            raise InvalidInputError("minimize_cuts: need at least one cut")
        if np.any(G > 1e-12):
            raise InvalidInputError("minimize_cuts: cut gradients must be <= 0")
        N = k * n
        budget = int(min(ell, N))

        impact = -G.sum(axis=0)
        active = impact > 0.0  # zero-impact variables are fixed to 0

        def leaf_value(ones: np.ndarray) -> float:
            return float(np.max(offs + G[:, ones].sum(axis=1)))

        def node_bound(base: np.ndarray, free_idx: np.ndarray, room: int) -> float:
            # base[i] = offs[i] + sum of G_i over the fixed ones
            if room <= 0 or free_idx.size == 0:
                return float(base.max())
            sub = G[:, free_idx]
            if free_idx.size > room:
                sub = np.partition(sub, room - 1, axis=1)[:, :room]
            return float((base + np.minimum(sub, 0.0).sum(axis=1)).max())

        def greedy_completion(
            fixed1: np.ndarray, free_idx: np.ndarray, room: int, i: int
        ) -> np.ndarray:
            ones = fixed1.copy()
            if room > 0 and free_idx.size:
                vals = G[i, free_idx]
                if free_idx.size > room:
                    pick = np.argpartition(vals, room - 1)[:room]
                else:
                    pick = np.arange(free_idx.size)
                take = free_idx[pick[vals[pick] < 0.0]]
                ones[take] = True
            return ones

        fixed1 = np.zeros(N, dtype=bool)
        free0 = np.flatnonzero(active)
        base0 = offs.copy()
        best_val = math.inf
        best_ones: np.ndarray | None = None

        def consider(ones: np.ndarray) -> None:
            nonlocal best_val, best_ones
            val = leaf_value(ones)
            if val < best_val or (
                val == best_val
                and best_ones is not None
                and _lex_smaller(ones, best_ones)
            ):
                best_val = val
                best_ones = ones.copy()

        for i in range(len(offs)):
            consider(greedy_completion(fixed1, free0, budget, i))
        consider(fixed1)  # the all-zeros pattern is always feasible

        root_bound = node_bound(base0, free0, budget)
        stack: list[tuple[float, np.ndarray, np.ndarray, np.ndarray, int]] = [
            (root_bound, fixed1, free0, base0, budget)
        ]
        nodes = 0
        open_bounds_min = math.inf
        capped = False
        while stack:
            if self.node_cap is not None and nodes >= self.node_cap:
                capped = True
                open_bounds_min = min([open_bounds_min] + [s[0] for s in stack])
                break
            bound, f1, free_idx, base, room = stack.pop()
            nodes += 1
            if bound > best_val:
                continue
            if bound == best_val and not _lex_smaller_prefix(f1, best_ones):
                continue
            if free_idx.size == 0 or room == 0:
                consider(f1)
                continue
            # branch on the free variable with largest absolute summed gradient
            pos = int(np.argmax(impact[free_idx]))
            j = int(free_idx[pos])
            free_c = np.delete(free_idx, pos)
            f1_one = f1.copy()
            f1_one[j] = True
            base_one = base + G[:, j]
            room_one = room - 1
            consider(greedy_completion(f1_one, free_c, room_one, int(np.argmax(base_one))))
            children = [
                (node_bound(base, free_c, room), f1, free_c, base, room, 0),
                (node_bound(base_one, free_c, room_one), f1_one, free_c, base_one, room_one, 1),
            ]
            # pop order is LIFO: push the worse-bound child first (ties: the
            # one-child first so the zero-child is explored first)
            children.sort(key=lambda c: (-c[0], -c[5]))
            for bc, f1c, freec, basec, roomc, _ in children:
                if bc < best_val or (
                    bc == best_val and _lex_smaller_prefix(f1c, best_ones)
                ):
                    stack.append((bc, f1c, freec, basec, roomc))

        assert best_ones is not None
        eta = best_val if not capped else min(best_val, open_bounds_min)
        Z = np.zeros(N, dtype=np.float64)
        Z[best_ones] = 1.0
        return MilpSolution(
            Z=Z.reshape(k, n), eta=float(eta), optimal=not capped, nodes=nodes
        )


def _lex_smaller(a: np.ndarray, b: np.ndarray) -> bool:
    """Row-major lexicographic order on boolean patterns (0 before 1)."""
    diff = a != b
    if not diff.any():
        return False
    first = int(np.argmax(diff))
    return not a[first]


def _lex_smaller_prefix(fixed1: np.ndarray, incumbent: np.ndarray) -> bool:
    """Whether a subtree with these forced ones can still contain a pattern
    lexicographically smaller than the incumbent."""
    return _lex_smaller(fixed1, incumbent)


def milp_min_cuts(
    cuts: CutSet | list[Cut],
    k: int,
    n: int,
    ell: int,
    backend: MilpBackend | None = None,
) -> tuple[np.ndarray, float]:
    """Minimize the piecewise-linear cut model over feasible binary patterns."""
    cut_list = cuts.cuts if isinstance(cuts, CutSet) else list(cuts)
    if not cut_list:
        raise InvalidInputError("milp_min_cuts: cut set is empty")
    if backend is None:
        backend = BranchAndBound()
    offsets = [c.offset for c in cut_list]
    grads = np.stack([c.grad.ravel() for c in cut_list])
    sol = backend.minimize_cuts(offsets, grads, (k, n), ell)
    return sol.Z, sol.eta


@dataclass
class OaResult:
    """Incumbent of the outer-approximation loop."""

    Z: np.ndarray
    H: np.ndarray
    Wt: np.ndarray
    value: float
    cutset: CutSet
    rounds: int
    converged: bool


def outer_approximation(
    X,
    cfg: SaaConfig,
    tol_gap: float = 1e-6,
    tol_gap_abs: float = 1e-9,
    max_rounds: int = 50,
    backend: MilpBackend | None = None,
    time_budget: float | None = None,
    inner_tol: float = 1e-10,
    inner_max_iter: int = 20_000,
) -> OaResult:
    """Alternate F evaluations and master solves until the optimality gap
    closes or a budget runs out.

    The lower bound starts at zero (F is a squared norm) and only improves;
    the returned incumbent is the best pattern evaluated so far together
    with its inner minimizers.
    """
    if tol_gap <= 0:
        raise InvalidInputError("outer_approximation: tol_gap must be positive")
    Xm = as_matrix(X, "X")
    k, ell = cfg.k, cfg.ell
    n = Xm.shape[1]
    m = Xm.shape[0]
    if ell > k * n:
        raise InvalidInputError("outer_approximation: ell exceeds k*n")
    if backend is None:
        # keep small master problems exact; cap the search at scale so one
        # master solve cannot eat the whole budget
        backend = BranchAndBound(node_cap=None if k * n <= 64 else 20_000)
    b = norm_bound_b(Xm, k)

    Wt0 = np.full((k, m), 1.0 / m)
    H0, _ = project_sparse(clamp_nonneg(Wt0 @ Xm), ell)
    Z = (H0 > 0.0).astype(np.float64)

    cutset = CutSet(k=k, n=n, ell=ell)
    best = None  # (value, Z, H, Wt)
    seen: set[bytes] = set()
    warm_h, warm_wt = None, None
    started = time.monotonic()
    rounds = 0
    converged = False
    for rounds in range(1, max_rounds + 1):
        key = Z.astype(np.int8).tobytes()
        if key in seen:
            converged = True
            rounds -= 1
            break
        seen.add(key)
        val, Hs, Wts = eval_F(
            Z, Xm, b, ell, tol=inner_tol, max_iter=inner_max_iter, h0=warm_h, wt0=warm_wt
        )
        grad = subgradient_F(Hs, Wts, Xm, b)
        cutset.add(Cut(pattern=Z.copy(), value=val, grad=grad))
        if best is None or val < best[0]:
            best = (val, Z.copy(), Hs, Wts)
            warm_h, warm_wt = Hs, Wts
        cutset.gap_history.append(cutset.gap)
        if cutset.best_upper - cutset.best_lower <= max(
            tol_gap * max(cutset.best_upper, 0.0), tol_gap_abs
        ):
            converged = True
            break
        if time_budget is not None and time.monotonic() - started > time_budget:
            break
        Z_next, eta = milp_min_cuts(cutset, k, n, ell, backend=backend)
        cutset.best_lower = min(
            max(cutset.best_lower, eta), cutset.best_upper
        )
        cutset.gap_history[-1] = cutset.gap
        if cutset.best_upper - cutset.best_lower <= max(
            tol_gap * max(cutset.best_upper, 0.0), tol_gap_abs
        ):
            converged = True
            break
        Z = Z_next

    assert best is not None
    return OaResult(
        Z=best[1],
        H=best[2],
        Wt=best[3],
        value=best[0],
        cutset=cutset,
        rounds=rounds,
        converged=converged,
    )


def continuation(
    X,
    cfg: SaaConfig,
    oa: OaResult | None = None,
    oa_kwargs: dict | None = None,
) -> tuple[Factorization, list[SolveTrace]]:
    """Warm-started solves along the decreasing penalty schedule, seeded by
    the outer-approximation incumbent.

    The initial W is one projected descent step from uniform rows against
    the incumbent archetypes.
    """
    Xm = as_matrix(X, "X")
    sched = cfg.lambda_schedule
    if any(v <= 0 for v in sched):
        raise InvalidInputError("continuation: schedule values must be positive")
    if oa is None:
        oa = outer_approximation(Xm, cfg, **(oa_kwargs or {}))
    m = Xm.shape[0]
    W = np.full((m, cfg.k), 1.0 / cfg.k)
    fac = Factorization(H=oa.H.copy(), W=W, Wt=oa.Wt.copy())
    fac.W = step_W(Xm, fac, eps=cfg.eps_safeguard)
    traces: list[SolveTrace] = []
    for lam in sched:
        fac, trace = solve(Xm, fac, cfg, lam=lam)
        traces.append(trace)
    return fac, traces
