"""Convex-hull distance machinery.

``hull_distance`` solves the simplex-constrained least-squares problem

    min_alpha  || x - alpha @ X ||_2^2   s.t.  alpha >= 0, sum(alpha) = 1

by accelerated projected gradient with a function-value restart, which is
the workhorse behind the set distances and the robustness metrics.  The
archetype distances compare two sets of rows by nearest-row matching and
are evaluated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._fista import minimize as _accelerated_minimize
from .core import InvalidInputError, as_matrix, as_vector, spectral_norm
from .projections import _simplex_rows_raw


@dataclass(frozen=True)
class HullDistanceResult:
    """Squared distance to a convex hull and the weights realizing it."""

    sq_distance: float
    weights: np.ndarray
    iterations: int


def hull_distance(
    x,
    X,
    tol: float = 1e-10,
    max_iter: int = 5_000,
    smax: float | None = None,
) -> HullDistanceResult:
    """Squared Euclidean distance from ``x`` to the hull of the rows of ``X``.

    ``smax`` may carry a precomputed spectral norm of ``X`` so that row
    sweeps do not repeat the power iteration.  Stops once the relative
    objective decrease falls below ``tol``.
    """
    xv = as_vector(x, "x")
    Xm = as_matrix(X, "X")
    if Xm.shape[0] == 0:
        raise InvalidInputError("hull_distance: X must have at least one row")
    if Xm.shape[1] != xv.shape[0]:
        raise InvalidInputError(
            f"hull_distance: dimension mismatch x({xv.shape[0]}) vs X{Xm.shape}"
        )
    m = Xm.shape[0]
    if smax is None:
        smax = spectral_norm(Xm)
    if smax == 0.0:
        # hull of zero rows is the origin
        alpha = np.full(m, 1.0 / m)
        return HullDistanceResult(float(xv @ xv), alpha, 0)

    def f(al: np.ndarray) -> float:
        r = al @ Xm - xv
        return float(r @ r)

    alpha, f_cur, it = _accelerated_minimize(
        f,
        lambda al: 2.0 * (Xm @ (al @ Xm - xv)),
        _simplex,
        np.full(m, 1.0 / m),
        step=1.0 / (2.0 * smax * smax),
        tol=tol,
        max_iter=max_iter,
    )
    return HullDistanceResult(f_cur, alpha, it)


def _simplex(v: np.ndarray) -> np.ndarray:
    return _simplex_rows_raw(v[None, :])[0]


def hull_distance_rows(X, Y, tol: float = 1e-10, max_iter: int = 5_000) -> np.ndarray:
    """Per-row squared hull distances ``D(X_i, Y)`` as a vector."""
    Xm = as_matrix(X, "X")
    Ym = as_matrix(Y, "Y")
    if Xm.shape[1] != Ym.shape[1]:
        raise InvalidInputError("hull_distance_rows: column counts differ")
    smax = spectral_norm(Ym) if Ym.size else 0.0
    return np.array(
        [hull_distance(row, Ym, tol, max_iter, smax=smax).sq_distance for row in Xm]
    )


def set_hull_distance(X, Y, tol: float = 1e-10, max_iter: int = 5_000) -> float:
    """``D(X, Y)``: sum of squared hull distances of the rows of ``X``."""
    return float(hull_distance_rows(X, Y, tol, max_iter).sum())


def set_hull_distance_l1(X, Y, tol: float = 1e-10, max_iter: int = 5_000) -> float:
    """Sum of (non-squared) row hull distances, the l1 companion of D."""
    rows = hull_distance_rows(X, Y, tol, max_iter)
    return float(np.sqrt(np.maximum(rows, 0.0)).sum())


def _pairwise_sq_distances(H1: np.ndarray, H2: np.ndarray) -> np.ndarray:
    diff = H1[:, None, :] - H2[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def nearest_row_assignment(H1, H2) -> np.ndarray:
    """For each row of ``H1``, the index of the nearest row of ``H2``."""
    A = as_matrix(H1, "H1")
    B = as_matrix(H2, "H2")
    if A.shape[1] != B.shape[1]:
        raise InvalidInputError("nearest_row_assignment: column counts differ")
    if B.shape[0] == 0:
        raise InvalidInputError("nearest_row_assignment: H2 must be nonempty")
    return np.argmin(_pairwise_sq_distances(A, B), axis=1)


def archetype_distance(H1, H2) -> float:
    """Sum over rows of ``H1`` of the squared distance to the nearest row
    of ``H2``.  Asymmetric in its arguments."""
    A = as_matrix(H1, "H1")
    B = as_matrix(H2, "H2")
    if A.shape[1] != B.shape[1]:
        raise InvalidInputError("archetype_distance: column counts differ")
    d = _pairwise_sq_distances(A, B)
    return float(d.min(axis=1).sum())


def archetype_distance_l1(H1, H2) -> float:
    """Nearest-row distance sum without squaring."""
    A = as_matrix(H1, "H1")
    B = as_matrix(H2, "H2")
    if A.shape[1] != B.shape[1]:
        raise InvalidInputError("archetype_distance_l1: column counts differ")
    d = _pairwise_sq_distances(A, B)
    return float(np.sqrt(np.maximum(d.min(axis=1), 0.0)).sum())


def archetype_spread(H0) -> float:
    """Largest pairwise row distance ``b(H0)``."""
    A = as_matrix(H0, "H0")
    if A.shape[0] == 0:
        raise InvalidInputError("archetype_spread: empty matrix")
    d = _pairwise_sq_distances(A, A)
    return float(np.sqrt(max(d.max(), 0.0)))
