"""The three projections the solvers compose.

Row-wise Euclidean projection onto the unit simplex, global top-ell hard
thresholding, and nonnegative clamping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InvalidInputError, as_matrix


@dataclass(frozen=True)
class SparsityPattern:
    """Coordinates retained by hard thresholding, plus the budget used."""

    kept: tuple[tuple[int, int], ...]
    budget: int


def project_simplex_rows(a) -> np.ndarray:
    """Project each row of ``a`` onto ``{x >= 0, sum(x) = 1}``.

    Sort-and-threshold water filling: with the row sorted in decreasing
    order, the threshold is ``(cumsum(s)_rho - 1) / rho`` at the last index
    ``rho`` where ``s_rho`` stays above it.
    """
    A = as_matrix(a, "A")
    if A.shape[1] == 0:
        raise InvalidInputError("project_simplex_rows: empty rows")
    return _simplex_rows_raw(A)


def _simplex_rows_raw(A: np.ndarray) -> np.ndarray:
    s = np.sort(A, axis=1)[:, ::-1]
    css = np.cumsum(s, axis=1) - 1.0
    counts = np.arange(1, A.shape[1] + 1, dtype=np.float64)
    above = s - css / counts > 0
    # first column is always above: s_1 - (s_1 - 1) = 1 > 0
    rho = A.shape[1] - 1 - np.argmax(above[:, ::-1], axis=1)
    theta = css[np.arange(A.shape[0]), rho] / (rho + 1.0)
    return np.maximum(A - theta[:, None], 0.0)


def project_simplex_vector(v) -> np.ndarray:
    """Project a single vector onto the unit simplex."""
    arr = np.asarray(v, dtype=np.float64)
    return project_simplex_rows(arr[None, :])[0]


def project_sparse(a, ell: int) -> tuple[np.ndarray, SparsityPattern]:
    """Keep the ``ell`` largest-magnitude entries of ``a``, zero the rest.

    The budget is global over all entries, not per row.  Magnitude ties are
    broken by row-major index order (earlier index wins), which keeps the
    projection deterministic.  Returns the thresholded matrix and the
    pattern of retained nonzero coordinates.
    """
    A = as_matrix(a, "A")
    if ell < 0:
        raise InvalidInputError("project_sparse: ell must be nonnegative")
    n = A.shape[1]
    out, keep = _topk_raw(A, ell)
    kept = tuple(sorted((int(i) // n, int(i) % n) for i in keep))
    return out, SparsityPattern(kept=kept, budget=int(ell))


def _topk_raw(A: np.ndarray, ell: int) -> tuple[np.ndarray, np.ndarray]:
    flat = np.abs(A).ravel()
    out = np.zeros_like(A)
    if ell > 0 and flat.size:
        # stable sort keeps equal magnitudes in ascending index order
        order = np.argsort(-flat, kind="stable")[: min(ell, flat.size)]
        keep = order[flat[order] > 0.0]
        out.ravel()[keep] = A.ravel()[keep]
    else:
        keep = np.empty(0, dtype=np.intp)
    return out, keep


def clamp_nonneg(a) -> np.ndarray:
    """Entrywise maximum with zero."""
    return np.maximum(as_matrix(a, "A"), 0.0)
