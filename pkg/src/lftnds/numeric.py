"""Tolerance-controlled dense rank, null-space and full-column-rank tests.

All rank decisions in the package go through :class:`TolerancePolicy`, so a
single object controls how aggressively small singular values are treated as
zero.  Matrices may be real or complex; empty matrices (zero rows or zero
columns) follow the usual conventions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class TolerancePolicy:
    """Threshold rule for numerical rank decisions.

    The threshold for an ``m x n`` matrix whose largest singular value is
    ``sigma_max`` is::

        max(absolute_floor, safety_factor * max(m, n) * sigma_max * eps * relative_eps)
    """

    relative_eps: float = 1.0
    safety_factor: float = 10.0
    absolute_floor: float = 0.0

    def __post_init__(self):
        if not self.relative_eps > 0 or not self.safety_factor > 0:
            raise InvalidInput("relative_eps and safety_factor must be positive")
        if not self.absolute_floor >= 0:
            raise InvalidInput("absolute_floor must be nonnegative")

    def threshold(self, shape: tuple[int, int], sigma_max: float) -> float:
        m, n = shape
        rel = self.safety_factor * max(m, n, 1) * sigma_max * EPS * self.relative_eps
        return max(self.absolute_floor, rel)


DEFAULT_POLICY = TolerancePolicy()


def as_matrix(M) -> np.ndarray:
    A = np.asarray(M)
    if A.ndim == 1:
        A = A.reshape(1, -1) if A.size else A.reshape(0, 0)
    if A.ndim != 2:
        raise InvalidInput(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.issubdtype(A.dtype, np.complexfloating):
        A = A.astype(float, copy=False)
    if A.size and not np.all(np.isfinite(A)):
        raise InvalidInput("matrix has non-finite entries")
    return A


def singular_values(M) -> np.ndarray:
    A = as_matrix(M)
    if A.size == 0:
        return np.zeros(0)
    return np.linalg.svd(A, compute_uv=False)


def _tol(A: np.ndarray, s: np.ndarray, pol: TolerancePolicy, scale: float | None) -> float:
    ref = s[0] if scale is None else max(scale, s[0] if s.size else 0.0)
    return pol.threshold(A.shape, ref)


def rank_with_tolerance(M, pol: TolerancePolicy = DEFAULT_POLICY, scale: float | None = None) -> int:
    """Numerical rank: the number of singular values above the policy threshold.

    ``scale`` replaces the matrix's own largest singular value as the
    reference magnitude; the staircase reductions use it so that sub-blocks
    are judged against the norm of the whole pencil.
    """
    A = as_matrix(M)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0 and pol.absolute_floor == 0.0:
        return 0
    return int(np.sum(s > _tol(A, s, pol, scale)))


def null_space_basis(M, pol: TolerancePolicy = DEFAULT_POLICY, scale: float | None = None) -> np.ndarray:
    """Orthonormal basis of ker(M) with ``n - rank(M)`` columns."""
    A = as_matrix(M)
    m, n = A.shape
    if n == 0:
        return np.zeros((0, 0), dtype=A.dtype)
    if m == 0:
        return np.eye(n, dtype=A.dtype)
    _, s, vh = np.linalg.svd(A, full_matrices=True)
    if s[0] == 0.0 and pol.absolute_floor == 0.0:
        r = 0
    else:
        r = int(np.sum(s > _tol(A, s, pol, scale)))
    return vh[r:].conj().T.copy()


def null_space_of_dim(M, dim: int) -> np.ndarray:
    """The ``dim`` right singular vectors belonging to the smallest singular values."""
    A = as_matrix(M)
    n = A.shape[1]
    if dim <= 0:
        return np.zeros((n, 0), dtype=A.dtype)
    if A.shape[0] == 0:
        return np.eye(n, dtype=A.dtype)[:, :dim]
    _, _, vh = np.linalg.svd(A, full_matrices=True)
    return vh[n - dim:].conj().T.copy()


def is_fcr(M, pol: TolerancePolicy = DEFAULT_POLICY, scale: float | None = None) -> bool:
    A = as_matrix(M)
    if A.shape[1] == 0:
        return True
    return rank_with_tolerance(A, pol, scale) == A.shape[1]


def smallest_singular_pair(M) -> tuple[float, np.ndarray]:
    """Smallest singular value (over columns) and its unit right singular vector."""
    A = as_matrix(M)
    m, n = A.shape
    if n == 0:
        raise InvalidInput("matrix has no columns")
    if m == 0:
        w = np.zeros(n, dtype=A.dtype)
        w[0] = 1.0
        return 0.0, w
    _, s, vh = np.linalg.svd(A, full_matrices=True)
    smin = s[n - 1] if n <= m else 0.0
    return float(smin), vh[n - 1].conj()


def rank_margin(M, pol: TolerancePolicy = DEFAULT_POLICY, scale: float | None = None) -> float:
    """Distance (in decades) from the threshold to the nearest singular value.

    Small values mean the rank decision is fragile; the staircase code warns
    when this drops below one decade.
    """
    A = as_matrix(M)
    if A.size == 0:
        return np.inf
    s = np.linalg.svd(A, compute_uv=False)
    tol = _tol(A, s, pol, scale)
    if tol == 0.0:
        return np.inf
    s = s[s > 0]
    if s.size == 0:
        return np.inf
    return float(np.min(np.abs(np.log10(s / tol))))
