"""Schatten p-norms of small dense matrices.

The Schatten p-norm of a matrix M is the l^p norm of its singular value
vector.  For symmetric matrices the singular values are the absolute
eigenvalues, and the nuclear norm (p = 1) dominates |trace M| with equality
iff the eigenvalues share a weak sign.

Eigen/singular values are computed by cyclic Jacobi iteration with a fixed
sweep order; the implementation is batched so whole stacks of matrices are
rotated at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PExponent",
    "SymMatrix",
    "GeneralMatrix",
    "jacobi_eigenvalues",
    "singular_values",
    "schatten_norm",
    "trace_schatten_gap",
]

_JACOBI_TOL = 1e-14
_MAX_SWEEPS = 60


@dataclass(frozen=True)
class PExponent:
    """Exponent p in [1, inf] with its conjugate. math.inf is the infinity symbol."""

    value: float

    def __post_init__(self):
        if not (self.value >= 1.0):
            raise ValueError(f"p must satisfy p >= 1, got {self.value}")

    @property
    def is_inf(self) -> bool:
        return math.isinf(self.value)

    def conjugate(self) -> "PExponent":
        if self.is_inf:
            return PExponent(1.0)
        if self.value == 1.0:
            return PExponent(math.inf)
        return PExponent(self.value / (self.value - 1.0))


def _as_p(p) -> float:
    if isinstance(p, PExponent):
        return p.value
    p = float(p)
    if not p >= 1.0:
        raise ValueError(f"p must satisfy p >= 1, got {p}")
    return p


@dataclass(frozen=True)
class SymMatrix:
    """Dense symmetric d x d real matrix (d in 2..4 for the main routines)."""

    a: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.a, dtype=float)
        object.__setattr__(self, "a", arr)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("matrix must be square")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix entries must be finite")
        if not np.array_equal(arr, arr.T):
            raise ValueError("matrix must be symmetric as stored")

    @property
    def dim(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class GeneralMatrix:
    """Dense d x d real matrix without symmetry assumption."""

    a: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.a, dtype=float)
        object.__setattr__(self, "a", arr)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("matrix must be square")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix entries must be finite")

    @property
    def dim(self) -> int:
        return self.a.shape[0]


def _coerce(m) -> tuple[np.ndarray, bool]:
    """Return (stack of shape (B, d, d), was_single_matrix)."""
    if isinstance(m, (SymMatrix, GeneralMatrix)):
        return m.a[None, :, :], True
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 2:
        return arr[None, :, :], True
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError("expected a square matrix or a stack of square matrices")
    return arr, False


def jacobi_eigenvalues(mats) -> np.ndarray:
    """Eigenvalues of a stack of symmetric matrices by cyclic Jacobi sweeps.

    Sweep order is (0,1), (0,2), ..., (0,d-1), (1,2), ... per sweep; a matrix
    is converged when its off-diagonal Frobenius mass drops below
    1e-14 * ||M||_F.  Returns eigenvalues sorted descending, shape (B, d)
    (or (d,) when a single matrix was passed).
    """
    arr, single = _coerce(mats)
    a = np.array(arr, dtype=float, copy=True)
    b, d, _ = a.shape
    if not np.allclose(a, np.swapaxes(a, 1, 2), rtol=0.0, atol=0.0):
        raise ValueError("jacobi_eigenvalues expects symmetric matrices")
    norms = np.sqrt(np.sum(a * a, axis=(1, 2)))
    tol = _JACOBI_TOL * np.maximum(norms, np.finfo(float).tiny)
    idx = np.arange(b)
    for _ in range(_MAX_SWEEPS):
        off = np.sqrt(np.maximum(np.sum(a * a, axis=(1, 2)) - np.sum(np.diagonal(a, axis1=1, axis2=2) ** 2, axis=1), 0.0))
        if np.all(off <= tol):
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[:, p, q]
                live = np.abs(apq) > 0.0
                if not np.any(live):
                    continue
                app = a[:, p, p]
                aqq = a[:, q, q]
                # Stable rotation angle: t = sign(theta) / (|theta| + sqrt(theta^2 + 1))
                theta = np.zeros(b)
                t = np.zeros(b)
                with np.errstate(over="ignore", divide="ignore"):
                    theta[live] = (aqq[live] - app[live]) / (2.0 * apq[live])
                    t[live] = np.sign(theta[live]) / (np.abs(theta[live]) + np.sqrt(theta[live] ** 2 + 1.0))
                huge = live & (np.abs(theta) > 1e150)
                t[huge] = 0.5 / theta[huge]
                t[live & (theta == 0.0)] = 1.0
                t[live & ~np.isfinite(theta)] = 0.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                c[~live] = 1.0
                s[~live] = 0.0
                rows_p = a[idx, p, :].copy()
                rows_q = a[idx, q, :].copy()
                a[idx, p, :] = c[:, None] * rows_p - s[:, None] * rows_q
                a[idx, q, :] = s[:, None] * rows_p + c[:, None] * rows_q
                cols_p = a[idx, :, p].copy()
                cols_q = a[idx, :, q].copy()
                a[idx, :, p] = c[:, None] * cols_p - s[:, None] * cols_q
                a[idx, :, q] = s[:, None] * cols_p + c[:, None] * cols_q
                a[idx, p, q] = 0.0
                a[idx, q, p] = 0.0
    eigs = np.sort(np.diagonal(a, axis1=1, axis2=2), axis=1)[:, ::-1]
    return eigs[0] if single else eigs


def singular_values(mats) -> np.ndarray:
    """Singular values (descending) by one-sided cyclic Jacobi.

    Column rotations diagonalize the Gram matrix M^T M implicitly, which
    keeps small singular values at high relative accuracy (no explicit
    squaring).  Same sweep order and convergence criterion as
    jacobi_eigenvalues, read on the implicit Gram entries.
    """
    arr, single = _coerce(mats)
    a = np.array(arr, dtype=float, copy=True)
    b, d, _ = a.shape
    gram_f = np.sum(np.einsum("bij,bik->bjk", a, a) ** 2, axis=(1, 2))
    tol = _JACOBI_TOL * np.sqrt(np.maximum(gram_f, np.finfo(float).tiny))
    for _ in range(_MAX_SWEEPS):
        colsq = np.sum(a * a, axis=1)
        off = np.zeros(b)
        for p in range(d - 1):
            for q in range(p + 1, d):
                off += 2.0 * np.sum(a[:, :, p] * a[:, :, q], axis=1) ** 2
        if np.all(np.sqrt(off) <= tol):
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                gpq = np.sum(a[:, :, p] * a[:, :, q], axis=1)
                app = np.sum(a[:, :, p] ** 2, axis=1)
                aqq = np.sum(a[:, :, q] ** 2, axis=1)
                live = np.abs(gpq) > 1e-30 * np.maximum(app + aqq, np.finfo(float).tiny)
                if not np.any(live):
                    continue
                theta = np.zeros(b)
                t = np.zeros(b)
                with np.errstate(over="ignore", divide="ignore"):
                    theta[live] = (aqq[live] - app[live]) / (2.0 * gpq[live])
                    t[live] = np.sign(theta[live]) / (np.abs(theta[live]) + np.sqrt(theta[live] ** 2 + 1.0))
                huge = live & (np.abs(theta) > 1e150)
                t[huge] = 0.5 / theta[huge]
                t[live & (theta == 0.0)] = 1.0
                t[live & ~np.isfinite(theta)] = 0.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                c[~live] = 1.0
                s[~live] = 0.0
                col_p = a[:, :, p].copy()
                col_q = a[:, :, q].copy()
                a[:, :, p] = c[:, None] * col_p - s[:, None] * col_q
                a[:, :, q] = s[:, None] * col_p + c[:, None] * col_q
    svals = np.sort(np.sqrt(np.sum(a * a, axis=1)), axis=1)[:, ::-1]
    return svals[0] if single else svals


def _lp(vals: np.ndarray, p: float, axis=-1) -> np.ndarray:
    if math.isinf(p):
        return np.max(np.abs(vals), axis=axis)
    if p == 1.0:
        return np.sum(np.abs(vals), axis=axis)
    if p == 2.0:
        return np.sqrt(np.sum(vals * vals, axis=axis))
    return np.sum(np.abs(vals) ** p, axis=axis) ** (1.0 / p)


def schatten_norm(m, p) -> float | np.ndarray:
    """l^p norm of the singular value vector of m (or of a stack of m's).

    For SymMatrix input the eigenvalues are used directly; |M|_2 equals the
    Frobenius norm, |M|_inf the spectral norm.
    """
    pv = _as_p(p)
    if isinstance(m, SymMatrix):
        sv = np.abs(jacobi_eigenvalues(m))
        return float(_lp(sv, pv))
    sv = singular_values(m)
    if sv.ndim == 1:
        return float(_lp(sv, pv))
    return _lp(sv, pv, axis=1)


def trace_schatten_gap(m) -> tuple[float, float, bool, int]:
    """(trace, nuclear norm, equality flag, definite sign) for symmetric m.

    |trace M| <= |M|_S1 with equality iff the eigenvalues share a weak sign;
    the flag reports equality at tolerance 1e-10*(1+|M|_S1) and the sign is
    sign(trace) (0 for the zero matrix at the same tolerance).
    """
    sym = m if isinstance(m, SymMatrix) else SymMatrix(np.asarray(m, dtype=float))
    eigs = jacobi_eigenvalues(sym)
    tr = float(np.sum(eigs))
    s1 = float(np.sum(np.abs(eigs)))
    tol = 1e-10 * (1.0 + s1)
    equal = abs(s1 - abs(tr)) <= tol
    if s1 <= tol:
        sign = 0
    else:
        sign = 1 if tr > 0 else (-1 if tr < 0 else 0)
    return tr, s1, equal, sign
