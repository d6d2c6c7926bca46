"""Dense real linear-algebra kernels shared by the SCF engine.

All routines take and return ``numpy`` arrays and never mutate their inputs.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "NotSymmetricError",
    "NotPositiveDefiniteError",
    "LinearDependenceError",
    "asymmetry",
    "cholesky_spd_check",
    "sym_eig",
    "generalized_eig",
    "inverse_sqrt",
    "sqrt_spd",
    "matrix_exp",
    "norms",
]

SYMMETRY_TOL = 1e-12
LINEAR_DEPENDENCE_TOL = 1e-10
_EXP_SCALE_TARGET = 0.5
_EXP_TAYLOR_TERMS = 18


class NotSymmetricError(ValueError):
    """Raised when a routine that requires a symmetric matrix receives one that is not."""


class NotPositiveDefiniteError(ValueError):
    pass


class LinearDependenceError(ValueError):
    """The metric is positive definite in name only: its spectrum spans > 1e10."""


def _square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains non-finite entries")
    return A


def asymmetry(A) -> float:
    """Largest |A_ij - A_ji|."""
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(A - A.T)))


def _require_symmetric(A: np.ndarray, what: str = "matrix") -> None:
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    dev = asymmetry(A)
    if dev > SYMMETRY_TOL * scale:
        raise NotSymmetricError(f"{what} is not symmetric (max |A - A^T| = {dev:.3e})")


def cholesky_spd_check(A) -> tuple[bool, np.ndarray | None]:
    """Test positive definiteness through a Cholesky attempt.

    Returns ``(True, L)`` with ``L @ L.T == A`` when ``A`` is positive
    definite and ``(False, None)`` otherwise. A non-symmetric ``A`` raises
    :class:`NotSymmetricError` instead of returning ``False``.
    """
    A = _square(A)
    _require_symmetric(A)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return False, None
    return True, L


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # largest-magnitude component of each column made positive (first on ties)
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def sym_eig(A) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a real symmetric matrix.

    Returns ascending eigenvalues and orthonormal eigenvector columns. Column
    signs are fixed so that the largest-magnitude entry is positive, which
    keeps downstream coefficients reproducible.
    """
    A = _square(A)
    _require_symmetric(A)
    vals, vecs = np.linalg.eigh(0.5 * (A + A.T))
    return vals, _fix_signs(vecs)


def _metric_spectrum(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = sym_eig(S)
    if vals[0] <= 0.0:
        raise NotPositiveDefiniteError(
            f"metric is not positive definite (smallest eigenvalue {vals[0]:.6e})"
        )
    if vals[0] < LINEAR_DEPENDENCE_TOL * vals[-1]:
        raise LinearDependenceError(
            f"metric is nearly linearly dependent (smallest eigenvalue {vals[0]:.6e}, "
            f"largest {vals[-1]:.6e})"
        )
    return vals, vecs


def inverse_sqrt(S) -> np.ndarray:
    """Symmetric inverse square root T of an SPD matrix, so that T S T = I."""
    S = _square(S)
    vals, vecs = _metric_spectrum(S)
    T = (vecs * vals**-0.5) @ vecs.T
    return 0.5 * (T + T.T)


def sqrt_spd(S) -> np.ndarray:
    """Symmetric square root of an SPD matrix."""
    S = _square(S)
    vals, vecs = _metric_spectrum(S)
    R = (vecs * np.sqrt(vals)) @ vecs.T
    return 0.5 * (R + R.T)


def generalized_eig(F, S) -> tuple[np.ndarray, np.ndarray]:
    """Solve F c = lambda S c for symmetric F and SPD S.

    The problem is reduced by the congruence T F T with T = S^{-1/2}, so the
    returned columns satisfy C^T S C = I and the values come out ascending.
    """
    F = _square(F)
    S = _square(S)
    if F.shape != S.shape:
        raise ValueError(f"shape mismatch: F {F.shape} vs S {S.shape}")
    _require_symmetric(F, "F")
    _require_symmetric(S, "S")
    T = inverse_sqrt(S)
    Ft = T @ F @ T
    vals, vecs = sym_eig(0.5 * (Ft + Ft.T))
    return vals, T @ vecs


def matrix_exp(A) -> np.ndarray:
    """exp(A) for a general real square matrix by scaling and squaring.

    A is halved until its 1-norm is at most 0.5, an 18-term Taylor series is
    summed, and the result is squared back.
    """
    A = _square(A)
    n = A.shape[0]
    norm1 = float(np.max(np.sum(np.abs(A), axis=0))) if n else 0.0
    k = 0
    if norm1 > _EXP_SCALE_TARGET:
        k = int(np.ceil(np.log2(norm1 / _EXP_SCALE_TARGET)))
    B = A / 2.0**k
    result = np.eye(n)
    term = np.eye(n)
    for j in range(1, _EXP_TAYLOR_TERMS + 1):
        term = term @ B / j
        result = result + term
    for _ in range(k):
        result = result @ result
    return result


def norms(A) -> tuple[float, float]:
    """(Frobenius norm, max-abs entry)."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0, 0.0
    return float(np.linalg.norm(A)), float(np.max(np.abs(A)))
