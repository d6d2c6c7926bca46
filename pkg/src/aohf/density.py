"""Single-determinant density-matrix algebra in a nonorthogonal AO basis.

The AO density matrix D satisfies D^T = D, Tr(DS) = N and DSD = D. The
expectation-value matrix <a+_mu a_nu> is Delta = S D S.

Orbital rotations use a real antisymmetric generator X. The transformed
density is exp(XS) D exp(-SX); exp(XS) preserves the metric, so symmetry,
trace and idempotency carry over. To first order the energy changes by
Tr(X (SDF - FDS)).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .linalg import inverse_sqrt, matrix_exp, sqrt_spd, sym_eig

__all__ = [
    "IDEMPOTENCY_TOL",
    "PurificationError",
    "OrbitalRotation",
    "DensityReport",
    "delta_from_d",
    "d_from_delta",
    "build_g",
    "build_fock",
    "energy",
    "gradient",
    "project_rotation",
    "transform_density",
    "purify",
    "idempotency_residual",
    "check_density_conditions",
    "occupied_coefficients",
]

log = logging.getLogger(__name__)

IDEMPOTENCY_TOL = 1e-10
PURIFY_TOL = 1e-12
PURIFY_MAX_ITER = 20


class PurificationError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"purification did not converge in {iterations} iterations "
            f"(residual {residual:.3e})")


def delta_from_d(D, S) -> np.ndarray:
    """Delta = S D S."""
    D = np.asarray(D, dtype=float)
    S = np.asarray(S, dtype=float)
    return S @ D @ S


def d_from_delta(Delta, S) -> np.ndarray:
    """D = S^-1 Delta S^-1, inverted through S^-1/2 for conditioning."""
    T = inverse_sqrt(S)
    Sinv = T @ T
    D = Sinv @ np.asarray(Delta, dtype=float) @ Sinv
    return 0.5 * (D + D.T)


def build_g(D, g) -> np.ndarray:
    """Coulomb-minus-exchange matrix G_mn = sum_ls D_ls [(mn|ls) - (ms|ln)]."""
    g = getattr(g, "dense", g)
    D = np.asarray(D, dtype=float)
    J = np.einsum("mnls,ls->mn", g, D)
    K = np.einsum("msln,ls->mn", g, D)
    return J - K


def build_fock(D, h, g) -> np.ndarray:
    return np.asarray(h, dtype=float) + build_g(D, g)


def energy(D, h, g, e_shift: float = 0.0) -> float:
    """E = Tr(hD) + 1/2 Tr(G(D) D) + e_shift."""
    D = np.asarray(D, dtype=float)
    G = build_g(D, g)
    return float(np.sum(h * D.T) + 0.5 * np.sum(G * D.T) + e_shift)


def gradient(D, F, S) -> np.ndarray:
    """Orbital gradient SDF - FDS.

    Entry (nu, mu) is dE/dX_{mu nu} for independent generator entries. The
    result is antisymmetrized; larger round-off asymmetry is logged.
    """
    S = np.asarray(S, dtype=float)
    SDF = S @ np.asarray(D, dtype=float) @ np.asarray(F, dtype=float)
    grad = SDF - SDF.T
    dev = float(np.max(np.abs(grad + grad.T))) if grad.size else 0.0
    if dev > 1e-12:
        log.debug("gradient asymmetry before antisymmetrization: %.3e", dev)
    return 0.5 * (grad - grad.T)


def idempotency_residual(D, S) -> float:
    D = np.asarray(D, dtype=float)
    if D.size == 0:
        return 0.0
    return float(np.max(np.abs(D @ S @ D - D)))


@dataclass
class OrbitalRotation:
    """A real antisymmetric generator, with any warning raised while producing it."""

    generator: np.ndarray
    warning: str | None = None

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.generator, dtype=dtype)


def project_rotation(X, D, S) -> OrbitalRotation:
    """Remove the occupied-occupied and virtual-virtual parts of X.

    Returns P X Q^T + Q X P^T with P = DS and Q = I - DS.
    """
    X = np.asarray(X, dtype=float)
    S = np.asarray(S, dtype=float)
    D = np.asarray(D, dtype=float)
    P = D @ S
    Q = np.eye(len(S)) - P
    out = P @ X @ Q.T + Q @ X @ P.T
    warning = None
    res = idempotency_residual(D, S)
    if res > IDEMPOTENCY_TOL:
        warning = f"density is not idempotent (|DSD - D| = {res:.3e}); projection is not exact"
    return OrbitalRotation(out, warning)


def transform_density(D, X, S) -> np.ndarray:
    """exp(XS) D exp(-SX) for antisymmetric X."""
    X = np.asarray(X, dtype=float)
    S = np.asarray(S, dtype=float)
    U = matrix_exp(X @ S)
    # exp(-SX) = exp(XS)^T because (XS)^T = -SX
    Dt = U @ np.asarray(D, dtype=float) @ U.T
    return 0.5 * (Dt + Dt.T)


def purify(D, S, tol: float = PURIFY_TOL,
           max_iter: int = PURIFY_MAX_ITER) -> tuple[np.ndarray, int, float]:
    """McWeeny purification D <- 3 DSD - 2 DSDSD in the S metric.

    Returns ``(D, iterations, trace_drift)`` where the drift is the change in
    Tr(DS) caused by purification.
    """
    D = np.asarray(D, dtype=float)
    S = np.asarray(S, dtype=float)
    n0 = float(np.trace(D @ S))
    for it in range(max_iter + 1):
        DS = D @ S
        DSD = DS @ D
        res = float(np.max(np.abs(DSD - D))) if D.size else 0.0
        if res < tol:
            return D, it, float(np.trace(D @ S)) - n0
        if it == max_iter:
            break
        D = 3.0 * DSD - 2.0 * DS @ DSD
        D = 0.5 * (D + D.T)
    raise PurificationError(res, max_iter)


@dataclass
class DensityReport:
    symmetry: float
    trace_error: float
    idempotency: float
    delta_symmetry: float
    delta_trace_error: float
    delta_idempotency: float

    def max_residual(self) -> float:
        return max(self.symmetry, self.trace_error, self.idempotency,
                   self.delta_symmetry, self.delta_trace_error, self.delta_idempotency)

    def passed(self, tol: float = IDEMPOTENCY_TOL) -> bool:
        return self.max_residual() < tol

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def check_density_conditions(D, S, N) -> DensityReport:
    """Residuals of both the D-form and Delta-form single-determinant conditions."""
    D = np.asarray(D, dtype=float)
    S = np.asarray(S, dtype=float)
    T = inverse_sqrt(S)
    Sinv = T @ T
    Delta = delta_from_d(D, S)

    def maxabs(A):
        return float(np.max(np.abs(A))) if A.size else 0.0

    return DensityReport(
        symmetry=maxabs(D - D.T),
        trace_error=abs(float(np.trace(D @ S)) - N),
        idempotency=maxabs(D @ S @ D - D),
        delta_symmetry=maxabs(Delta - Delta.T),
        delta_trace_error=abs(float(np.trace(Delta @ Sinv)) - N),
        delta_idempotency=maxabs(Delta @ Sinv @ Delta - Delta),
    )


def occupied_coefficients(D, S, n_occ: int) -> np.ndarray:
    """Factor an idempotent D as C_occ C_occ^T with C_occ^T S C_occ = I.

    Uses the orthogonal projector S^1/2 D S^1/2, whose top ``n_occ``
    eigenvectors span the occupied space.
    """
    T = inverse_sqrt(S)
    R = sqrt_spd(S)
    proj = R @ np.asarray(D, dtype=float) @ R
    vals, vecs = sym_eig(0.5 * (proj + proj.T))
    if n_occ == 0:
        return np.zeros((len(S), 0))
    U = vecs[:, ::-1][:, :n_occ]
    return T @ U
