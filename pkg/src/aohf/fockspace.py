"""Brute-force Fock-space realization of nonorthogonal AO operators.

Orthonormal mode operators b+_p are built explicitly on the 2^M occupation
space (bit p of a basis index set means mode p is occupied; the sign is
(-1)^(number of occupied modes below p)). AO operators are the mixtures
a+_mu = sum_p (S^1/2)_{mu p} b+_p, which gives {a+_mu, a_nu} = S_{nu mu}.

Everything the density-matrix engine derives algebraically (Delta = SDS,
Wick factorization, the metric-free energy expression, the exp(i kappa)
transformation law) is recomputed here from explicit matrices and states.
Operators are stored as real sparse matrices; states and rotated
quantities are complex.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import sparse

from .integrals import AoSystem
from .linalg import inverse_sqrt, sqrt_spd

__all__ = [
    "OracleCapError",
    "ImaginaryResidueError",
    "MAX_MODES",
    "MAX_MODES_TWO_BODY",
    "FockSpaceRep",
    "build_mode_operators",
    "build_ao_operators",
    "vacuum",
    "determinant_state",
    "expectation_delta",
    "expectation_gamma",
    "verify_wick",
    "build_h0",
    "hermiticity_residual",
    "one_body_operator",
    "oracle_energy",
    "apply_kappa_rotation",
    "predicted_delta_transform",
    "verify_transform_consistency",
]

MAX_MODES = 14
MAX_MODES_TWO_BODY = 10
IMAG_TOL = 1e-12
GRAM_TOL = 1e-10


class OracleCapError(ValueError):
    pass


class ImaginaryResidueError(ValueError):
    pass


def dense_bytes(M: int) -> int:
    """Memory of one dense complex 2^M x 2^M matrix."""
    return 16 * 4**M


def format_bytes(n: int) -> str:
    for unit in ("B", "KiB", "MiB", "GiB"):
        if n < 1024 or unit == "GiB":
            return f"{n:.0f} {unit}" if unit == "B" else f"{n:.1f} {unit}"
        n /= 1024
    return f"{n:.1f} GiB"


def _check_cap(M: int, cap: int) -> None:
    if M > cap:
        raise OracleCapError(
            f"{M} modes exceeds the oracle cap of {cap}: dimension 2^{M} = {2**M}, "
            f"one dense complex operator needs {format_bytes(dense_bytes(M))}")


def build_mode_operators(M: int) -> list[sparse.csr_matrix]:
    """Creation operators b+_p for M orthonormal modes, p = 0..M-1.

    Entries are exact integers 0/+-1 stored as float.
    """
    _check_cap(M, MAX_MODES)
    dim = 1 << M
    states = np.arange(dim)
    ops = []
    for p in range(M):
        bit = 1 << p
        src = states[(states & bit) == 0]
        below = src & (bit - 1)
        parity = np.array([bin(int(x)).count("1") & 1 for x in below], dtype=int)
        data = np.where(parity == 1, -1.0, 1.0)
        op = sparse.csr_matrix((data, (src | bit, src)), shape=(dim, dim))
        ops.append(op)
    return ops


@dataclass
class FockSpaceRep:
    """AO creation/annihilation matrices for a metric S on 2^M states."""

    metric: np.ndarray
    create: list = field(repr=False)
    annihilate: list = field(repr=False)

    @property
    def M(self) -> int:
        return self.metric.shape[0]

    @property
    def dim(self) -> int:
        return 1 << self.M

    def anticommutator_residuals(self) -> dict[str, float]:
        """Max deviations of {a+,a+} = 0, {a,a} = 0 and {a+_mu, a_nu} = S_{nu mu} I."""
        I = sparse.identity(self.dim, format="csr")
        worst = {"create_create": 0.0, "annihilate_annihilate": 0.0, "create_annihilate": 0.0}

        def mx(A):
            A = sparse.csr_matrix(A)
            return float(np.max(np.abs(A.data))) if A.nnz else 0.0

        for mu in range(self.M):
            for nu in range(self.M):
                c, a = self.create, self.annihilate
                worst["create_create"] = max(worst["create_create"],
                                             mx(c[mu] @ c[nu] + c[nu] @ c[mu]))
                worst["annihilate_annihilate"] = max(worst["annihilate_annihilate"],
                                                     mx(a[mu] @ a[nu] + a[nu] @ a[mu]))
                worst["create_annihilate"] = max(
                    worst["create_annihilate"],
                    mx(c[mu] @ a[nu] + a[nu] @ c[mu] - self.metric[nu, mu] * I))
        return worst


def build_ao_operators(S) -> FockSpaceRep:
    S = np.asarray(S, dtype=float)
    M = S.shape[0]
    modes = build_mode_operators(M)
    V = sqrt_spd(S)
    create = []
    for mu in range(M):
        op = sparse.csr_matrix(modes[0].shape)
        for p in range(M):
            if V[mu, p] != 0.0:
                op = op + V[mu, p] * modes[p]
        create.append(sparse.csr_matrix(op))
    annihilate = [sparse.csr_matrix(c.T) for c in create]
    return FockSpaceRep(S, create, annihilate)


def vacuum(rep: FockSpaceRep) -> np.ndarray:
    psi = np.zeros(rep.dim, dtype=complex)
    psi[0] = 1.0
    return psi


def determinant_state(rep: FockSpaceRep, C_occ) -> np.ndarray:
    """a+_1 a+_2 ... a+_N |vac> for MO creators a+_i = sum_mu C_{mu i} a+_mu."""
    C = np.asarray(C_occ, dtype=float).reshape(rep.M, -1)
    N = C.shape[1]
    gram = C.T @ rep.metric @ C - np.eye(N)
    dev = float(np.max(np.abs(gram))) if N else 0.0
    if dev > GRAM_TOL:
        raise ValueError(f"occupied orbitals are not S-orthonormal (|C^T S C - I| = {dev:.3e})")
    psi = vacuum(rep)
    for i in reversed(range(N)):
        op = sum(C[mu, i] * rep.create[mu] for mu in range(rep.M))
        psi = op @ psi
    return psi


def _realify(A: np.ndarray, real: bool) -> np.ndarray:
    if not real:
        return A
    imag = float(np.max(np.abs(A.imag))) if A.size else 0.0
    if imag > IMAG_TOL:
        raise ImaginaryResidueError(f"imaginary residue {imag:.3e} in a real expectation value")
    return A.real.copy()


def expectation_delta(rep: FockSpaceRep, state, real: bool = True) -> np.ndarray:
    """Delta_{mu nu} = <state| a+_mu a_nu |state>."""
    psi = np.asarray(state, dtype=complex)
    M = rep.M
    out = np.zeros((M, M), dtype=complex)
    for mu in range(M):
        for nu in range(M):
            out[mu, nu] = np.vdot(psi, rep.create[mu] @ (rep.annihilate[nu] @ psi))
    return _realify(out, real)


def expectation_gamma(rep: FockSpaceRep, state, real: bool = True) -> np.ndarray:
    """Gamma_{mu nu lam sig} = <state| a+_mu a+_lam a_sig a_nu |state>."""
    psi = np.asarray(state, dtype=complex)
    M = rep.M
    a = rep.annihilate
    # right[s, n] = a_s a_n |psi>, left[l, m] = a_l a_m |psi> (so <left| = <psi| a+_m a+_l)
    pairs = np.array([[a[s] @ (a[n] @ psi) for n in range(M)] for s in range(M)])
    # Gamma[m, n, l, s] = <a_l a_m psi | a_s a_n psi>
    out = np.einsum("lmk,snk->mnls", pairs.conj(), pairs)
    return _realify(out, real)


def verify_wick(gamma, delta) -> float:
    """max |Gamma_{mnls} - (Delta_mn Delta_ls - Delta_ms Delta_ln)|."""
    d = np.asarray(delta)
    pred = np.einsum("mn,ls->mnls", d, d) - np.einsum("ms,ln->mnls", d, d)
    diff = np.asarray(gamma) - pred
    return float(np.max(np.abs(diff))) if diff.size else 0.0


def build_h0(rep: FockSpaceRep, system: AoSystem) -> np.ndarray:
    """The electronic Hamiltonian with inverse-metric-dressed integrals, as a dense matrix.

    H0 = sum (S^-1 h S^-1)_{mn} a+_m a_n
       + 1/2 sum W_{mnkt} a+_m a+_k a_t a_n,
    W_{mnkt} = sum (S^-1)_{ma} (S^-1)_{bn} (S^-1)_{kc} (S^-1)_{dt} (ab|cd).
    The constant energy shift is not included.
    """
    M = rep.M
    _check_cap(M, MAX_MODES_TWO_BODY)
    T = inverse_sqrt(rep.metric)
    Sinv = T @ T
    A = Sinv @ system.core_h @ Sinv
    W = np.einsum("ma,bn,kc,dt,abcd->mnkt", Sinv, Sinv, Sinv, Sinv, system.g, optimize=True)
    c, a = rep.create, rep.annihilate
    dim = rep.dim
    H = sparse.csr_matrix((dim, dim))
    for m in range(M):
        for n in range(M):
            if A[m, n] != 0.0:
                H = H + A[m, n] * (c[m] @ a[n])
    pair = [[sparse.csr_matrix(a[t] @ a[n]) for n in range(M)] for t in range(M)]
    for m in range(M):
        for k in range(M):
            inner = sparse.csr_matrix((dim, dim))
            for t in range(M):
                for n in range(M):
                    w = W[m, n, k, t]
                    if w != 0.0:
                        inner = inner + w * pair[t][n]
            if inner.nnz:
                H = H + 0.5 * (c[m] @ (c[k] @ inner))
    return H.toarray().astype(complex)


def hermiticity_residual(H) -> float:
    return float(np.max(np.abs(H - H.conj().T))) if H.size else 0.0


def oracle_energy(rep: FockSpaceRep, system: AoSystem, state, H0=None) -> float:
    """<state|H0|state> + energy shift."""
    psi = np.asarray(state, dtype=complex)
    if H0 is None:
        H0 = build_h0(rep, system)
    val = np.vdot(psi, H0 @ psi)
    if abs(val.imag) > 1e-10:
        raise ImaginaryResidueError(f"energy has imaginary part {val.imag:.3e}")
    return float(val.real) + system.energy_shift


def one_body_operator(rep: FockSpaceRep, kappa) -> np.ndarray:
    """Dense matrix of sum kappa_{mu nu} a+_mu a_nu (kappa may be complex)."""
    kappa = np.asarray(kappa)
    dim = rep.dim
    K = np.zeros((dim, dim), dtype=complex)
    for m in range(rep.M):
        for n in range(rep.M):
            if kappa[m, n] != 0:
                K += kappa[m, n] * (rep.create[m] @ rep.annihilate[n]).toarray()
    return K


def apply_kappa_rotation(rep: FockSpaceRep, state, kappa) -> np.ndarray:
    """exp(i kappa_hat)|state> for Hermitian kappa (real symmetric is the usual case)."""
    kappa = np.asarray(kappa)
    if np.max(np.abs(kappa - kappa.conj().T), initial=0.0) > 1e-12:
        raise ValueError("kappa must be Hermitian")
    K = one_body_operator(rep, kappa)
    K = 0.5 * (K + K.conj().T)
    lam, V = scipy.linalg.eigh(K)
    psi = np.asarray(state, dtype=complex)
    return V @ (np.exp(1j * lam) * (V.conj().T @ psi))


def predicted_delta_transform(Delta, kappa, S) -> np.ndarray:
    """exp(-i S kappa^T) Delta exp(i kappa^T S)."""
    kappa = np.asarray(kappa)
    S = np.asarray(S, dtype=float)
    left = scipy.linalg.expm(-1j * S @ kappa.T)
    right = scipy.linalg.expm(1j * kappa.T @ S)
    return left @ np.asarray(Delta) @ right


@dataclass
class TransformConsistency:
    deviation: float
    d_oracle: np.ndarray = field(repr=False)
    d_engine: np.ndarray = field(repr=False)


def verify_transform_consistency(D, X, S, rep: FockSpaceRep, n_occ: int | None = None):
    """Compare exp(XS) D exp(-SX) with the oracle's exp(i kappa_hat) rotation, kappa = -iX."""
    from .density import occupied_coefficients, transform_density

    D = np.asarray(D, dtype=float)
    X = np.asarray(X, dtype=float)
    S = np.asarray(S, dtype=float)
    if n_occ is None:
        n_occ = int(round(float(np.trace(D @ S))))
    C = occupied_coefficients(D, S, n_occ)
    psi = determinant_state(rep, C)
    rotated = apply_kappa_rotation(rep, psi, -1j * X)
    Delta_t = expectation_delta(rep, rotated, real=True)
    T = inverse_sqrt(S)
    Sinv = T @ T
    d_oracle = Sinv @ Delta_t.T @ Sinv
    d_engine = transform_density(D, X, S)
    dev = float(np.max(np.abs(d_oracle - d_engine))) if D.size else 0.0
    return TransformConsistency(dev, d_oracle, d_engine)
