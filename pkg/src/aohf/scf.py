"""Self-consistent field drivers.

Two independent routes to a density with FDS - SDF = 0:

* :func:`scf_roothaan` diagonalizes F C = S C eps each cycle and fills the
  lowest N orbitals (optionally with DIIS extrapolation of F);
* :func:`scf_density_descent` never forms orbitals; it rotates D directly
  with exp(XS) D exp(-SX) along the projected orbital gradient.

:func:`verify_equivalence` checks that a converged density and the
Roothaan-Hall eigenproblem describe the same solution.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .density import (
    PURIFY_TOL,
    build_fock,
    energy,
    gradient,
    idempotency_residual,
    occupied_coefficients,
    project_rotation,
    purify,
    transform_density,
)
from .integrals import AoSystem
from .linalg import generalized_eig, inverse_sqrt, sym_eig

__all__ = [
    "FrontierDegeneracyError",
    "ScfOptions",
    "IterationRecord",
    "ScfSolution",
    "EquivalenceReport",
    "aufbau",
    "core_guess",
    "diis_extrapolate",
    "scf_roothaan",
    "scf_density_descent",
    "run_scf",
    "verify_equivalence",
]

DEGENERACY_TOL = 1e-9
DIIS_MAX_CONDITION = 1e12
MIN_STEP = 1e-12


class FrontierDegeneracyError(ValueError):
    """HOMO and LUMO coincide; aufbau occupation is ambiguous."""


@dataclass
class ScfOptions:
    max_iterations: int = 200
    energy_tolerance: float = 1e-10
    gradient_tolerance: float = 1e-8
    diis_depth: int = 8
    initial_step: float = 1.0
    solver: str = "roothaan"

    def __post_init__(self):
        if self.energy_tolerance <= 0 or self.gradient_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.diis_depth < 0:
            raise ValueError("diis_depth must be >= 0")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be positive")
        if self.solver not in ("roothaan", "density_descent"):
            raise ValueError(f"unknown solver {self.solver!r}")


@dataclass
class IterationRecord:
    iteration: int
    energy: float
    grad_max: float
    step: float  # DIIS subspace size (roothaan) or accepted step length (descent)
    idem_residual: float


@dataclass
class ScfSolution:
    density: np.ndarray
    fock: np.ndarray
    energy: float
    orbital_energies: np.ndarray
    coefficients: np.ndarray
    occupied_count: int
    trace: list[IterationRecord]
    converged: bool
    solver: str
    message: str = ""

    @property
    def gradient_norm(self) -> float:
        return self.trace[-1].grad_max if self.trace else float("nan")

    @property
    def iterations(self) -> int:
        return self.trace[-1].iteration if self.trace else 0

    @property
    def occupied(self) -> np.ndarray:
        return self.coefficients[:, : self.occupied_count]


def aufbau(F, S, n_occ: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Diagonalize (F, S) and occupy the lowest ``n_occ`` orbitals.

    Returns ``(D, eps, C)``.
    """
    eps, C = generalized_eig(F, S)
    M = len(eps)
    if 0 < n_occ < M:
        gap = eps[n_occ] - eps[n_occ - 1]
        if gap <= DEGENERACY_TOL:
            raise FrontierDegeneracyError(
                f"frontier orbitals {n_occ} and {n_occ + 1} are degenerate "
                f"(eps = {eps[n_occ - 1]:.12g}, {eps[n_occ]:.12g}); "
                "choose the occupation explicitly")
    Cocc = C[:, :n_occ]
    D = Cocc @ Cocc.T
    return 0.5 * (D + D.T), eps, C


def core_guess(system: AoSystem) -> np.ndarray:
    D, _, _ = aufbau(system.core_h, system.metric, system.n_electrons)
    return D


def diis_extrapolate(history) -> np.ndarray:
    """Pulay extrapolation from a sequence of ``(F, error)`` pairs.

    Minimizes |sum c_i e_i| subject to sum c_i = 1. Falls back to the most
    recent F when the error overlap matrix is ill-conditioned.
    """
    history = list(history)
    if not history:
        raise ValueError("DIIS history is empty")
    F_last = np.asarray(history[-1][0], dtype=float)
    n = len(history)
    if n == 1:
        return F_last
    errs = [np.asarray(e, dtype=float) for _, e in history]
    B = np.array([[np.sum(ei * ej) for ej in errs] for ei in errs])
    scale = float(np.max(np.abs(np.diag(B))))
    if scale == 0.0:
        return F_last
    B = B / scale
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = B
    A[:n, n] = A[n, :n] = -1.0
    rhs = np.zeros(n + 1)
    rhs[n] = -1.0
    if not np.isfinite(np.linalg.cond(A)) or np.linalg.cond(A) > DIIS_MAX_CONDITION:
        return F_last
    c = np.linalg.solve(A, rhs)[:n]
    F = sum(ci * np.asarray(Fi, dtype=float) for ci, (Fi, _) in zip(c, history))
    return 0.5 * (F + F.T)


def _maxabs(A) -> float:
    return float(np.max(np.abs(A))) if np.size(A) else 0.0


def scf_roothaan(system: AoSystem, options: ScfOptions | None = None,
                 guess: np.ndarray | None = None, callback=None) -> ScfSolution:
    """Roothaan-Hall SCF with optional DIIS.

    Iteration k builds F(D_{k-1}), optionally extrapolates it, and occupies
    the lowest N generalized eigenvectors to give D_k. Convergence requires
    both |E_k - E_{k-1}| and max|F D_k S - S D_k F| below tolerance.

    ``callback(iteration, D)`` is invoked on every new density.
    """
    opts = options or ScfOptions()
    S, h, g = system.metric, system.core_h, system.two_electron
    N = system.n_electrons
    T = inverse_sqrt(S)

    D = core_guess(system) if guess is None else np.asarray(guess, dtype=float)
    E_prev = energy(D, h, g, system.energy_shift)
    F = build_fock(D, h, g)
    history: deque = deque(maxlen=max(opts.diis_depth, 1))
    trace: list[IterationRecord] = []
    converged = False
    eps, C = generalized_eig(F, S)

    for it in range(1, opts.max_iterations + 1):
        F_use = F
        n_diis = 0
        if opts.diis_depth > 0:
            err = T @ gradient(D, F, S).T @ T  # S^-1/2 (FDS - SDF) S^-1/2
            history.append((F, err))
            F_use = diis_extrapolate(history)
            n_diis = len(history)
        D, eps, C = aufbau(F_use, S, N)
        E = energy(D, h, g, system.energy_shift)
        F = build_fock(D, h, g)
        gmax = _maxabs(gradient(D, F, S))
        trace.append(IterationRecord(it, E, gmax, float(n_diis), idempotency_residual(D, S)))
        if callback is not None:
            callback(it, D)
        if abs(E - E_prev) <= opts.energy_tolerance and gmax <= opts.gradient_tolerance:
            converged = True
            break
        E_prev = E

    return ScfSolution(
        density=D, fock=F, energy=energy(D, h, g, system.energy_shift),
        orbital_energies=eps, coefficients=C, occupied_count=N, trace=trace,
        converged=converged, solver="roothaan",
        message="" if converged else f"not converged in {opts.max_iterations} iterations",
    )


def scf_density_descent(system: AoSystem, options: ScfOptions | None = None,
                        guess: np.ndarray | None = None, callback=None) -> ScfSolution:
    """Direct minimization over idempotent densities.

    Each step moves along X = alpha * P(SDF - FDS), the projected direction of
    steepest decrease of E(exp(XS) D exp(-SX)). The step length is halved
    until the exact energy does not rise (to within round-off) and doubled
    after every accepted step.
    """
    opts = options or ScfOptions(solver="density_descent")
    S, h, g = system.metric, system.core_h, system.two_electron
    N = system.n_electrons
    shift = system.energy_shift

    D = core_guess(system) if guess is None else np.asarray(guess, dtype=float)
    if idempotency_residual(D, S) > PURIFY_TOL:
        D, _, _ = purify(D, S)
    E = energy(D, h, g, shift)
    F = build_fock(D, h, g)
    G = gradient(D, F, S)
    gmax = _maxabs(G)
    trace = [IterationRecord(0, E, gmax, 0.0, idempotency_residual(D, S))]
    if callback is not None:
        callback(0, D)
    converged = gmax <= opts.gradient_tolerance
    message = ""
    alpha = opts.initial_step

    prev_step = prev_grad = None
    it = 0
    while not converged and it < opts.max_iterations:
        it += 1
        direction = project_rotation(G, D, S).generator
        slope = float(np.sum(direction * G.T))  # Tr(direction @ G)
        if not slope < 0.0:
            direction, slope = G, -float(np.sum(G * G))
        if prev_step is not None:
            # Barzilai-Borwein length from the last step and gradient change
            sy = float(np.sum(prev_step * (prev_grad - G)))
            if sy > 0.0:
                alpha = float(np.sum(prev_step * prev_step)) / sy
        floor = 64 * np.finfo(float).eps * max(1.0, abs(E))
        while True:
            D_try = transform_density(D, alpha * direction, S)
            if idempotency_residual(D_try, S) > PURIFY_TOL:
                D_try, _, _ = purify(D_try, S)
            E_try = energy(D_try, h, g, shift)
            if E_try <= E + floor:
                break
            alpha *= 0.5
            if alpha < MIN_STEP:
                break
        if alpha < MIN_STEP:
            message = (f"line search stalled at iteration {it}: no energy decrease "
                       f"down to step {MIN_STEP:g}")
            break
        dE = E_try - E
        prev_step, prev_grad = alpha * direction, G
        D, E = D_try, E_try
        F = build_fock(D, h, g)
        G = gradient(D, F, S)
        gmax = _maxabs(G)
        trace.append(IterationRecord(it, E, gmax, alpha, idempotency_residual(D, S)))
        if callback is not None:
            callback(it, D)
        if abs(dE) <= opts.energy_tolerance and gmax <= opts.gradient_tolerance:
            converged = True
        alpha *= 2.0

    if not converged and not message:
        message = f"not converged in {opts.max_iterations} iterations"
    eps, C = generalized_eig(F, S)
    return ScfSolution(
        density=D, fock=F, energy=E, orbital_energies=eps, coefficients=C,
        occupied_count=N, trace=trace, converged=converged,
        solver="density_descent", message=message,
    )


def run_scf(system: AoSystem, options: ScfOptions | None = None, guess=None,
            callback=None) -> ScfSolution:
    opts = options or ScfOptions()
    if opts.solver == "roothaan":
        return scf_roothaan(system, opts, guess, callback)
    return scf_density_descent(system, opts, guess, callback)


@dataclass
class EquivalenceReport:
    """Residuals of both directions of the density/eigenproblem equivalence."""

    forward_residual: float  # max|F C_occ - S C_occ eps| with C_occ factored from D
    backward_residual: float  # max|F D' S - S D' F| with D' from the eigenvectors
    offdiagonal_after_diagonalization: float
    occupied_energies: list[float] = field(default_factory=list)
    tolerance: float = 1e-8

    @property
    def passed(self) -> bool:
        return (self.forward_residual < self.tolerance
                and self.backward_residual < self.tolerance
                and self.offdiagonal_after_diagonalization < self.tolerance)

    def as_dict(self) -> dict:
        return {
            "forward_residual": self.forward_residual,
            "backward_residual": self.backward_residual,
            "offdiagonal_after_diagonalization": self.offdiagonal_after_diagonalization,
            "occupied_energies": list(self.occupied_energies),
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def verify_equivalence(solution: ScfSolution, system: AoSystem,
                       tol: float = 1e-8) -> EquivalenceReport:
    if not solution.converged:
        raise ValueError("verify_equivalence needs a converged solution")
    S = system.metric
    F = solution.fock
    N = solution.occupied_count

    # stationary D -> Roothaan-Hall on the occupied block
    Cocc = occupied_coefficients(solution.density, S, N)
    eps_occ = Cocc.T @ F @ Cocc
    eps_occ = 0.5 * (eps_occ + eps_occ.T)
    forward = _maxabs(F @ Cocc - S @ Cocc @ eps_occ)
    if N:
        w, V = sym_eig(eps_occ)
        rotated = V.T @ eps_occ @ V
        offdiag = _maxabs(rotated - np.diag(np.diag(rotated)))
    else:
        w, offdiag = np.zeros(0), 0.0

    # eigenproblem solution -> stationarity of its density
    C2 = solution.coefficients[:, :N]
    D2 = C2 @ C2.T
    backward = _maxabs(F @ D2 @ S - S @ D2 @ F)
    return EquivalenceReport(forward, backward, offdiag, [float(x) for x in w], tol)
