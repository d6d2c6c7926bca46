import numpy as np
import pytest

from aohf.density import check_density_conditions, energy
from aohf.integrals import AoSystem, random_system
from aohf.linalg import inverse_sqrt
from aohf.scf import (FrontierDegeneracyError, ScfOptions, core_guess, diis_extrapolate,
                      run_scf, scf_density_descent, scf_roothaan, verify_equivalence)

from conftest import scalar_system

# Converged toy-heh energy. Confirmed independently by the density-descent
# solver, the Fock-space expectation value <0|H0|0> and a restricted
# closed-shell SCF on the spatial integrals (see test_fockspace/test_integrals).
TOY_ENERGY = -1.3650903785766153


def descent(**kw):
    return ScfOptions(solver="density_descent", **kw)


def test_core_guess_scalar():
    np.testing.assert_allclose(core_guess(scalar_system()), [[0.5]], atol=1e-15)


def test_core_guess_empty(toy):
    sys = AoSystem(toy.metric, toy.core_h, toy.two_electron, 0)
    assert not core_guess(sys).any()


def test_core_guess_toy_conditions(toy):
    rep = check_density_conditions(core_guess(toy), toy.metric, toy.n_electrons)
    assert rep.max_residual() < 1e-12


def test_frontier_degeneracy_is_an_error():
    sys = AoSystem(np.eye(2), np.diag([-1.0, -1.0]), np.zeros((2,) * 4), 1)
    with pytest.raises(FrontierDegeneracyError, match="degenerate"):
        core_guess(sys)


def test_options_validate():
    with pytest.raises(ValueError):
        ScfOptions(energy_tolerance=0)
    with pytest.raises(ValueError):
        ScfOptions(diis_depth=-1)
    with pytest.raises(ValueError):
        ScfOptions(solver="newton")


def test_roothaan_scalar():
    sol = scf_roothaan(scalar_system())
    assert sol.converged and sol.iterations == 1
    assert sol.energy == pytest.approx(-1.0, abs=1e-15)


def test_roothaan_toy(toy):
    sol = scf_roothaan(toy)
    assert sol.converged
    assert sol.energy == pytest.approx(TOY_ENERGY, abs=1e-10)
    assert sol.gradient_norm <= 1e-8
    S = toy.metric
    F, D = sol.fock, sol.density
    assert np.max(np.abs(F @ D @ S - S @ D @ F)) <= 1e-8


def test_roothaan_solution_invariants(toy):
    sol = scf_roothaan(toy)
    C, S = sol.coefficients, toy.metric
    assert np.all(np.diff(sol.orbital_energies) >= 0)
    assert np.max(np.abs(C.T @ S @ C - np.eye(4))) < 1e-12
    assert np.max(np.abs(sol.density - sol.occupied @ sol.occupied.T)) < 1e-10


def test_roothaan_unconverged_is_not_an_exception(toy):
    sol = scf_roothaan(toy, ScfOptions(max_iterations=1))
    assert not sol.converged and len(sol.trace) == 1 and "not converged" in sol.message


@pytest.mark.parametrize("seed", range(20))
def test_roothaan_random_property(seed):
    sys = random_system(8, 4, seed)
    seen = []
    sol = scf_roothaan(sys, callback=lambda it, D: seen.append(D))
    assert sol.converged
    assert check_density_conditions(sol.density, sys.metric, 4).idempotency < 1e-10
    assert all(r.idem_residual < 1e-10 for r in sol.trace)
    assert len(seen) == len(sol.trace)


def test_descent_scalar():
    sol = scf_density_descent(scalar_system())
    assert sol.converged and sol.iterations == 0
    assert sol.energy == pytest.approx(-1.0, abs=1e-15)


def test_descent_from_converged_roothaan(toy):
    ref = scf_roothaan(toy, ScfOptions(gradient_tolerance=1e-11, energy_tolerance=1e-13))
    sol = scf_density_descent(toy, guess=ref.density)
    assert sol.converged and sol.iterations == 0


def test_descent_toy_agrees_with_roothaan(toy):
    sol = scf_density_descent(toy)
    assert sol.converged
    assert abs(sol.energy - scf_roothaan(toy).energy) <= 1e-8
    assert sol.energy == pytest.approx(TOY_ENERGY, abs=1e-10)


@pytest.mark.parametrize("seed", range(6))
def test_descent_monotone_and_valid(seed):
    sys = random_system(8, 4, seed)
    reports = []
    sol = scf_density_descent(
        sys, callback=lambda it, D: reports.append(check_density_conditions(D, sys.metric, 4)))
    assert sol.converged
    E = [r.energy for r in sol.trace]
    floor = 64 * np.finfo(float).eps * max(1.0, abs(E[0]))
    assert all(b <= a + floor for a, b in zip(E, E[1:]))
    assert all(r.max_residual() < 1e-9 for r in reports)


@pytest.mark.parametrize("seed", range(20))
def test_solvers_agree_on_random_systems(seed):
    sys = random_system(8, 4, seed)
    a = scf_roothaan(sys)
    b = scf_density_descent(sys)
    assert a.converged and b.converged
    assert abs(a.energy - b.energy) <= 1e-8
    gap = a.orbital_energies[4] - a.orbital_energies[3]
    if gap >= 1e-6:
        assert np.max(np.abs(a.density - b.density)) <= 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_descent_terminal_orbitals_match_density(seed):
    # The terminal diagonalization reproduces D up to the residual gradient
    # over the frontier gap (first-order perturbation bound).
    sys = random_system(8, 4, seed)
    sol = scf_density_descent(sys)
    S = sys.metric
    T = inverse_sqrt(S)
    resid = np.linalg.norm(T @ (sol.fock @ sol.density @ S - S @ sol.density @ sol.fock) @ T, 2)
    gap = sol.orbital_energies[4] - sol.orbital_energies[3]
    assert np.max(np.abs(sol.density - sol.occupied @ sol.occupied.T)) <= resid / gap


def test_descent_stall_is_reported(toy):
    sol = scf_density_descent(toy, descent(max_iterations=3))
    assert not sol.converged and sol.message


def test_diis_single_entry(rng):
    F = rng.standard_normal((3, 3))
    F = F + F.T
    np.testing.assert_array_equal(diis_extrapolate([(F, np.ones((3, 3)))]), F)


def test_diis_identical_entries_fall_back(rng):
    F = rng.standard_normal((3, 3))
    F = F + F.T
    e = rng.standard_normal((3, 3))
    np.testing.assert_allclose(diis_extrapolate([(F, e), (F, e)]), F, atol=1e-15)


def test_diis_exact_extrapolation():
    # errors e1 = +x, e2 = -x -> equal weights cancel the error
    F1, F2 = np.diag([1.0, 3.0]), np.diag([3.0, 5.0])
    x = np.array([[0.0, 1.0], [-1.0, 0.0]])
    np.testing.assert_allclose(diis_extrapolate([(F1, x), (F2, -x)]), np.diag([2.0, 4.0]), atol=1e-14)


def test_diis_speeds_up_without_changing_answer(toy):
    with_diis = scf_roothaan(toy, ScfOptions(diis_depth=8))
    plain = scf_roothaan(toy, ScfOptions(diis_depth=0))
    assert with_diis.converged and plain.converged
    assert abs(with_diis.energy - plain.energy) <= 1e-10
    assert with_diis.iterations < plain.iterations
    assert all(r.step == 0 for r in plain.trace)
    assert max(r.step for r in with_diis.trace) > 1


def test_equivalence_toy(toy):
    rep = verify_equivalence(scf_roothaan(toy), toy)
    assert rep.passed
    assert rep.forward_residual < 1e-8 and rep.backward_residual < 1e-8
    rep = verify_equivalence(scf_density_descent(toy), toy)
    assert rep.passed


def test_equivalence_scalar():
    rep = verify_equivalence(scf_roothaan(scalar_system()), scalar_system())
    assert rep.forward_residual < 1e-15 and rep.backward_residual < 1e-15


def test_equivalence_rejects_unconverged(toy):
    with pytest.raises(ValueError, match="converged"):
        verify_equivalence(scf_roothaan(toy, ScfOptions(max_iterations=1)), toy)


@pytest.mark.parametrize("seed", range(20))
def test_equivalence_random(seed):
    # Both residuals are linear in FDS - SDF but can exceed its max-norm by
    # ~1.7x, so converge one decade below the verifier threshold.
    sys = random_system(8, 4, seed)
    for solver in ("roothaan", "density_descent"):
        sol = run_scf(sys, ScfOptions(solver=solver, gradient_tolerance=1e-9))
        rep = verify_equivalence(sol, sys)
        assert rep.passed
        assert max(rep.forward_residual, rep.backward_residual) <= 2 * sol.gradient_norm + 1e-14


def test_empty_system_energy_is_shift(toy):
    sys = AoSystem(toy.metric, toy.core_h, toy.two_electron, 0, energy_shift=0.75)
    for solver in ("roothaan", "density_descent"):
        sol = run_scf(sys, ScfOptions(solver=solver))
        assert sol.converged and sol.energy == 0.75


@pytest.mark.parametrize("solver", ["roothaan", "density_descent"])
def test_solvers_are_deterministic(solver):
    sys = random_system(6, 3, 5)
    a = run_scf(sys, ScfOptions(solver=solver))
    b = run_scf(sys, ScfOptions(solver=solver))
    assert a.trace == b.trace
    assert a.density.tobytes() == b.density.tobytes()


def test_energy_of_solution_matches_density(toy):
    sol = scf_roothaan(toy)
    assert sol.energy == energy(sol.density, toy.core_h, toy.g, toy.energy_shift)
