import math

import numpy as np
import pytest
import scipy.linalg

from aohf.linalg import (LinearDependenceError, NotPositiveDefiniteError, NotSymmetricError,
                         cholesky_spd_check, generalized_eig, inverse_sqrt, matrix_exp, norms,
                         sym_eig)

from conftest import random_spd


def test_cholesky_identity():
    ok, L = cholesky_spd_check(np.eye(3))
    assert ok
    np.testing.assert_array_equal(L, np.eye(3))


def test_cholesky_2x2_closed_form():
    ok, L = cholesky_spd_check([[1, 0.5], [0.5, 1]])
    assert ok
    np.testing.assert_allclose(L, [[1, 0], [0.5, math.sqrt(0.75)]], atol=1e-15)


def test_cholesky_indefinite():
    ok, L = cholesky_spd_check([[1, 2], [2, 1]])
    assert not ok and L is None


def test_cholesky_rejects_asymmetric():
    with pytest.raises(NotSymmetricError, match="1.000e-01"):
        cholesky_spd_check([[1, 0.5], [0.4, 1]])


def test_sym_eig_examples():
    vals, _ = sym_eig(np.diag([2.0, -1.0]))
    np.testing.assert_array_equal(vals, [-1.0, 2.0])
    vals, _ = sym_eig(np.eye(4))
    np.testing.assert_allclose(vals, np.ones(4))
    vals, vecs = sym_eig([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(vals, [-1, 1], atol=1e-15)
    r = 1 / math.sqrt(2)
    np.testing.assert_allclose(vecs, [[r, r], [-r, r]], atol=1e-15)


def test_sym_eig_reconstruction(rng):
    A = rng.standard_normal((12, 12))
    A = A + A.T
    vals, V = sym_eig(A)
    assert np.all(np.diff(vals) >= 0)
    assert np.max(np.abs(A - V @ np.diag(vals) @ V.T)) <= 1e-12 * np.max(np.abs(A)) * 12
    np.testing.assert_allclose(V.T @ V, np.eye(12), atol=1e-13)


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(NotSymmetricError):
        sym_eig([[0, 1], [0, 0]])


def test_generalized_eig_identity_metric():
    vals, C = generalized_eig(np.diag([-1.0, 1.0]), np.eye(2))
    np.testing.assert_allclose(vals, [-1, 1])
    np.testing.assert_allclose(np.abs(C), np.eye(2), atol=1e-15)


def test_generalized_eig_toy_against_lapack(toy_spatial):
    h, S = toy_spatial.core_h, toy_spatial.metric
    vals, C = generalized_eig(h, S)
    ref_vals, ref_vecs = scipy.linalg.eigh(h, S)
    np.testing.assert_allclose(vals, ref_vals, atol=1e-13)
    c0, r0 = C[:, 0], ref_vecs[:, 0]
    np.testing.assert_allclose(c0 * np.sign(c0 @ S @ r0), r0, atol=1e-12)


def test_generalized_eig_proportional(rng):
    S = random_spd(rng, 5)
    vals, C = generalized_eig(2.5 * S, S)
    np.testing.assert_allclose(vals, 2.5, atol=1e-12)
    np.testing.assert_allclose(C.T @ S @ C, np.eye(5), atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_generalized_eig_properties(seed):
    rng = np.random.default_rng(seed)
    S = random_spd(rng, 8, 0.8)
    F = rng.standard_normal((8, 8))
    F = F + F.T
    vals, C = generalized_eig(F, S)
    assert np.max(np.abs(F @ C - S @ C @ np.diag(vals))) < 1e-10
    assert np.max(np.abs(C.T @ S @ C - np.eye(8))) < 1e-10


def test_generalized_eig_names_bad_eigenvalue():
    with pytest.raises(NotPositiveDefiniteError, match=r"-1\.0"):
        generalized_eig(np.eye(2), [[1.0, 2.0], [2.0, 1.0]])


def test_inverse_sqrt_examples():
    np.testing.assert_allclose(inverse_sqrt(np.eye(3)), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(inverse_sqrt(np.diag([4.0, 9.0])), np.diag([0.5, 1 / 3]), atol=1e-15)
    S = np.array([[1, 0.5], [0.5, 1]])
    T = inverse_sqrt(S)
    assert np.max(np.abs(T @ S @ T - np.eye(2))) < 1e-12
    np.testing.assert_array_equal(T, T.T)


@pytest.mark.parametrize("seed", range(20))
def test_inverse_sqrt_property(seed):
    rng = np.random.default_rng(seed)
    S = random_spd(rng, 10, 0.9)
    S = S / np.max(np.abs(S))
    T = inverse_sqrt(S)
    assert np.max(np.abs(T @ S @ T - np.eye(10))) < 1e-12


def test_inverse_sqrt_linear_dependence():
    S = np.array([[1.0, 1 - 1e-12], [1 - 1e-12, 1.0]])
    with pytest.raises(LinearDependenceError):
        inverse_sqrt(S)


def taylor_reference(A, terms=60):
    out = np.eye(len(A))
    term = np.eye(len(A))
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    return out


def test_matrix_exp_zero():
    np.testing.assert_array_equal(matrix_exp(np.zeros((3, 3))), np.eye(3))


def test_matrix_exp_rotation():
    t = math.pi / 2
    R = matrix_exp([[0, t], [-t, 0]])
    np.testing.assert_allclose(R, [[0, 1], [-1, 0]], atol=1e-15)


def test_matrix_exp_against_long_taylor(rng):
    A = rng.standard_normal((4, 4))
    A /= np.linalg.norm(A, 2)
    assert np.max(np.abs(matrix_exp(A) - taylor_reference(A))) < 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_matrix_exp_inverse_rotation_generators(seed):
    # the engine exponentiates A = XS with X antisymmetric and S SPD
    rng = np.random.default_rng(seed)
    S = random_spd(rng, 6, 0.7)
    X = rng.standard_normal((6, 6))
    X = X - X.T
    A = X @ S
    A *= 10 / np.linalg.norm(A)
    assert np.max(np.abs(matrix_exp(A) @ matrix_exp(-A) - np.eye(6))) <= 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_matrix_exp_inverse_general(seed):
    # round-off in exp(A) exp(-A) scales with |exp(A)| |exp(-A)| for non-normal A
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((6, 6))
    A *= 10 / np.linalg.norm(A)
    E, Einv = matrix_exp(A), matrix_exp(-A)
    cond = np.max(np.abs(E)) * np.max(np.abs(Einv))
    assert np.max(np.abs(E @ Einv - np.eye(6))) <= 1e-12 * max(1.0, cond / 10)


def test_matrix_exp_permutation_equivariant(rng):
    A = rng.standard_normal((5, 5))
    P = np.eye(5)[rng.permutation(5)]
    lhs = matrix_exp(P.T @ A @ P)
    rhs = P.T @ matrix_exp(A) @ P
    assert np.max(np.abs(lhs - rhs)) <= 1e-13


def test_matrix_exp_against_scipy_large_norm(rng):
    A = rng.standard_normal((8, 8)) * 3
    np.testing.assert_allclose(matrix_exp(A), scipy.linalg.expm(A), rtol=1e-11, atol=1e-11)


def test_norms():
    assert norms(np.zeros((2, 2))) == (0.0, 0.0)
    assert norms(np.eye(4)) == (2.0, 1.0)
    assert norms([[3, -4], [0, 0]]) == (5.0, 4.0)
