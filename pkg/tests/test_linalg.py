import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qds_lln.linalg import (
    DimensionError,
    as_hermitian,
    herm_eig,
    kron,
    mat_exp,
    spectral_norm,
    unvec,
    vec,
)

from conftest import SX, SZ, random_hermitian, random_matrix, random_unitary

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def taylor30(a):
    total = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, 31):
        term = term @ a / k
        total = total + term
    return total


def test_exp_zero_is_identity():
    np.testing.assert_array_equal(mat_exp(np.zeros((2, 2))), np.eye(2))


def test_exp_diagonal():
    np.testing.assert_allclose(mat_exp(np.diag([1.0, -1.0])), np.diag([np.e, 1 / np.e]), rtol=1e-14)


def test_exp_rotation_matches_series_and_closed_form():
    a = 1j * (np.pi / 2) * SX
    e = mat_exp(a)
    assert np.linalg.norm(e - taylor30(a)) <= 1e-12
    np.testing.assert_allclose(e, 1j * SX, atol=1e-14)


def test_exp_rejects_non_square():
    with pytest.raises(DimensionError):
        mat_exp(np.ones((2, 3)))


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        mat_exp(np.array([[np.nan, 0], [0, 1]]))


def test_kron_examples():
    np.testing.assert_array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))
    a, b = 2.0, -3.5
    np.testing.assert_array_equal(kron(np.diag([a, b]), np.eye(2)), np.diag([a, a, b, b]))
    np.testing.assert_array_equal(kron(SZ, SZ), np.diag([1, -1, -1, 1]))
    assert kron(np.ones((2, 3)), np.ones((4, 5))).shape == (8, 15)


def test_vec_is_column_stacking():
    x = np.array([[1, 3], [2, 4]])
    np.testing.assert_array_equal(vec(x), [1, 2, 3, 4])


def test_unvec_rejects_bad_length():
    with pytest.raises(DimensionError):
        unvec(np.arange(5))
    with pytest.raises(DimensionError):
        vec(np.ones((2, 3)))


@given(seeds)
@settings(max_examples=50, deadline=None)
def test_vec_round_trip_and_kron_identity(seed):
    rng = np.random.default_rng(seed)
    a, x, b = (random_matrix(rng, 2) for _ in range(3))
    np.testing.assert_array_equal(unvec(vec(x)), x)
    lhs = vec(a @ x @ b)
    rhs = kron(b.T, a) @ vec(x)
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * max(1.0, np.abs(lhs).max())


def test_herm_eig_examples():
    evals, _ = herm_eig(SZ)
    np.testing.assert_allclose(evals, [-1, 1])
    evals, _ = herm_eig(np.eye(3))
    np.testing.assert_allclose(evals, [1, 1, 1])
    evals, u = herm_eig(SX)
    np.testing.assert_allclose(evals, [-1, 1], atol=1e-15)
    assert np.linalg.norm(u @ np.diag(evals) @ u.conj().T - SX) <= 1e-11
    # eigenvectors (1, -1)/sqrt2 and (1, 1)/sqrt2 up to phase
    assert abs(abs(np.vdot(u[:, 0], [1, -1])) / np.sqrt(2) - 1) < 1e-12
    assert abs(abs(np.vdot(u[:, 1], [1, 1])) / np.sqrt(2) - 1) < 1e-12


def test_hermitian_invariant_enforced():
    with pytest.raises(ValueError, match="not Hermitian"):
        as_hermitian(np.array([[0, 1], [0, 0]]))


@given(seeds, st.integers(min_value=1, max_value=16))
@settings(max_examples=40, deadline=None)
def test_herm_eig_reconstruction(seed, n):
    h = random_hermitian(np.random.default_rng(seed), n)
    evals, u = herm_eig(h)
    assert np.all(np.diff(evals) >= 0)
    assert np.linalg.norm(u @ np.diag(evals) @ u.conj().T - h) <= 1e-11 * max(1.0, np.linalg.norm(h))
    assert np.linalg.norm(u.conj().T @ u - np.eye(n)) <= 1e-11


def test_spectral_norm_examples(rng):
    assert spectral_norm(np.eye(4)) == pytest.approx(1.0, abs=1e-15)
    assert spectral_norm(np.diag([0, -2, -2, 0])) == pytest.approx(2.0, abs=1e-15)
    a = random_matrix(rng, 4)
    s = spectral_norm(a)
    for _ in range(100):
        v = random_matrix(rng, 4)[:, 0]
        assert np.linalg.norm(a @ v) / np.linalg.norm(v) <= s * (1 + 1e-12)


@given(seeds)
@settings(max_examples=50, deadline=None)
def test_spectral_norm_submultiplicative(seed):
    rng = np.random.default_rng(seed)
    a, b = random_matrix(rng, 4), random_matrix(rng, 4)
    assert spectral_norm(a @ b) <= spectral_norm(a) * spectral_norm(b) + 1e-12


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_exp_of_commuting_sum(seed):
    rng = np.random.default_rng(seed)
    a = np.diag(rng.uniform(-2, 2, 4) + 1j * rng.uniform(-2, 2, 4))
    b = np.diag(rng.uniform(-2, 2, 4) + 1j * rng.uniform(-2, 2, 4))
    lhs = mat_exp(a + b)
    assert np.linalg.norm(lhs - mat_exp(a) @ mat_exp(b)) <= 1e-10 * max(1.0, np.linalg.norm(lhs))


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_exp_unitary_similarity(seed):
    rng = np.random.default_rng(seed)
    a = random_matrix(rng, 4, scale=0.5)
    u = random_unitary(rng, 4)
    lhs = mat_exp(u @ a @ u.conj().T)
    rhs = u @ mat_exp(a) @ u.conj().T
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(1.0, np.linalg.norm(lhs))
