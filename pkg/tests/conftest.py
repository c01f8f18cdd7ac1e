import numpy as np
import pytest

from qds_lln import dephasing_mixture, make_lindblad, DiscreteMixture, dephasing_generator

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)


def random_matrix(rng, n, scale=1.0):
    return scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))


def random_hermitian(rng, n):
    a = random_matrix(rng, n)
    return 0.5 * (a + a.conj().T)


def random_density(rng, n):
    g = random_matrix(rng, n)
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_unitary(rng, n):
    q, r = np.linalg.qr(random_matrix(rng, n))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def reference_mixture():
    """Dephasing rates {1, 3} with equal weights."""
    return dephasing_mixture([1.0, 3.0], [0.5, 0.5], master_seed=2024)


@pytest.fixture
def noncommuting_mixture():
    """Dephasing (gamma = 1) and the unitary H = sigma_x, equal weights."""
    atoms = (dephasing_generator(1.0), make_lindblad([], SX))
    return DiscreteMixture(atoms, (0.5, 0.5), master_seed=7)
