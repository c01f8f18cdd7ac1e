"""Closed-form and brute-force reference computations.

Nothing here calls :func:`qds_lln.linalg.mat_exp`; the references must stay
independent of the code paths they check.
"""
import math
from dataclasses import dataclass

import numpy as np

from .gkls import Picture, Superoperator
from .linalg import as_hermitian, as_square, herm_eig, spectral_norm

__all__ = [
    "DephasingModel",
    "dephasing_map_analytic",
    "dephasing_variance_analytic",
    "dephasing_mean_factor",
    "taylor_exp",
    "unitary_conjugation_reference",
    "exp_corpus",
]


@dataclass(frozen=True)
class DephasingModel:
    """I.i.d. qubit dephasing rates ``gamma_i`` drawn with ``weights``."""

    rates: tuple
    weights: tuple

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        weights = tuple(float(w) for w in self.weights)
        if len(rates) != len(weights) or not rates:
            raise ValueError("rates and weights must be non-empty and of equal length")
        if any(r < 0 for r in rates) or any(w <= 0 for w in weights):
            raise ValueError("rates must be nonnegative and weights positive")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "weights", weights)

    def moment(self, a):
        """``E[exp(-a gamma)]``."""
        return math.fsum(w * math.exp(-a * g) for g, w in zip(self.rates, self.weights))


def dephasing_map_analytic(gamma, t):
    """``diag(1, e^{-2 gamma t}, e^{-2 gamma t}, 1)`` in the vec basis."""
    if gamma < 0 or t < 0:
        raise ValueError("gamma and t must be nonnegative")
    f = math.exp(-2.0 * gamma * t)
    return Superoperator(np.diag([1.0, f, f, 1.0]).astype(np.complex128), Picture.SCHRODINGER)


def dephasing_mean_factor(model, n, t):
    """``E[F]`` for the coherence factor ``F = prod_i exp(-2 (t/n) gamma_i)``."""
    return model.moment(2.0 * t / n) ** n


def dephasing_variance_analytic(model, n, t):
    """``Var[F] = E[F^2] - E[F]^2`` for the i.i.d. dephasing composition."""
    second = model.moment(4.0 * t / n) ** n
    first = dephasing_mean_factor(model, n, t)
    return max(second - first * first, 0.0)


def taylor_exp(a, terms=40):
    """Truncated Taylor series with Kahan-compensated summation."""
    a = as_square(a)
    if terms < 20:
        raise ValueError("taylor_exp needs at least 20 terms")
    if spectral_norm(a) > 5.0:
        raise ValueError("taylor_exp is only reliable for spectral norm <= 5")
    n = a.shape[0]
    total = np.eye(n, dtype=np.complex128)
    comp = np.zeros_like(total)
    term = np.eye(n, dtype=np.complex128)
    for k in range(1, terms + 1):
        term = term @ a / k
        y = term - comp
        s = total + y
        comp = (s - total) - y
        total = s
    return total


def unitary_conjugation_reference(hamiltonian, t, rho):
    """``e^{-iHt} rho e^{iHt}`` through the eigenphases of ``H``."""
    evals, u = herm_eig(as_hermitian(hamiltonian))
    rho = as_square(rho)
    phases = np.exp(-1j * evals * t)
    # in the eigenbasis, entry (j, k) picks up exp(-i (e_j - e_k) t)
    r = u.conj().T @ rho @ u
    r = phases[:, None] * r * phases.conj()[None, :]
    return u @ r @ u.conj().T


def exp_corpus(seed=2024):
    """Matrices used to cross-check ``mat_exp`` against :func:`taylor_exp`."""
    rng = np.random.default_rng(seed)
    sx = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    corpus = [
        np.zeros((2, 2), dtype=np.complex128),
        np.diag([1.0, -1.0]).astype(np.complex128),
        1j * (np.pi / 2) * sx,
    ]
    for size in (2, 4, 9):
        for _ in range(4):
            a = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
            corpus.append(a * (rng.uniform(0.1, 2.0) / spectral_norm(a)))
    return corpus
