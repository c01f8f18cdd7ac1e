"""Probability laws over GKLS generators.

Sampling is a pure function of ``(master_seed, trial_id, sub_id)``. Each
trial (discrete mixtures) or each ``(trial, sub)`` pair (parametric laws)
gets its own ``numpy`` generator seeded from that key, so results do not
depend on evaluation order or on how trials are spread over workers.
"""
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .gkls import Picture, gell_mann_basis, make_kossakowski, make_lindblad
from .linalg import spectral_norm

__all__ = [
    "ConfigurationError",
    "DiscreteMixture",
    "Parametric",
    "MonteCarloMean",
    "trial_rng",
    "sample_generator",
    "mean_generator",
    "mean_generator_estimate",
    "norm_bound",
    "dephasing_generator",
    "dephasing_mixture",
]

MAX_REDRAWS = 10**6
_DISCRETE_STREAM = 0xD15C
_PARAMETRIC_STREAM = 0x9A7A


class ConfigurationError(ValueError):
    """A distribution cannot produce samples as configured."""


def trial_rng(master_seed, *key):
    """Independent generator keyed by ``(master_seed, *key)``."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed) & (2**64 - 1), *map(int, key)]))


@dataclass(frozen=True, eq=False)
class DiscreteMixture:
    """Finite mixture of generators; ``weights`` must sum to one."""

    atoms: tuple
    weights: tuple
    master_seed: int = 0

    def __post_init__(self):
        atoms = tuple(self.atoms)
        weights = tuple(float(w) for w in self.weights)
        if not atoms or len(atoms) != len(weights):
            raise ValueError("need a non-empty list of atoms with one weight each")
        if any(w <= 0 for w in weights):
            raise ValueError("mixture weights must be positive")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {math.fsum(weights)!r}, not 1")
        if len({a.dim for a in atoms}) != 1:
            raise ValueError("all atoms must share one Hilbert-space dimension")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self):
        return self.atoms[0].dim

    @cached_property
    def _cdf(self):
        return np.cumsum(self.weights)

    def atom_indices(self, trial_ids, n):
        """Atom index for sub-draws ``1..n`` of each trial, shape ``(len(trial_ids), n)``.

        Sub-draw ``k`` of a trial is the ``k``-th uniform of that trial's
        stream, so ``atom_indices(ids, n)[:, :m] == atom_indices(ids, m)``.
        """
        out = np.empty((len(trial_ids), n), dtype=np.intp)
        for row, tid in enumerate(trial_ids):
            u = trial_rng(self.master_seed, _DISCRETE_STREAM, tid).random(n)
            out[row] = np.searchsorted(self._cdf, u, side="right")
        np.minimum(out, len(self.atoms) - 1, out=out)
        return out


@dataclass(frozen=True, eq=False)
class Parametric:
    """Wishart Kossakowski matrix plus GUE Hamiltonian, restricted to a norm ball.

    ``k = kossakowski_scale * G G^dag / wishart_dof`` with ``G`` an
    ``(N^2-1) x wishart_dof`` standard complex Gaussian, so ``E[k] =
    kossakowski_scale * I`` before rejection. Draws whose Heisenberg
    superoperator has spectral norm above ``norm_cap`` are redrawn.
    """

    dim: int
    kossakowski_scale: float = 1.0
    hamiltonian_scale: float = 1.0
    wishart_dof: int = 4
    norm_cap: float = 10.0
    master_seed: int = 0
    max_redraws: int = MAX_REDRAWS

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be at least 2")
        if self.kossakowski_scale < 0 or self.hamiltonian_scale < 0:
            raise ValueError("scales must be nonnegative")
        if self.wishart_dof < 1:
            raise ValueError("wishart_dof must be a positive integer")
        if not self.norm_cap > 0:
            raise ValueError("norm_cap must be positive")

    @cached_property
    def basis(self):
        return gell_mann_basis(self.dim)

    def _draw(self, rng):
        d = self.dim * self.dim - 1
        g = (rng.standard_normal((d, self.wishart_dof)) + 1j * rng.standard_normal((d, self.wishart_dof))) / np.sqrt(2)
        k = self.kossakowski_scale * (g @ g.conj().T) / self.wishart_dof
        a = (rng.standard_normal((self.dim, self.dim)) + 1j * rng.standard_normal((self.dim, self.dim))) / np.sqrt(2)
        h = self.hamiltonian_scale * 0.5 * (a + a.conj().T)
        return make_kossakowski(k, h, self.basis)

    def sample(self, trial_id, sub_id=1):
        rng = trial_rng(self.master_seed, _PARAMETRIC_STREAM, trial_id, sub_id)
        for _ in range(self.max_redraws):
            gen = self._draw(rng)
            if spectral_norm(gen.superoperator(Picture.HEISENBERG).matrix) <= self.norm_cap:
                return gen
        raise ConfigurationError(
            f"no sample within norm_cap={self.norm_cap} after {self.max_redraws} redraws; raise the cap"
        )

    def snapshot(self, size, base_trial_id=0):
        """Freeze ``size`` draws into a uniform :class:`DiscreteMixture`."""
        atoms = [self.sample(base_trial_id + j, 0) for j in range(size)]
        return DiscreteMixture(tuple(atoms), (1.0 / size,) * size, self.master_seed)


def sample_generator(dist, trial_id, sub_id=1):
    """Draw the generator for ``(trial_id, sub_id)``.

    ``sub_id`` indexes the factors of a composition and starts at 1.
    """
    if sub_id < 1:
        raise ValueError("sub_id starts at 1")
    if isinstance(dist, DiscreteMixture):
        return dist.atoms[dist.atom_indices([trial_id], sub_id)[0, -1]]
    return dist.sample(trial_id, sub_id)


@dataclass(frozen=True)
class MonteCarloMean:
    value: object
    standard_error: float
    trials: int


def _average_generators(gens, weights):
    forms = [g.kossakowski for g in gens]
    h = sum(w * g.lindblad.hamiltonian for g, w in zip(gens, weights))
    if all(f is not None for f in forms) and all(
        all(np.array_equal(a, b) for a, b in zip(f.basis, forms[0].basis)) for f in forms
    ):
        k = sum(w * f.kossakowski for f, w in zip(forms, weights))
        evals, u = np.linalg.eigh(0.5 * (k + k.conj().T))
        # averaging PSD matrices leaves only rounding-level negative eigenvalues
        k = (u * np.clip(evals, 0.0, None)) @ u.conj().T
        return make_kossakowski(k, h, forms[0].basis)
    jumps = [np.sqrt(w) * op for g, w in zip(gens, weights) for op in g.lindblad.jump_ops]
    return make_lindblad(jumps, h)


def mean_generator(dist, trials=None, base_trial_id=0):
    """Mean generator of ``dist``.

    Discrete mixtures are averaged exactly: Kossakowski matrices and
    Hamiltonians component-wise when all atoms share a basis, otherwise by
    pooling ``sqrt(w_i) L_k`` jump operators with the averaged Hamiltonian
    (which reproduces the weighted sum of superoperators exactly).

    For :class:`Parametric`, ``trials=None`` returns the unconditioned
    Wishart/GUE mean ``(kossakowski_scale * I, 0)``, exact only while
    rejection never triggers; otherwise a Monte Carlo average is used.
    """
    if isinstance(dist, DiscreteMixture):
        if len(dist.atoms) == 1:
            return dist.atoms[0]
        return _average_generators(dist.atoms, dist.weights)
    if trials is None:
        n = dist.dim
        k = dist.kossakowski_scale * np.eye(n * n - 1)
        return make_kossakowski(k, np.zeros((n, n)), dist.basis)
    return mean_generator_estimate(dist, trials, base_trial_id).value


def mean_generator_estimate(dist, trials, base_trial_id=0):
    """Monte Carlo mean generator with the Frobenius standard error of the mean."""
    if trials < 2:
        raise ValueError("need at least two trials")
    # sub-stream 0 is reserved for estimation draws
    gens = [dist.sample(base_trial_id + j, 0) for j in range(trials)]
    mean = _average_generators(gens, [1.0 / trials] * trials)
    ref = mean.superoperator().matrix
    dev = [np.linalg.norm(g.superoperator().matrix - ref) ** 2 for g in gens]
    se = math.sqrt(math.fsum(dev) / (trials - 1) / trials)
    return MonteCarloMean(mean, se, trials)


def norm_bound(dist):
    """Radius of the norm ball holding every generator of ``dist``."""
    if isinstance(dist, DiscreteMixture):
        return max(spectral_norm(a.superoperator(Picture.HEISENBERG).matrix) for a in dist.atoms)
    return float(dist.norm_cap)


def dephasing_generator(gamma):
    """Qubit dephasing with jump operator ``sqrt(gamma) sigma_z``."""
    sz = np.diag([1.0, -1.0])
    return make_lindblad([np.sqrt(gamma) * sz], np.zeros((2, 2)))


def dephasing_mixture(rates, weights, master_seed=0):
    atoms = tuple(dephasing_generator(g) for g in rates)
    return DiscreteMixture(atoms, tuple(weights), master_seed)
