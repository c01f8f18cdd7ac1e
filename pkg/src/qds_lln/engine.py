"""Random compositions, mean maps, Chernoff iterates and operator variance.

All superoperators act on column-stacked matrices, and compositions are
ordered ``exp(tau L_n) ... exp(tau L_1)``: the first draw is applied first.
Work over trials is split into fixed-size chunks, so results are
bit-identical for any number of worker threads.
"""
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .distributions import DiscreteMixture, MonteCarloMean, sample_generator
from .gkls import Picture, Superoperator
from .linalg import as_square, mat_exp, spectral_norm, vec

__all__ = [
    "GridSpec",
    "CompositionResult",
    "VarianceEstimate",
    "LagrangeReport",
    "SizeError",
    "semigroup_map",
    "compose_random_iterates",
    "composition_batch",
    "mean_map",
    "mean_map_estimate",
    "chernoff_iterate",
    "expected_composition",
    "variance_estimate",
    "variance_curve",
    "summarise_grams",
    "sup_over_grid",
    "exceedance_probability",
    "exceedance_deviations",
    "lagrange_bounds_check",
]

CHUNK = 128
DEFAULT_MEAN_TRIALS = 1000
MAX_PATHS = 10**6


class SizeError(ValueError):
    """Exact enumeration would visit too many paths."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on ``[0, T]`` including both endpoints."""

    T: float = 1.0
    points: int = 41

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("grid T must be positive")
        if int(self.points) != self.points or self.points < 2:
            raise ValueError("grid needs at least 2 points")

    @property
    def times(self):
        return np.linspace(0.0, self.T, int(self.points))


@dataclass(frozen=True)
class CompositionResult:
    n: int
    t: float
    superop: Superoperator
    trial_id: int


@dataclass(frozen=True, eq=False)
class VarianceEstimate:
    n: int
    t: float
    trials: int
    d_matrix: np.ndarray
    d_norm: float
    standard_error: float


@dataclass(frozen=True)
class LagrangeReport:
    first_order_ok: bool
    second_order_ok: bool
    first_margin: float
    second_margin: float

    @property
    def ok(self):
        return self.first_order_ok and self.second_order_ok


def _check_time(t):
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")


def semigroup_map(gen, t, picture=Picture.SCHRODINGER):
    """``exp(t L)`` in the requested picture."""
    _check_time(t)
    picture = Picture(picture)
    return Superoperator(mat_exp(t * gen.superoperator(picture).matrix), picture)


def _chunks(ids):
    return [ids[i:i + CHUNK] for i in range(0, len(ids), CHUNK)]


def _map_chunks(fn, ids, threads):
    """Apply ``fn`` to fixed-size chunks of ``ids`` and concatenate in order."""
    chunks = _chunks(list(ids))
    if threads is None or threads <= 1 or len(chunks) == 1:
        parts = [fn(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, chunks))
    return np.concatenate(parts, axis=0)


def _compose_chunk(dist, n, times, trial_ids, picture):
    times = np.asarray(times, dtype=float)
    d = dist.dim ** 2
    out = np.broadcast_to(np.eye(d, dtype=np.complex128), (len(times), len(trial_ids), d, d)).copy()
    if isinstance(dist, DiscreteMixture):
        gens = np.array([a.superoperator(picture).matrix for a in dist.atoms])
        steps = scipy.linalg.expm((times / n)[:, None, None, None] * gens[None])
        idx = dist.atom_indices(trial_ids, n)
        for k in range(n):
            out = steps[:, idx[:, k]] @ out
    else:
        gens = np.array([
            [sample_generator(dist, tid, k + 1).superoperator(picture).matrix for k in range(n)]
            for tid in trial_ids
        ])
        for k in range(n):
            steps = scipy.linalg.expm((times / n)[:, None, None, None] * gens[None, :, k])
            out = steps @ out
    # (trials, times, d, d)
    return out.transpose(1, 0, 2, 3)


def composition_batch(dist, n, times, trial_ids, picture=Picture.SCHRODINGER, threads=1):
    """``Psi_n(t)`` matrices for every trial and time, shape ``(trials, times, d, d)``.

    The same draws ``L_1..L_n`` are used along the whole time axis of a trial.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    for t in np.atleast_1d(times):
        _check_time(t)
    picture = Picture(picture)
    return _map_chunks(lambda c: _compose_chunk(dist, n, times, c, picture), trial_ids, threads)


def compose_random_iterates(dist, n, t, trial_id, picture=Picture.SCHRODINGER):
    """One realisation of ``Psi_n(t) = Phi_n(t/n) o ... o Phi_1(t/n)``."""
    m = composition_batch(dist, n, [t], [trial_id], picture)[0, 0]
    return CompositionResult(n, float(t), Superoperator(m, Picture(picture)), trial_id)


def mean_map_estimate(dist, tau, picture=Picture.SCHRODINGER, trials=DEFAULT_MEAN_TRIALS, base_trial_id=0):
    """Monte Carlo ``E[exp(tau L)]`` with the Frobenius standard error of the mean.

    Draws come from sub-stream 0, which compositions never use.
    """
    _check_time(tau)
    picture = Picture(picture)
    if trials < 2:
        raise ValueError("need at least two trials")
    maps = np.array([
        mat_exp(tau * dist.sample(base_trial_id + j, 0).superoperator(picture).matrix)
        for j in range(trials)
    ])
    mean = maps.mean(axis=0)
    dev = np.sum(np.abs(maps - mean) ** 2, axis=(1, 2))
    se = math.sqrt(dev.sum() / (trials - 1) / trials)
    return MonteCarloMean(Superoperator(mean, picture), se, trials)


def mean_map(dist, tau, picture=Picture.SCHRODINGER, trials=DEFAULT_MEAN_TRIALS):
    """Mean dynamics ``E[exp(tau L)]``; exact for discrete mixtures."""
    _check_time(tau)
    picture = Picture(picture)
    if isinstance(dist, DiscreteMixture):
        total = sum(w * mat_exp(tau * a.superoperator(picture).matrix) for a, w in zip(dist.atoms, dist.weights))
        return Superoperator(total, picture)
    return mean_map_estimate(dist, tau, picture, trials).value


def chernoff_iterate(dist, t, n, picture=Picture.SCHRODINGER):
    """``mean_map(dist, t/n) ** n``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    step = mean_map(dist, t / n, picture)
    return Superoperator(np.linalg.matrix_power(step.matrix, n), step.picture)


def expected_composition(dist, n, t, picture=Picture.SCHRODINGER):
    """``E[Psi_n(t)]`` by summing over every one of the ``m**n`` draw sequences."""
    if not isinstance(dist, DiscreteMixture):
        raise TypeError("exact enumeration needs a DiscreteMixture")
    if n < 1:
        raise ValueError("n must be at least 1")
    m = len(dist.atoms)
    if m ** n > MAX_PATHS:
        raise SizeError(f"{m}^{n} paths exceeds the enumeration limit {MAX_PATHS}")
    _check_time(t)
    picture = Picture(picture)
    steps = np.array([mat_exp((t / n) * a.superoperator(picture).matrix) for a in dist.atoms])
    weights = np.asarray(dist.weights)
    d = steps.shape[-1]
    # the trailing `inner` factors are expanded as an array, the rest in Python
    inner = min(n, max(1, int(math.log(4096, m)) if m > 1 else n))
    outer = n - inner
    paths = np.eye(d, dtype=np.complex128)[None]
    pw = np.ones(1)
    for _ in range(inner):
        paths = (steps[:, None] @ paths[None]).reshape(-1, d, d)
        pw = (weights[:, None] * pw[None]).reshape(-1)
    inner_paths = paths * pw[:, None, None]
    total = np.zeros((d, d), dtype=np.complex128)
    for alpha in itertools.product(range(m), repeat=outer):
        head = np.eye(d, dtype=np.complex128)
        w = 1.0
        for a in alpha:
            head = steps[a] @ head
            w *= weights[a]
        # inner factors were drawn first, so they sit to the right
        total += w * (head @ inner_paths).sum(axis=0)
    return Superoperator(total, picture)


def _mean_composition(dist, n, times, picture):
    return np.array([chernoff_iterate(dist, t, n, picture).matrix for t in times])


def variance_curve(dist, n, times, trials, base_trial_id=0, picture=Picture.SCHRODINGER, threads=1):
    """Per-trial deviation Gram matrices ``(Psi - M)^dag (Psi - M)``.

    ``M`` is ``chernoff_iterate``, the exact mean for discrete mixtures.
    Returns an array of shape ``(trials, len(times), d, d)``.
    """
    picture = Picture(picture)
    times = np.asarray(times, dtype=float)
    mean = _mean_composition(dist, n, times, picture)

    def grams(chunk):
        dev = _compose_chunk(dist, n, times, chunk, picture) - mean[None]
        return dev.conj().transpose(0, 1, 3, 2) @ dev

    if n < 1:
        raise ValueError("n must be at least 1")
    return _map_chunks(grams, range(base_trial_id, base_trial_id + trials), threads)


def summarise_grams(gram_stack, n, t):
    trials = gram_stack.shape[0]
    d_matrix = gram_stack.sum(axis=0) / trials
    d_matrix = 0.5 * (d_matrix + d_matrix.conj().T)
    per_trial = np.linalg.eigvalsh(0.5 * (gram_stack + gram_stack.conj().transpose(0, 2, 1)))[:, -1]
    se = float(np.std(per_trial, ddof=1) / math.sqrt(trials))
    return VarianceEstimate(n, float(t), trials, d_matrix, spectral_norm(d_matrix), se)


def variance_estimate(dist, n, t, trials, base_trial_id=0, picture=Picture.SCHRODINGER, threads=1):
    """Monte Carlo estimate of the operator-valued variance ``D_{Psi_n}(t)``.

    ``standard_error`` is the standard error of the per-trial norms
    ``||Psi - M||^2``.
    """
    if trials < 2:
        raise ValueError("need at least two trials")
    g = variance_curve(dist, n, [t], trials, base_trial_id, picture, threads)
    return summarise_grams(g[:, 0], n, t)


def sup_over_grid(f, grid):
    """Largest value of ``f`` on the grid, first maximiser on ties."""
    times = grid.times
    values = np.array([f(t) for t in times], dtype=float)
    i = int(np.argmax(values))
    return float(times[i]), float(values[i])


def exceedance_deviations(dist, x, n, grid, trials, base_trial_id=0, picture=Picture.SCHRODINGER, threads=1):
    """``||Psi_n(t) vec(x) - Phi(t/n)^n vec(x)||_2`` per trial and grid time."""
    picture = Picture(picture)
    times = grid.times
    v = vec(x)
    target = _mean_composition(dist, n, times, picture) @ v

    def devs(chunk):
        out = _compose_chunk(dist, n, times, chunk, picture) @ v
        return np.linalg.norm(out - target[None], axis=-1)

    return _map_chunks(devs, range(base_trial_id, base_trial_id + trials), threads)


def exceedance_probability(dist, x, n, epsilon, grid, trials, base_trial_id=0,
                           picture=Picture.SCHRODINGER, threads=1):
    """Fraction of trials with ``sup_t ||Psi_n(t) x - Phi(t/n)^n x|| > epsilon``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    x = as_square(x)
    if x.shape != (dist.dim, dist.dim):
        raise ValueError(f"observable must be {dist.dim}x{dist.dim}")
    dev = exceedance_deviations(dist, x, n, grid, trials, base_trial_id, picture, threads)
    return float(np.mean(dev.max(axis=1) > epsilon))


def lagrange_bounds_check(gen, t, lam):
    """Check the first- and second-order remainder bounds for ``exp(t L)``.

    ``||e^{tL} - I|| <= t lam e^{lam t}`` and
    ``||e^{tL} - I - tL|| <= (t lam)^2 / 2 e^{lam t}``, each with 1e-8 slack.
    """
    _check_time(t)
    gmat = gen.superoperator(Picture.HEISENBERG).matrix
    norm = spectral_norm(gmat)
    if norm > lam * (1 + 1e-12):
        raise ValueError(f"generator norm {norm:.6g} exceeds the bound {lam:.6g}")
    e = mat_exp(t * gmat)
    eye = np.eye(gmat.shape[0])
    first = t * lam * math.exp(lam * t) - spectral_norm(e - eye)
    second = 0.5 * (t * lam) ** 2 * math.exp(lam * t) - spectral_norm(e - eye - t * gmat)
    return LagrangeReport(first >= -1e-8, second >= -1e-8, first, second)
