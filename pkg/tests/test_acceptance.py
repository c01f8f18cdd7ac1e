"""Exit criteria, one test each, at the stated tolerances and time budgets.

Each test prints a ``[PASS]``/``[FAIL]`` line to the terminal.
"""
import json
import time

import numpy as np
import pytest

from qds_lln.cli import EXIT_OK, cli_main
from qds_lln.distributions import Parametric, dephasing_generator, mean_generator
from qds_lln.engine import (
    GridSpec,
    chernoff_iterate,
    exceedance_probability,
    expected_composition,
    lagrange_bounds_check,
    semigroup_map,
    summarise_grams,
    variance_curve,
    variance_estimate,
)
from qds_lln.gkls import check_cptp, gell_mann_basis, kossakowski_superoperator, make_kossakowski
from qds_lln.harness import fit_slope
from qds_lln.linalg import mat_exp, spectral_norm
from qds_lln.oracles import (
    DephasingModel,
    dephasing_map_analytic,
    dephasing_variance_analytic,
    exp_corpus,
    taylor_exp,
)

from conftest import SX, random_hermitian, random_matrix

REFERENCE = DephasingModel((1.0, 3.0), (0.5, 0.5))
POWERS = [2 ** k for k in range(1, 9)]


@pytest.fixture
def emit(capsys):
    def _emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return _emit


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_c1_mean_identity(noncommuting_mixture, emit):
    with Timer() as tm:
        worst = max(
            np.linalg.norm(expected_composition(noncommuting_mixture, n, t).matrix
                           - chernoff_iterate(noncommuting_mixture, t, n).matrix)
            for n in range(1, 7) for t in (0.5, 1.0)
        )
    ok = worst <= 1e-10 and tm.elapsed < 5
    emit("C1 mean identity", ok, f"max Frobenius gap {worst:.2e} (<= 1e-10), {tm.elapsed:.2f}s (< 5s)")
    assert ok


def test_c2_variance_decay(reference_mixture, emit):
    ns = [8, 16, 32, 64, 128, 256]
    times = GridSpec(1.0, 21).times
    with Timer() as tm:
        sups = []
        for n in ns:
            grams = variance_curve(reference_mixture, n, times, 2000, threads=1)
            sups.append(max(summarise_grams(grams[:, j], n, t).d_norm for j, t in enumerate(times)))
    slope = fit_slope(ns, sups)
    ratio = (ns[-1] * sups[-1]) / (ns[0] * sups[0])
    ok = -1.25 <= slope <= -0.80 and ratio <= 1.5 and tm.elapsed < 120
    emit("C2 variance O(1/n)", ok,
         f"slope {slope:.3f} in [-1.25, -0.80], n*sup ratio 256/8 = {ratio:.3f} (<= 1.5), {tm.elapsed:.1f}s (< 120s)")
    assert ok


def test_c3_analytic_variance(reference_mixture, emit):
    with Timer() as tm:
        est = variance_estimate(reference_mixture, 4, 1.0, trials=2000)
    analytic = dephasing_variance_analytic(REFERENCE, 4, 1.0)
    coherence = est.d_matrix[1, 1].real
    gap = abs(coherence - analytic)
    ok = gap <= 3 * est.standard_error and tm.elapsed < 10
    emit("C3 analytic variance", ok,
         f"MC {coherence:.5f} vs analytic {analytic:.5f}, gap {gap / est.standard_error:.2f} SE (<= 3), "
         f"{tm.elapsed:.2f}s (< 10s)")
    assert ok


def _chernoff_errors(dist, t=1.0):
    target = semigroup_map(mean_generator(dist), t).matrix
    return [spectral_norm(chernoff_iterate(dist, t, n).matrix - target) for n in POWERS]


def test_c4_chernoff_convergence(reference_mixture, emit):
    snapshot = Parametric(2, 0.5, 0.5, wishart_dof=4, norm_cap=10.0, master_seed=17).snapshot(8)
    with Timer() as tm:
        ref_err = _chernoff_errors(reference_mixture)
        par_err = _chernoff_errors(snapshot)
    ref_slope, par_slope = fit_slope(POWERS, ref_err), fit_slope(POWERS, par_err)
    monotone = all(b <= a + 1e-12 for a, b in zip(ref_err, ref_err[1:]))
    ok = (-1.3 <= ref_slope <= -0.7 and -1.3 <= par_slope <= -0.7 and monotone and tm.elapsed < 30)
    emit("C4 Chernoff convergence", ok,
         f"slopes reference {ref_slope:.3f}, parametric snapshot {par_slope:.3f} (in [-1.3, -0.7]), "
         f"reference monotone {monotone}, {tm.elapsed:.2f}s (< 30s)")
    assert ok


def test_c5_lln_exceedance(reference_mixture, emit):
    ns, trials = [16, 64, 256], 1000
    with Timer() as tm:
        fracs = [exceedance_probability(reference_mixture, SX, n, 0.05, GridSpec(1.0, 41), trials) for n in ns]
    se = [np.sqrt(p * (1 - p) / trials) for p in fracs]
    nonincreasing = all(fracs[i + 1] <= fracs[i] + 2 * np.hypot(se[i], se[i + 1]) for i in range(2))
    ok = nonincreasing and fracs[-1] < fracs[0] and tm.elapsed < 120
    emit("C5 LLN exceedance", ok,
         f"fractions {dict(zip(ns, fracs))}, non-increasing within 2 SE {nonincreasing}, {tm.elapsed:.1f}s (< 120s)")
    assert ok


def test_c6_cptp_audit(emit):
    worst_eig, worst_res, violations = np.inf, 0.0, 0
    with Timer() as tm:
        for i in range(100):
            n = 2 + i % 2
            gen = Parametric(n, 0.5, 0.5, norm_cap=10.0, master_seed=606).sample(i)
            for t in (0.1, 1.0):
                rep = check_cptp(semigroup_map(gen, t), tol=1e-9)
                worst_eig = min(worst_eig, rep.min_choi_eig)
                worst_res = max(worst_res, rep.constraint_residual)
                violations += rep.min_choi_eig < -1e-8 or rep.constraint_residual > 1e-9
    ok = violations == 0 and tm.elapsed < 30
    emit("C6 CPTP audit", ok,
         f"{violations} violations, min Choi eig {worst_eig:.2e} (>= -1e-8), max TP residual {worst_res:.2e} "
         f"(<= 1e-9), {tm.elapsed:.2f}s (< 30s)")
    assert ok


def test_c7_lagrange_bounds(emit):
    dist = Parametric(3, 0.5, 0.5, norm_cap=6.0, master_seed=707)
    lam = 6.0
    with Timer() as tm:
        margins = [
            min(r.first_margin, r.second_margin)
            for r in (lagrange_bounds_check(dist.sample(i), t, lam) for i in range(100) for t in (0.1, 0.5, 1.0))
        ]
    ok = min(margins) >= 0 and tm.elapsed < 10
    emit("C7 Lagrange bounds", ok, f"min margin {min(margins):.3e} (>= 0) over 300 checks, {tm.elapsed:.2f}s (< 10s)")
    assert ok


def test_c8_exactness_ladder(emit):
    rng = np.random.default_rng(808)
    with Timer() as tm:
        exp_err = max(
            np.linalg.norm(mat_exp(a) - taylor_exp(a, 40)) / max(1.0, np.linalg.norm(taylor_exp(a, 40)))
            for a in exp_corpus()
        )
        form_err = 0.0
        for i in range(50):
            n = 2 + i % 2
            g = random_matrix(rng, n * n - 1)[:, : 1 + i % (n * n - 1)]
            k = g @ g.conj().T
            h = random_hermitian(rng, n)
            gen = make_kossakowski(k, h)
            direct = kossakowski_superoperator(gen.kossakowski.kossakowski, h, gell_mann_basis(n))
            form_err = max(form_err, np.linalg.norm(gen.superoperator().matrix - direct))
        closed_err = max(
            np.max(np.abs(semigroup_map(dephasing_generator(g), t).matrix - dephasing_map_analytic(g, t).matrix))
            for g in (0.5, 1.0, 3.0) for t in (0.1, 1.0, 2.0)
        )
    ok = exp_err <= 1e-12 and form_err <= 1e-9 and closed_err <= 1e-12 and tm.elapsed < 10
    emit("C8 exactness ladder", ok,
         f"expm vs Taylor {exp_err:.1e} (<= 1e-12), forms {form_err:.1e} (<= 1e-9), "
         f"dephasing {closed_err:.1e} (<= 1e-12), {tm.elapsed:.2f}s (< 10s)")
    assert ok


def test_c9_determinism(tmp_path, emit):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "experiment": "variance_decay",
        "distribution": {"kind": "dephasing", "rates": [1.0, 3.0], "weights": [0.5, 0.5]},
        "n_list": [8, 16, 32, 64],
        "grid": {"T": 1.0, "points": 11},
        "trials": 1000,
        "seed": 31337,
    }))
    with Timer() as tm:
        codes, blobs = [], set()
        for threads in ("1", "2", "4", "1"):
            out = tmp_path / f"out{threads}{len(codes)}"
            codes.append(cli_main(["run", str(cfg), "--seed", "42", "--threads", threads, "--out", str(out)]))
            blobs.add((out / "data.csv").read_bytes())
    ok = set(codes) == {EXIT_OK} and len(blobs) == 1 and tm.elapsed < 60
    emit("C9 determinism", ok, f"{len(codes)} runs at threads 1/2/4/1, {len(blobs)} distinct CSV, "
         f"{tm.elapsed:.1f}s (< 60s)")
    assert ok
