"""Command line entry point: ``qds-lln validate|run|oracle``."""
import argparse
import itertools
import os
import sys

import numpy as np

from .distributions import dephasing_generator
from .gkls import make_lindblad
from .engine import semigroup_map
from .harness import ConfigError, load_config, run_experiment, with_overrides
from .linalg import mat_exp
from .oracles import (
    DephasingModel,
    dephasing_map_analytic,
    dephasing_variance_analytic,
    exp_corpus,
    taylor_exp,
    unitary_conjugation_reference,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_THRESHOLD = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_threads():
    try:
        return max(1, int(os.environ.get("QDS_LLN_THREADS", "1")))
    except ValueError:
        return 1


def build_parser():
    parser = _Parser(prog="qds-lln", description="Law-of-large-numbers experiments for random GKLS semigroups.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("validate", help="parse and validate a config")
    p.add_argument("config")
    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default $QDS_LLN_THREADS or 1)")
    sub.add_parser("oracle", help="print oracle reference tables")
    return parser


def oracle_rows():
    """(check, parameters, error, tolerance) for every oracle cross-check."""
    rows = []
    for gamma, t in itertools.product((0.5, 1.0, 3.0), (0.1, 1.0, 2.0)):
        err = np.max(np.abs(semigroup_map(dephasing_generator(gamma), t).matrix
                            - dephasing_map_analytic(gamma, t).matrix))
        rows.append(("dephasing_closed_form", f"gamma={gamma} t={t}", err, 1e-12))
    for i, a in enumerate(exp_corpus()):
        ref = taylor_exp(a, 40)
        err = np.linalg.norm(mat_exp(a) - ref) / max(1.0, np.linalg.norm(ref))
        rows.append(("mat_exp_vs_taylor", f"corpus[{i}] size={a.shape[0]}", err, 1e-12))
    rng = np.random.default_rng(7)
    h = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    h = h + h.conj().T
    g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    rho = g @ g.conj().T
    rho /= np.trace(rho)
    gen = make_lindblad([], h)
    for t in (0.3, 1.0):
        err = np.max(np.abs(semigroup_map(gen, t).apply(rho) - unitary_conjugation_reference(h, t, rho)))
        rows.append(("unitary_conjugation", f"dim=3 t={t}", err, 1e-11))
    model = DephasingModel((1.0, 3.0), (0.5, 0.5))
    for n in (1, 2, 3, 4):
        t = 1.0
        fs, ws = [], []
        for path in itertools.product(range(2), repeat=n):
            fs.append(np.exp(-2 * (t / n) * sum(model.rates[a] for a in path)))
            ws.append(np.prod([model.weights[a] for a in path]))
        fs, ws = np.array(fs), np.array(ws)
        mean = ws @ fs
        enum = ws @ (fs - mean) ** 2
        err = abs(enum - dephasing_variance_analytic(model, n, t))
        rows.append(("dephasing_variance_vs_paths", f"n={n} t={t}", err, 1e-14))
    return rows


def _oracle():
    ok = True
    print(f"{'check':<30} {'parameters':<24} {'error':>12} {'tol':>8}  status")
    for name, params, err, tol in oracle_rows():
        good = err <= tol
        ok &= good
        print(f"{name:<30} {params:<24} {err:12.3e} {tol:8.0e}  {'ok' if good else 'FAIL'}")
    return EXIT_OK if ok else EXIT_THRESHOLD


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "oracle":
        return _oracle()
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"invalid config {args.config}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.command == "validate":
        print(f"ok: {cfg.experiment} with n_list={list(cfg.n_list)}")
        return EXIT_OK
    cfg = with_overrides(cfg, seed=args.seed, output_dir=args.out)
    threads = args.threads if args.threads is not None else _default_threads()
    report = run_experiment(cfg, threads=max(1, threads))
    status = "passed" if report.passed else "FAILED"
    print(f"{cfg.experiment}: {status}; wrote {cfg.output_dir}/report.json and data.csv")
    return EXIT_OK if report.passed else EXIT_THRESHOLD


def cli_main(argv=None):
    """Like :func:`main`, but ``SystemExit`` from argparse becomes a return code."""
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
