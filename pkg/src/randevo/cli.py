"""Command-line interface.

Exit codes: 0 success, 1 validation or input error, 2 threshold failure.
"""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_floats
from .evolution import exact_solution, mc_estimate
from .exceptions import RandevoError
from .expansion import build_expansion, check_report, truncated_solution
from .harness import (
    analyze,
    residual_with_bound,
    run_sweep,
    write_field_csv,
    write_json,
    write_matrix_csv,
)
from .markov import chain_algebra
from .models import BUILTINS
from .spectral import StateField

EXIT_OK, EXIT_INVALID, EXIT_THRESHOLD = 0, 1, 2

TEST_FUNCTIONS = {
    "sin_k": "sin(k.x), k defaults to the first unit vector",
    "trig_poly": "fixed trigonometric polynomial with n_terms wavevector pairs",
    "gaussian_bump": "periodized Gaussian of the given width, truncated to the grid",
    "constant": "f = value",
    "csv": "grid samples read from a CSV file",
}


def _load(args):
    if args.config:
        cfg = RunConfig.load(args.config)
    else:
        cfg = RunConfig.from_model(args.model or "two_state_telegraph")
    if getattr(args, "eps", None):
        cfg.eps = parse_floats(args.eps)
    if getattr(args, "order", None) is not None:
        cfg.order = args.order
        cfg.orders = list(range(args.order + 1)) if args.command == "sweep" else cfg.orders
    if getattr(args, "seed", None) is not None:
        cfg.mc["seed"] = args.seed
    if args.out:
        cfg.out_dir = args.out
    return cfg


def _one_eps(cfg, args):
    return float(args.epsilon) if args.epsilon is not None else float(cfg.eps[0])


def cmd_analyze(cfg, args):
    report = analyze(cfg.model, cfg.tolerances)
    out = Path(cfg.out_dir)
    report["config"] = cfg.to_dict()
    write_json(out / "analyze.json", report)
    for key in ("Pi", "R0"):
        write_matrix_csv(out / f"{key}.csv", report[key])
    write_matrix_csv(out / "pi.csv", report["pi"])
    if report["a_hat"] is not None:
        write_matrix_csv(out / "a_hat.csv", report["a_hat"])
    _echo(f"a_hat = {np.round(report['a_hat'], 12).tolist() if report['a_hat'] is not None else None}")
    for flag in report["flags"]:
        _echo(f"flag: {flag}")
    ref = report.get("heat_coefficient_reference")
    if ref:
        _echo(f"heat coefficient: computed {ref['computed_isotropic']:.12g}, "
              f"reference {ref['formula']} = {ref['reference']:.12g}, agrees={ref['agrees']}")
    return EXIT_OK


def cmd_expand(cfg, args):
    grid = cfg.grid()
    f = cfg.build_test_function(grid)
    es = build_expansion(cfg.model, f, cfg.order, chain_algebra(cfg.model, cfg.tolerances),
                         cfg.tolerances)
    out = Path(cfg.out_dir)
    tables = {"config": cfg.to_dict(), "tool_version": __version__, "a_hat": es.a_hat,
              "u_terms": [_term_table(u, grid) for u in es.u_terms],
              "v_terms": [None] + [_term_table(v, grid) for v in es.v_terms[1:]]}
    write_json(out / "expansion.json", tables)
    t = float(cfg.times[0])
    for n, u in enumerate(es.u_terms):
        write_field_csv(out / f"u{n}_t{t:g}.csv", StateField(grid, u.evaluate(t), t).values(), grid)
    eps = _one_eps(cfg, args)
    write_field_csv(out / f"truncated_N{cfg.order}_eps{eps:g}_t{t:g}.csv",
                    truncated_solution(es, cfg.order, eps, t).values(), grid)
    if args.check:
        verdict = check_report(es)
        write_json(out / "check.json", verdict)
        _echo(f"check: {'pass' if verdict['pass'] else 'FAIL'}")
        return EXIT_OK if verdict["pass"] else EXIT_THRESHOLD
    return EXIT_OK


def _term_table(ep, grid):
    rows = []
    for k in range(grid.size):
        for m, mu, c in ep.terms(k):
            rows.append({"mode": grid.modes[k].tolist(), "m": m, "re_mu": mu.real,
                         "im_mu": mu.imag, "coefficient": c})
    return rows


def cmd_solve(cfg, args):
    grid = cfg.grid()
    f = cfg.build_test_function(grid)
    eps = _one_eps(cfg, args)
    t = float(args.t if args.t is not None else cfg.times[0])
    sol = exact_solution(cfg.model, f, grid, eps, t)
    out = Path(cfg.out_dir)
    write_field_csv(out / f"exact_eps{eps:g}_t{t:g}.csv", sol.values(), grid)
    write_json(out / "solve.json", {"tool_version": __version__, "config": cfg.to_dict(),
                                    "epsilon": eps, "t": t, "sup_norm": sol.sup_norm(),
                                    "l2_norm": sol.l2_norm()})
    return EXIT_OK


def cmd_simulate(cfg, args):
    grid = cfg.grid()
    f = cfg.build_test_function(grid)
    mc = cfg.mc
    eps = float(args.epsilon if args.epsilon is not None else mc["epsilon"])
    t = float(args.t if args.t is not None else mc["t"])
    paths = int(args.paths or mc["paths"])
    pts = cfg.query_points()
    est = mc_estimate(cfg.model, f, pts, t, eps, paths, int(mc["seed"]))
    exact = exact_solution(cfg.model, f, grid, eps, t)(pts)
    z = np.abs(est.mean - exact) / np.where(est.stderr > 0, est.stderr, np.inf)
    within = float(np.mean((z <= 3.5) | (np.abs(est.mean - exact) <= 1e-12)))
    payload = {"tool_version": __version__, "config": cfg.to_dict(), "points": pts,
               "estimate": est.to_dict(), "exact": exact,
               "ci95_low": est.mean - 1.96 * est.stderr,
               "ci95_high": est.mean + 1.96 * est.stderr,
               "fraction_within_3.5_stderr": within}
    write_json(Path(cfg.out_dir) / "simulate.json", payload)
    _echo(f"fraction within 3.5 stderr: {within:.3f}")
    return EXIT_OK if within >= 0.95 else EXIT_THRESHOLD


def cmd_residual(cfg, args):
    eps = _one_eps(cfg, args)
    t = float(args.t if args.t is not None else cfg.times[0])
    N = args.order if args.order is not None else 2
    rep = residual_with_bound(cfg, N, eps, t)
    rep["tool_version"] = __version__
    rep["config"] = cfg.to_dict()
    write_json(Path(cfg.out_dir) / "residual.json", rep)
    _echo(f"residual {rep['residual_sup']:.3e}, remainder {rep['remainder_sup']:.3e}, "
          f"bound {rep['bound']['bound']:.3e}")
    return EXIT_OK


def cmd_sweep(cfg, args):
    report = run_sweep(cfg, cfg.out_dir)
    for curve in report.curves:
        fit = curve["remainder_fit"]
        slope = "degenerate" if fit["degenerate"] else f"{fit['slope']:.3f} (R2 {fit['r2']:.4f})"
        _echo(f"N={curve['order']} t={curve['t']:g}: slope {slope} "
              f"[min {curve['min_slope']}] {'pass' if curve['passed'] else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_THRESHOLD


def cmd_example(cfg, args):
    _echo("models:")
    for name, desc in BUILTINS.items():
        _echo(f"  {name:22s} {desc}")
    _echo("test functions:")
    for name, desc in TEST_FUNCTIONS.items():
        _echo(f"  {name:22s} {desc}")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "expand": cmd_expand, "solve": cmd_solve,
            "simulate": cmd_simulate, "residual": cmd_residual, "sweep": cmd_sweep,
            "example": cmd_example}


def _echo(msg):
    print(msg)


def build_parser():
    parser = argparse.ArgumentParser(prog="randevo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI run configuration")
        p.add_argument("--model", help="built-in model when no config is given")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--order", type=int)
        p.add_argument("--eps", help="comma-separated eps list")
        p.add_argument("--epsilon", type=float, help="single eps for solve/simulate/residual")
        p.add_argument("--t", type=float, help="evaluation time")
        p.add_argument("--paths", type=int)
        p.add_argument("--check", action="store_true")
        p.add_argument("--list", action="store_true")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = None if args.command == "example" else _load(args)
        return COMMANDS[args.command](cfg, args)
    except (RandevoError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
