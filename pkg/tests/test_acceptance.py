"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""
import time

import numpy as np
import pytest

from conftest import random_model
from randevo.evolution import (
    exact_solution,
    generator_inverse_norm,
    mc_estimate,
    remainder_bound,
    residual,
)
from randevo.expansion import (
    build_expansion,
    hierarchy_residuals,
    laplace_cross_check,
    laplace_singular,
    layer_residuals,
    truncated_solution,
)
from randevo.harness import analyze, fit_slope
from randevo.markov import chain_algebra, exp0
from randevo.models import builtin_model, two_state_telegraph
from randevo.spectral import ModeGrid, sin_k, trig_poly

BUILTIN_NAMES = ("two_state_telegraph", "cyclic(2)", "uniform(2)")
SWEEP_EPS = (0.2, 0.1, 0.05, 0.025)


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        assert ok, f"{label}: {detail}"
    return emit


def test_criterion_01_chain_algebra_identities(report):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    models = [random_model(rng, n=int(rng.integers(2, 9)), balanced=False) for _ in range(100)]
    models += [builtin_model(name) for name in BUILTIN_NAMES]
    worst = 0.0
    for model in models:
        alg = chain_algebra(model, require_balance=False)
        Q, Pi, R0, I = model.Q, alg.Pi, alg.R0, np.eye(model.N)
        checks = [alg.pi @ Q, Pi @ Pi - Pi, Q @ R0 - (Pi - I), R0 @ Q - (Pi - I), Pi @ R0,
                  R0 @ Pi]
        for s, t in ((0.3, 0.9), (1.0, 2.5)):
            checks.append(exp0(alg, s) @ exp0(alg, t) - exp0(alg, s + t))
        worst = max(worst, max(float(np.abs(c).max()) for c in checks))
    elapsed = time.perf_counter() - start
    report("1 chain-algebra identities", worst <= 1e-9 and elapsed < 5,
           f"{len(models)} models, max violation {worst:.2e} (tol 1e-9), {elapsed:.2f}s (< 5s)")


def test_criterion_02_telegraph_golden_values(report):
    start = time.perf_counter()
    alg = chain_algebra(two_state_telegraph())
    Pi = np.full((2, 2), 0.5)
    errs = {"pi": np.abs(alg.pi - 0.5).max(),
            "R0": np.abs(alg.R0 - (np.eye(2) - Pi) / 2).max(),
            "a_hat": abs(alg.a_hat[0, 0] - 0.5)}
    elapsed = time.perf_counter() - start
    worst = max(errs.values())
    report("2 telegraph golden values", worst <= 1e-12 and elapsed < 1,
           ", ".join(f"{k} err {v:.1e}" for k, v in errs.items()) + f", {elapsed:.3f}s (< 1s)")


def test_criterion_03_hierarchy_residuals(report):
    start = time.perf_counter()
    worst = {}
    for name in BUILTIN_NAMES:
        model = builtin_model(name)
        grid = ModeGrid(model.d, 11)
        for f in (sin_k(grid), trig_poly(grid, 5)):
            es = build_expansion(model, f, order=4)
            hier = hierarchy_residuals(es, times=(0.0, 0.5, 1.0))
            worst[f"{name}/{f.name}"] = max(max(hier["regular"]), max(hier["solvability"]),
                                            max(layer_residuals(es, times=(0.0, 1.0, 5.0))))
    elapsed = time.perf_counter() - start
    top = max(worst.values())
    report("3 hierarchy residuals", top <= 1e-9 and elapsed < 10,
           f"max residual {top:.2e} over {len(worst)} cases, N<=4 (tol 1e-9), "
           f"{elapsed:.2f}s (< 10s)")


def test_criterion_04_matching(report):
    worst = 0.0
    for name in BUILTIN_NAMES:
        model = builtin_model(name)
        grid = ModeGrid(model.d, 11)
        f = trig_poly(grid, 5)
        es = build_expansion(model, f, order=4)
        ref = f.coefficients[:, None] * np.ones(model.N)
        for N in range(5):
            for eps in (0.2, 0.05):
                got = truncated_solution(es, N, eps, 0.0).coefficients
                worst = max(worst, float(np.abs(got - ref).max()))
    report("4 matching at t=0", worst <= 1e-12, f"max |u_N(0) - fhat 1| = {worst:.2e} (tol 1e-12)")


def test_criterion_05_laplace_cross_check(report):
    model = two_state_telegraph()
    grid = ModeGrid(1, 9)
    f = sin_k(grid)
    es = build_expansion(model, f, order=3)
    rows = laplace_cross_check(es, max_n=3, lams=(0.5, 1.0, 2.0))
    rel = max(r["relative_error"] for r in rows)
    alg = es.algebra
    G = es.ops.G
    # -R0 A grad f, per mode
    target = -(G * f.coefficients[:, None] * np.ones(model.N)) @ alg.R0.T
    at_zero = laplace_singular(es, 1, 0.0)
    gap = float(np.abs(at_zero - target).max())
    k = grid.index_of([1])
    detail = (f"max relative gap {rel:.1e} (tol 1e-6); v~1(0) - (-R0 A grad f) = {gap:.2e} "
              f"(tol 1e-10), mode 1 computed {np.round(at_zero[k], 6).tolist()} "
              f"expected {np.round(target[k], 6).tolist()}")
    report("5 Laplace cross-check", rel <= 1e-6 and gap <= 1e-10, detail)


def _sweep(N, quantity):
    model = two_state_telegraph()
    grid = ModeGrid(1, 9)
    es = build_expansion(model, sin_k(grid), order=max(N, 1))
    reps = [residual(model, es, grid, N, eps, 1.0) for eps in SWEEP_EPS]
    return [getattr(r, quantity) for r in reps]


def test_criterion_06_convergence_orders(report):
    start = time.perf_counter()
    thresholds = {0: 0.9, 1: 1.8, 2: 2.5}
    fits, ok = [], True
    for N, need in thresholds.items():
        slope, _, r2 = fit_slope(SWEEP_EPS, _sweep(N, "remainder_sup"))
        ok &= slope >= need and r2 >= 0.98
        fits.append(f"N={N} slope {slope:.3f} (>= {need}) R2 {r2:.4f}")
    elapsed = time.perf_counter() - start
    report("6 convergence orders", ok and elapsed < 30,
           "; ".join(fits) + f"; {elapsed:.2f}s (< 30s)")


def test_criterion_07_residual_scaling(report):
    sup = _sweep(2, "residual_sup")
    l2 = _sweep(2, "residual_l2")
    slope, _, r2 = fit_slope(SWEEP_EPS, sup)
    slope_l2, _, _ = fit_slope(SWEEP_EPS, l2)
    # the sup residual is exactly linear in eps; allow float rounding in the fit only
    report("7 residual scaling", slope >= 1 - 1e-9,
           f"order-2 residual sup-norm slope {slope:.12f} (>= 1), R2 {r2:.4f}, "
           f"L2 slope {slope_l2:.6f}, sup values {', '.join(f'{e:.3e}' for e in sup)}")


def test_criterion_08_monte_carlo(report):
    start = time.perf_counter()
    lines, ok = [], True
    for name in ("two_state_telegraph", "uniform(2)"):
        model = builtin_model(name)
        grid = ModeGrid(model.d, 11)
        f = trig_poly(grid, 5)
        x = np.random.default_rng(42).uniform(0, 2 * np.pi, (20, model.d))
        est = mc_estimate(model, f, x, 1.0, 0.1, paths=100_000, seed=2024)
        again = mc_estimate(model, f, x, 1.0, 0.1, paths=100_000, seed=2024)
        exact = exact_solution(model, f, grid, 0.1, 1.0)(x)
        within = np.abs(est.mean - exact) <= 3.5 * est.stderr
        frac = float(within.mean())
        same = np.array_equal(est.mean, again.mean) and np.array_equal(est.stderr, again.stderr)
        ok &= frac >= 0.95 and same
        lines.append(f"{name} {frac:.1%} of {within.size} within 3.5 stderr, rerun identical={same}")
    elapsed = time.perf_counter() - start
    report("8 Monte Carlo validation", ok and elapsed < 60,
           "; ".join(lines) + f"; {elapsed:.1f}s (< 60s)")


def test_criterion_09_diagnostics(report):
    lines, ok = [], True
    for name in ("cyclic(2)", "uniform(2)"):
        rep = analyze(builtin_model(name))
        ref = rep["heat_coefficient_reference"]
        flagged = "heat_coefficient_discrepancy" in rep["flags"]
        ok &= rep["isotropy_deviation"] <= 1e-10 and (ref["agrees"] or flagged)
        lines.append(f"{name} isotropy {rep['isotropy_deviation']:.1e}, computed "
                     f"{ref['computed_isotropic']:.6f} vs 1/(n+1)^2 = {ref['reference']:.6f}, "
                     f"flag={'heat_coefficient_discrepancy' if flagged else 'none'}")
    report("9 diagnostics", ok, "; ".join(lines))


def test_criterion_10_bound_machinery(report):
    model = two_state_telegraph()
    grid = ModeGrid(1, 9)
    es = build_expansion(model, sin_k(grid), order=3)
    eps = 0.1
    norms = (generator_inverse_norm(model, grid, eps), generator_inverse_norm(model, grid, eps / 2))
    ratio = norms[0] / norms[1]
    rep = residual(model, es, grid, 2, eps, 1.0)
    bound = remainder_bound(model, grid, eps, rep)
    report("10 remainder-bound machinery", 3.5 <= ratio <= 4.5,
           f"||(L^eps)^-1|| = {norms[0]:.4f} at eps={eps}, {norms[1]:.4f} at eps={eps / 2}, "
           f"ratio {ratio:.4f} (need [3.5, 4.5]); bound {bound['bound']:.3e} vs measured "
           f"remainder {rep.remainder_sup:.3e}")
