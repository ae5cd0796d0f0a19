"""Convergence sweeps, chain diagnostics and report writing."""
import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import min_slope_for
from .evolution import remainder_bound, residual
from .exceptions import RandevoError
from .expansion import build_expansion
from .markov import chain_algebra, diffusion_tensor_pi_weighted

logger = logging.getLogger(__name__)

DEGENERATE_ERROR = 1e-12


def fit_slope(eps, errors):
    """Least-squares line through ``(log eps, log error)``.

    Returns ``(slope, intercept, r2)``.
    """
    x = np.log(np.asarray(eps, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    if len(x) < 3:
        raise ValueError("at least three points are needed for an order fit")
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def to_jsonable(obj):
    """Recursively convert numpy and complex values; complex becomes ``[re, im]``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(payload), indent=2) + "\n")
    return path


def write_matrix_csv(path, matrix):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.atleast_2d(np.real_if_close(matrix)), delimiter=",", fmt="%.17g")
    return path


def write_field_csv(path, field_values, grid):
    """One row per grid point: coordinates then one column per state."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pts = grid.points()
    vals = field_values.reshape(field_values.shape[0], -1).T
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(grid.d)]
                        + [f"u{i}" for i in range(vals.shape[1])])
        for p, v in zip(pts, vals):
            writer.writerow([repr(float(c)) for c in p] + [repr(float(c)) for c in v])
    return path


def write_plot_data(path, eps, errors):
    """Two-column ``log(eps) log(error)`` file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.column_stack([np.log(eps), np.log(errors)]), fmt="%.17g",
               header="log_eps log_error")
    return path


# -- analyze -------------------------------------------------------------------

def analyze(model, tol=None):
    """Chain algebra report for ``model``; never raises on an unbalanced chain."""
    kwargs = {} if tol is None else {"tol": tol}
    algebra = chain_algebra(model, require_balance=False, **kwargs)
    tol_balance = (tol.balance if tol is not None else 1e-12)
    balanced = bool(np.abs(algebra.balance_residual).max() <= tol_balance)
    report = {
        "tool_version": __version__,
        "model": model.to_dict(),
        "pi": algebra.pi,
        "Pi": algebra.Pi,
        "R0": algebra.R0,
        "R0_convention": "R0 = int_0^inf (exp(Qt) - Pi) dt, Q R0 = Pi - I",
        "eigenvalues": algebra.eigenvalues,
        "spectral_gap": algebra.spectral_gap,
        "balance_residual": algebra.balance_residual,
        "balanced": balanced,
        "a_hat": None,
        "a_hat_pi_weighted": None,
        "flags": [],
    }
    if not balanced:
        report["flags"].append("balance_violation")
        return report
    try:
        a_hat = chain_algebra(model, **kwargs).a_hat
    except RandevoError as exc:
        report["flags"].append(f"diffusion_tensor: {exc}")
        return report
    d = a_hat.shape[0]
    iso = float(np.trace(a_hat) / d)
    report["a_hat"] = a_hat
    report["a_hat_pi_weighted"] = diffusion_tensor_pi_weighted(model, algebra.pi, algebra.R0)
    report["isotropy_deviation"] = float(np.linalg.norm(a_hat - iso * np.eye(d)))
    n = model.N - 1
    if model.name.startswith(("cyclic", "uniform")):
        reference = 1.0 / (n + 1) ** 2
        agrees = bool(abs(iso - reference) <= 1e-10 * max(1.0, reference))
        report["heat_coefficient_reference"] = {
            "formula": "1/(n+1)^2", "n": n, "reference": reference,
            "computed_isotropic": iso, "agrees": agrees,
            "ratio": iso / reference,
        }
        if not agrees:
            report["flags"].append("heat_coefficient_discrepancy")
    return report


# -- sweep ---------------------------------------------------------------------

@dataclass
class SweepReport:
    config: dict
    diagnostics: dict
    curves: list = field(default_factory=list)
    tool_version: str = __version__

    @property
    def passed(self):
        return all(c["passed"] for c in self.curves)

    def to_dict(self):
        return {"tool_version": self.tool_version, "passed": self.passed,
                "config": self.config, "diagnostics": self.diagnostics,
                "curves": self.curves}


def _curve(eps, errors, min_slope, min_r2):
    if max(errors) <= DEGENERATE_ERROR:
        return {"degenerate": True, "slope": None, "intercept": None, "r2": None,
                "passed": True}
    slope, intercept, r2 = fit_slope(eps, errors)
    return {"degenerate": False, "slope": slope, "intercept": intercept, "r2": r2,
            "passed": bool(slope >= min_slope and r2 >= min_r2)}


def run_sweep(config, out_dir=None):
    """Remainder and residual versus eps for every configured order and time.

    Writes ``sweep.json`` and plot files when ``out_dir`` is given.
    """
    if len(config.eps) < 3:
        raise ValueError("a sweep needs at least three eps values")
    tol = config.tolerances
    model = config.model
    grid = config.grid()
    f = config.build_test_function(grid)
    algebra = chain_algebra(model, tol)
    es = build_expansion(model, f, max(config.orders), algebra, tol)
    diag = analyze(model, tol)
    diagnostics = {k: diag[k] for k in ("a_hat", "a_hat_pi_weighted", "balance_residual",
                                        "spectral_gap", "flags")}
    report = SweepReport(config=config.to_dict(), diagnostics=diagnostics)
    eps = sorted(config.eps, reverse=True)
    for N in config.orders:
        for t in config.times:
            rows = []
            for e in eps:
                try:
                    rep = residual(model, es, grid, N, e, t)
                except (RandevoError, OverflowError) as exc:
                    raise type(exc)(f"eps={e}, N={N}, t={t}: {exc}") from exc
                rows.append({"eps": e, "remainder_sup": rep.remainder_sup,
                             "remainder_l2": rep.remainder_l2,
                             "residual_sup": rep.residual_sup,
                             "initial_remainder_sup": rep.initial_remainder_sup})
            rem = [r["remainder_sup"] for r in rows]
            res = [r["residual_sup"] for r in rows]
            threshold = min_slope_for(N, config.min_slope)
            curve = {"order": N, "t": t, "rows": rows, "min_slope": threshold,
                     "min_r2": config.min_r2,
                     "remainder_fit": _curve(eps, rem, threshold, config.min_r2),
                     "residual_fit": (_curve(eps, res, -np.inf, -np.inf)
                                      if max(res) > DEGENERATE_ERROR else
                                      {"degenerate": True, "passed": True})}
            curve["passed"] = curve["remainder_fit"]["passed"]
            report.curves.append(curve)
            logger.info("N=%d t=%g slope=%s", N, t, curve["remainder_fit"]["slope"])
            if out_dir is not None and not curve["remainder_fit"]["degenerate"]:
                write_plot_data(Path(out_dir) / f"remainder_N{N}_t{t:g}.dat", eps, rem)
                if not curve["residual_fit"]["degenerate"]:
                    write_plot_data(Path(out_dir) / f"residual_N{N}_t{t:g}.dat", eps, res)
    if out_dir is not None:
        write_json(Path(out_dir) / "sweep.json", report.to_dict())
    return report


def residual_with_bound(config, N, epsilon, t):
    """Residual report plus the remainder-bound evaluation, as a dict."""
    model = config.model
    grid = config.grid()
    f = config.build_test_function(grid)
    es = build_expansion(model, f, max(N, 1), chain_algebra(model, config.tolerances),
                         config.tolerances)
    rep = residual(model, es, grid, N, epsilon, t)
    remainder_bound(model, grid, epsilon, rep, config.tolerances)
    return rep.to_dict()
