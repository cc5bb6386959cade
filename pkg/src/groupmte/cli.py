"""Command-line driver.

Subcommands: simulate, estimate-parametric, estimate-semiparametric,
bootstrap, coverage, local-effects, prte, diagnostics, naive-mte.  Flags
override values from an optional JSON config file (``--config``).  Exit
codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure; failures emit a one-line JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import ConfigError, DataError, GroupMteError
from .model import EvalPoint
from . import io as gio

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_STOCHASTIC = {"simulate", "bootstrap", "coverage"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parse_grid(spec):
    """Parse an axis spec "lo:hi:n" into n equispaced points."""
    try:
        lo, hi, n = spec.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise ConfigError(f"bad grid spec {spec!r}, expected lo:hi:n")
    if not (0.0 < lo <= hi < 1.0) or n < 1:
        raise ConfigError(f"grid {spec!r} must lie inside (0, 1) with n >= 1")
    return np.linspace(lo, hi, n)


def _parse_points(spec):
    """Parse "p0,p1;p0,p1;..." into a list of pairs."""
    pts = []
    for chunk in spec.split(";"):
        try:
            a, b = (float(v) for v in chunk.split(","))
        except ValueError:
            raise ConfigError(f"bad point spec {chunk!r}, expected p0,p1")
        pts.append((a, b))
    return pts


def _build_parser():
    parser = _Parser(prog="groupmte", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def cmd(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (env GROUPMTE_THREADS overrides)")
        return p

    p = cmd("simulate", help="draw a synthetic dataset and write it as CSV")
    p.add_argument("--g", type=int, default=None, help="number of groups")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sutva", action="store_true", help="spillover-free variant")
    p.add_argument("--out", default=None)

    p = cmd("estimate-parametric", help="three-stage fit and effect surface grid")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--k1", type=int, default=None, help="probit polynomial degree")
    p.add_argument("--eps-bound", type=float, default=None)
    p.add_argument("--rule-order", type=int, default=None)
    p.add_argument("--pool-units", action="store_true")
    p.add_argument("--grid", default=None, help="axis spec lo:hi:n")
    p.add_argument("--out", default=None)

    p = cmd("estimate-semiparametric", help="series + local-cubic ratio estimates")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--kappa", type=int, default=None)
    p.add_argument("--delta", type=float, default=None, help="trimming constant")
    p.add_argument("--h1", type=float, default=None, help="denominator bandwidth")
    p.add_argument("--h2", type=float, default=None, help="numerator bandwidth")
    p.add_argument("--kernel", default=None)
    p.add_argument("--penalty", choices=("none", "l1"), default=None)
    p.add_argument("--grid", default=None)
    p.add_argument("--out", default=None)

    p = cmd("bootstrap", help="group bootstrap CIs for the parametric pipeline")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--b", type=int, default=None, help="bootstrap replicates")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--k1", type=int, default=None)
    p.add_argument("--levels", default=None, help="comma-separated CI levels")
    p.add_argument("--points", default=None, help="p0,p1;p0,p1;...")
    p.add_argument("--out", default=None)

    p = cmd("coverage", help="Monte Carlo coverage table")
    p.add_argument("--g", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--boot", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)

    p = cmd("local-effects", help="local average effects from a fitted model")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--k1", type=int, default=None)
    p.add_argument("--low", default=None, help="lower vertex p0,p1")
    p.add_argument("--high", default=None, help="upper vertex p0,p1")
    p.add_argument("--out", default=None)

    p = cmd("prte", help="policy-relevant treatment effect")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--k1", type=int, default=None)
    p.add_argument("--policy", choices=("absolute", "proportional", "instrument"),
                   default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--j", type=int, default=None, help="shifted instrument column")
    p.add_argument("--out", default=None)

    p = cmd("diagnostics", help="testable-implication reports")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--k1", type=int, default=None)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--cell-width", type=float, default=None)
    p.add_argument("--out", default=None)

    p = cmd("naive-mte", help="one-dimensional local-IV comparator")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--bandwidth", type=float, default=None)
    p.add_argument("--unit", type=int, default=None)
    p.add_argument("--grid", default=None)
    p.add_argument("--out", default=None)
    return parser


def _merge_config(args):
    ns = vars(args)
    if ns.get("config"):
        cfg = gio.load_config_json(ns["config"])
        for key, value in cfg.items():
            key = key.replace("-", "_")
            if key in ns and (ns[key] is None or ns[key] is False):
                ns[key] = value
    return ns


def _require(ns, *keys):
    for key in keys:
        if ns.get(key) is None:
            raise ConfigError(f"missing required parameter --{key.replace('_', '-')}")


def _threads(ns):
    env = os.environ.get("GROUPMTE_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"bad GROUPMTE_THREADS value {env!r}")
    return max(1, ns.get("threads") or 1)


def _resolved(ns):
    skip = {"command", "config"}
    return {k: v for k, v in ns.items() if k not in skip and v is not None}


def _pipeline_config(ns):
    from .pipeline import PipelineConfig

    kwargs = {}
    if ns.get("k1") is not None:
        kwargs["K1"] = int(ns["k1"])
    if ns.get("eps_bound") is not None:
        kwargs["eps_bound"] = float(ns["eps_bound"])
    if ns.get("rule_order") is not None:
        kwargs["rule_order"] = int(ns["rule_order"])
    if ns.get("pool_units"):
        kwargs["pool_units"] = True
    return PipelineConfig(**kwargs)


def _cmd_simulate(ns):
    from .simulation import DgpConfig, simulate_dataset

    _require(ns, "g", "seed", "out")
    cfg = DgpConfig(G=int(ns["g"]), seed=int(ns["seed"]))
    if ns.get("sutva"):
        cfg = cfg.sutva()
    data = simulate_dataset(cfg)
    gio.write_dataset_csv(data, ns["out"], header_comment=_resolved(ns))
    return EXIT_OK


def _cmd_estimate_parametric(ns):
    from .pipeline import fit_parametric_pipeline

    _require(ns, "infile", "out")
    data = gio.load_dataset_csv(ns["infile"])
    fit = fit_parametric_pipeline(data, _pipeline_config(ns))
    axis = _parse_grid(ns.get("grid") or "0.3:0.7:5")
    rows = []
    for p0 in axis:
        for p1 in axis:
            rows.append({"p0": p0, "p1": p1,
                         "mcse_1": fit.mcse(0, 1, p0, p1),
                         "mcse_0": fit.mcse(0, 0, p0, p1),
                         "mcde_1": fit.mcde(0, 1, p0, p1),
                         "mcde_0": fit.mcde(0, 0, p0, p1)})
    header = _resolved(ns)
    header["rho_hat"] = fit.rho
    gio.write_rows_csv(ns["out"], ["p0", "p1", "mcse_1", "mcse_0", "mcde_1", "mcde_0"],
                       rows, header_comment=header)
    return EXIT_OK


def _cmd_estimate_semiparametric(ns):
    from .errors import ZeroDenominatorError
    from .semiparametric import (fit_series_propensity, semiparam_mtr,
                                 local_cubic_cross_derivative)

    _require(ns, "infile", "h1", "out")
    data = gio.load_dataset_csv(ns["infile"])
    kappa = int(ns.get("kappa") or 8)
    delta = float(ns.get("delta") or 0.001)
    kernel = ns.get("kernel") or "epanechnikov"
    penalty = ns.get("penalty") or "none"
    h1 = float(ns["h1"])
    h2 = float(ns["h2"]) if ns.get("h2") is not None else 0.9 * h1
    models = [fit_series_propensity(data, unit, kappa, penalty=penalty,
                                    trim_delta=delta) for unit in (0, 1)]
    prop = np.column_stack([m.predict(data.w_flat()) for m in models])
    axis = _parse_grid(ns.get("grid") or "0.3:0.7:5")
    d_resp = (data.d[:, 0] * data.d[:, 1]).astype(float)
    rows = []
    for p0 in axis:
        for p1 in axis:
            row = {"p0": p0, "p1": p1}
            row["b4"] = local_cubic_cross_derivative(
                prop, d_resp, (p0, p1), h1, kernel).cross_derivative
            mtr = {}
            for d in (0, 1):
                for dp in (0, 1):
                    try:
                        mtr[(d, dp)] = semiparam_mtr(data, prop, None, 0, d, dp,
                                                     (p0, p1), h1, h2, kernel)
                    except ZeroDenominatorError:
                        mtr[(d, dp)] = float("nan")
                    row[f"mtr_{d}{dp}"] = mtr[(d, dp)]
            row["mcse_1"] = mtr[(1, 1)] - mtr[(1, 0)]
            row["mcse_0"] = mtr[(0, 1)] - mtr[(0, 0)]
            row["mcde_1"] = mtr[(1, 1)] - mtr[(0, 1)]
            row["mcde_0"] = mtr[(1, 0)] - mtr[(0, 0)]
            rows.append(row)
    cols = ["p0", "p1", "b4", "mtr_00", "mtr_01", "mtr_10", "mtr_11",
            "mcse_1", "mcse_0", "mcde_1", "mcde_0"]
    gio.write_rows_csv(ns["out"], cols, rows, header_comment=_resolved(ns))
    return EXIT_OK


def _default_targets_for(points):
    from .inference import Target

    targets = [Target("rho")]
    for kind in ("MCSE", "MCDE"):
        for d in (1, 0):
            for p0, p1 in points:
                targets.append(Target(kind, d, EvalPoint(p0, p1)))
    return tuple(targets)


def _cmd_bootstrap(ns):
    from .inference import EVAL_POINTS, bootstrap

    _require(ns, "infile", "b", "seed", "out")
    data = gio.load_dataset_csv(ns["infile"])
    levels = tuple(float(v) for v in (ns.get("levels") or "0.90,0.95").split(","))
    points = _parse_points(ns["points"]) if ns.get("points") else EVAL_POINTS
    targets = _default_targets_for(points)
    result = bootstrap(data, _pipeline_config(ns), targets, B=int(ns["b"]),
                       levels=levels, seed=int(ns["seed"]), threads=_threads(ns))
    cols = ["target", "estimate"]
    for level in levels:
        cols.extend([f"lower_{level:g}", f"upper_{level:g}"])
    rows = []
    for k, t in enumerate(result.targets):
        row = {"target": t.label(), "estimate": result.point[k]}
        for level in levels:
            lo, hi = result.cis[level]
            row[f"lower_{level:g}"] = lo[k]
            row[f"upper_{level:g}"] = hi[k]
        rows.append(row)
    header = _resolved(ns)
    header["n_failed"] = result.n_failed
    header["flagged"] = result.flagged
    gio.write_rows_csv(ns["out"], cols, rows, header_comment=header)
    return EXIT_OK


def _cmd_coverage(ns):
    from .inference import EVAL_POINTS, coverage_experiment

    _require(ns, "g", "reps", "boot", "seed", "out")
    result = coverage_experiment(R=int(ns["reps"]), G=int(ns["g"]),
                                 B=int(ns["boot"]), seed=int(ns["seed"]),
                                 threads=_threads(ns))
    rows = gio.coverage_table_rows(result)
    cols = ["panel", "d"] + [f"({a:g},{b:g})" for a, b in EVAL_POINTS] + ["rho"]
    header = _resolved(ns)
    header["n_failed_replications"] = result.n_failed_replications
    gio.write_rows_csv(ns["out"], cols, rows, header_comment=header)
    return EXIT_OK


def _cmd_local_effects(ns):
    from .effects import (acse_acde, lacde_fixed_peer, lacde_rectangle,
                          lacse_fixed_own, lacse_rectangle, model_implied_moments)
    from .pipeline import fit_parametric_pipeline

    _require(ns, "infile", "out")
    data = gio.load_dataset_csv(ns["infile"])
    fit = fit_parametric_pipeline(data, _pipeline_config(ns))
    low = _parse_points(ns.get("low") or "0.3,0.3")[0]
    high = _parse_points(ns.get("high") or "0.7,0.7")[0]
    mom = lambda p0, p1: model_implied_moments(fit.coeffs, 0, fit.copula, p0, p1)
    ll, lh = mom(low[0], low[1]), mom(low[0], high[1])
    hl, hh = mom(high[0], low[1]), mom(high[0], high[1])
    rows = []
    for d in (1, 0):
        rows.append({"effect": "LACSE", "d": d, "method": "line",
                     "value": lacse_fixed_own(d, ll, lh)})
        rows.append({"effect": "LACDE", "d": d, "method": "line",
                     "value": lacde_fixed_peer(d, ll, hl)})
        rows.append({"effect": "LACSE", "d": d, "method": "rectangle",
                     "value": lacse_rectangle(d, (ll, lh, hl, hh))})
        rows.append({"effect": "LACDE", "d": d, "method": "rectangle",
                     "value": lacde_rectangle(d, (ll, lh, hl, hh))})
        rows.append({"effect": "ACSE", "d": d, "method": "full",
                     "value": acse_acde(fit.surface("MCSE", 0, d), fit.copula)})
        rows.append({"effect": "ACDE", "d": d, "method": "full",
                     "value": acse_acde(fit.surface("MCDE", 0, d), fit.copula)})
    header = _resolved(ns)
    header["rho_hat"] = fit.rho
    gio.write_rows_csv(ns["out"], ["effect", "d", "method", "value"], rows,
                       header_comment=header)
    return EXIT_OK


def _cmd_prte(ns):
    from .pipeline import fit_parametric_pipeline
    from .prte import PolicySpec, prte, surfaces_from_fit

    _require(ns, "infile", "policy", "eps", "out")
    data = gio.load_dataset_csv(ns["infile"])
    fit = fit_parametric_pipeline(data, _pipeline_config(ns))
    kind = {"absolute": "absolute_shift", "proportional": "proportional_shift",
            "instrument": "instrument_shift"}[ns["policy"]]
    if kind == "instrument_shift":
        _require(ns, "j")
    policy = PolicySpec(kind=kind, eps=float(ns["eps"]),
                        j=int(ns["j"]) if ns.get("j") is not None else None)
    result = prte(policy, surfaces_from_fit(fit), fit.copula, fit.propensities,
                  probits=fit.probits, w=data.w_flat())
    row = {"policy": kind, "eps": float(ns["eps"]),
           "delta_ey": result.delta_ey, "delta_p": result.delta_p,
           "prte": result.prte}
    cols = ["policy", "eps", "delta_ey", "delta_p", "prte"]
    if result.strata is not None:
        for k, share in enumerate(result.strata, start=1):
            row[f"stratum_{k}"] = share
            cols.append(f"stratum_{k}")
    gio.write_rows_csv(ns["out"], cols, [row], header_comment=_resolved(ns))
    return EXIT_OK


def _cmd_diagnostics(ns):
    from .diagnostics import index_sufficiency_report, nesting_inequality_report
    from .pipeline import fit_parametric_pipeline

    _require(ns, "infile", "out")
    data = gio.load_dataset_csv(ns["infile"])
    fit = fit_parametric_pipeline(data, _pipeline_config(ns))
    h = float(ns.get("h") or 0.6)
    cell_width = float(ns.get("cell_width") or 0.1)
    grid = [(a, b) for a in (0.3, 0.5, 0.7) for b in (0.3, 0.5, 0.7)]
    q_low, q_high = (tuple(np.quantile(data.y[:, unit], (0.25, 0.75)))
                     for unit in (0, 1))
    nesting = nesting_inequality_report(data, fit.propensities,
                                        (q_low, q_high), grid, h)
    index = index_sufficiency_report(data, fit.propensities, cell_width,
                                     outcome_sets=(q_low, q_high))
    rows = []
    for pt, stat, se, flag in zip(nesting.points, nesting.statistic,
                                  nesting.se, nesting.flags):
        rows.append({"check": nesting.check, "point": f"{pt[0]}@{pt[1]}",
                     "statistic": stat, "se": se, "flag": bool(flag)})
    for pt, stat, flag in zip(index.points, index.statistic, index.flags):
        rows.append({"check": index.check, "point": str(pt),
                     "statistic": stat, "se": 1.0, "flag": bool(flag)})
    header = _resolved(ns)
    header["nesting_summary"] = nesting.summary
    header["index_summary"] = index.summary
    gio.write_rows_csv(ns["out"], ["check", "point", "statistic", "se", "flag"],
                       rows, header_comment=header)
    return EXIT_OK


def _cmd_naive_mte(ns):
    from .simulation import naive_mte

    _require(ns, "infile", "out")
    data = gio.load_dataset_csv(ns["infile"])
    surface = naive_mte(data, bandwidth=float(ns.get("bandwidth") or 0.15),
                        unit=int(ns.get("unit") or 0))
    axis = _parse_grid(ns.get("grid") or "0.3:0.7:5")
    rows = [{"p0": p0, "naive_mte": surface(EvalPoint(p0, 0.5))} for p0 in axis]
    gio.write_rows_csv(ns["out"], ["p0", "naive_mte"], rows,
                       header_comment=_resolved(ns))
    return EXIT_OK


_HANDLERS = {
    "simulate": _cmd_simulate,
    "estimate-parametric": _cmd_estimate_parametric,
    "estimate-semiparametric": _cmd_estimate_semiparametric,
    "bootstrap": _cmd_bootstrap,
    "coverage": _cmd_coverage,
    "local-effects": _cmd_local_effects,
    "prte": _cmd_prte,
    "diagnostics": _cmd_diagnostics,
    "naive-mte": _cmd_naive_mte,
}


def _emit_error(exc, code):
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(record), file=sys.stderr)
    return code


def run_command(argv):
    """Execute one subcommand; returns the process exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError("no subcommand given")
        ns = _merge_config(args)
        if args.command in _STOCHASTIC and ns.get("seed") is None:
            raise ConfigError(f"--seed is required for {args.command}")
        return _HANDLERS[args.command](ns)
    except (ConfigError, ValueError) as exc:
        return _emit_error(exc, EXIT_CONFIG)
    except (DataError, OSError) as exc:
        return _emit_error(exc, EXIT_DATA)
    except (GroupMteError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return _emit_error(exc, EXIT_NUMERIC)


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
