"""Command-line entry point.

Subcommands: simulate, analyze, sweep, trace-stats, compare. Every
subcommand is deterministic given its inputs and seeds; (policy, seed)
pairs and sweep grid points may run in parallel workers, with results
ordered before anything is written. Exit codes: 0 success, 2 bad
configuration, 3 I/O failure, 4 infeasibility, 5 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analytics, boundary, fileio, traceio
from .errors import AoisimError, ConfigurationError
from .netmodel import KIND_SAT, long_run_coverage
from .policies import MaxWeightPolicy, RandomizedPolicy, targets_for
from .simcore import ACTIVE_KERNEL, COVERAGE_SEED, run

ENV_WORKERS = "AOISIM_WORKERS"


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(ENV_WORKERS, "1")))
    except ValueError:
        return 1


def _parse_seeds(text) -> tuple:
    s = str(text)
    if "," in s:
        return tuple(int(v) for v in s.split(","))
    n = int(s)
    if n <= 0:
        raise ConfigurationError("need at least one seed")
    return tuple(range(n))


def _load_bundle(args):
    plan = None
    if getattr(args, "plan", None):
        plan = fileio.load_plan(fileio.resolve_config(args.plan))
    config = args.config or (plan.scenario if plan else None)
    if config is None:
        raise ConfigurationError("give --config or --plan")
    bundle = fileio.load_scenario(fileio.resolve_config(config))
    return bundle, plan


def _sim_params(args, plan, bundle):
    horizon = args.horizon or (plan.horizon if plan else None) \
        or bundle.sim_defaults.get("horizon", 1_000_000)
    burn = args.burn_in if args.burn_in is not None else (
        plan.burn_in if plan else bundle.sim_defaults.get("burn_in", 0))
    seeds = _parse_seeds(args.seeds) if args.seeds else (
        tuple(plan.seeds) if plan else (0,))
    return int(horizon), int(burn), seeds


def _expand_overrides(spec, overrides: dict):
    """Scenario variants from plan overrides; satellite parameters may be
    scalars or lists (lists fan out into one variant each)."""
    variants = [spec]
    for key, val in overrides.items():
        if key not in boundary.AXIS_NAMES:
            raise ConfigurationError(f"unknown override {key!r}")
        values = val if isinstance(val, (list, tuple)) else [val]
        expanded = []
        for sp in variants:
            for v in values:
                sp2 = boundary.scenario_with(sp, **{key: v})
                if len(values) > 1:
                    sp2 = dataclasses.replace(
                        sp2, scenario_id=f"{sp.scenario_id}-{key}={v:g}")
                expanded.append(sp2)
        variants = expanded
    return variants


def _run_one(task):
    spec, policy, seed, horizon, burn, record, timings, mw_targets = task
    return run(spec, policy, horizon, seed, burn_in=burn,
               record_cycles=record, mw_targets=mw_targets, timings=timings)


def cmd_simulate(args) -> int:
    bundle, plan = _load_bundle(args)
    horizon, burn, seeds = _sim_params(args, plan, bundle)
    policy_names = (args.policies.split(",") if args.policies
                    else (list(plan.policies) if plan
                          else sorted(bundle.policies)))
    variants = _expand_overrides(bundle.spec,
                                 plan.overrides if plan else {})
    os.makedirs(args.out, exist_ok=True)
    tasks = []
    for spec in variants:
        coverage = None
        for name in policy_names:
            policy = bundle.policy(name)
            mw_targets = None
            if isinstance(policy, MaxWeightPolicy):
                if coverage is None:
                    coverage = long_run_coverage(spec, seed=COVERAGE_SEED)
                mw_targets = targets_for(spec, policy, coverage)
            for seed in seeds:
                tasks.append((spec, policy, seed, horizon, burn,
                              args.dump_cycles, args.timings, mw_targets))
    workers = args.workers or _default_workers()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=1))
    else:
        results = [_run_one(t) for t in tasks]
    results.sort(key=lambda m: (m.scenario_id, m.policy_id, m.seed))
    fileio.write_runs_csv(os.path.join(args.out, "runs.csv"), results)
    if len(seeds) > 1:
        fileio.write_aggregate_csv(os.path.join(args.out, "aggregate.csv"),
                                   results)
    if args.dump_cycles:
        for m in results:
            if m.cycles is not None:
                fileio.write_cycles_csv(
                    os.path.join(args.out,
                                 f"cycles_{m.policy_id}_{m.seed}.csv"),
                    m.cycles)
    fileio.emit_plot_script(args.out, "policies")
    print(f"wrote {len(results)} runs to {args.out} "
          f"(kernel: {ACTIVE_KERNEL})")
    return 0


def cmd_analyze(args) -> int:
    bundle, _ = _load_bundle(args)
    spec = bundle.spec
    os.makedirs(args.out, exist_ok=True)
    mode = analytics.MODE_STRICT if args.strict_prop else analytics.MODE_EXACT
    coverage = long_run_coverage(spec, seed=COVERAGE_SEED)
    sat = spec.satellite

    sr = bundle.policies.get("sr")
    if sr is None:
        raise ConfigurationError("analyze needs a [policy.sr] table")
    summary = {"scenario_id": spec.scenario_id, "mode": mode}

    if sat is not None:
        _, mu_u = sr.tables(spec)
        u_period = {n.id: float(mu_u[i]) for i, n in enumerate(spec.nodes)}
        rep_with = analytics.ewspaoi_with_sat(
            spec, sr.mu, coverage, spec.availability.lam_a,
            spec.availability.lam_u, mode=mode, u_period_mu=u_period)
        nosat_mu = {n.id: u_period[n.id] for n in spec.nodes
                    if n.kind != KIND_SAT and u_period[n.id] > 0}
        rep_without = analytics.ewspaoi_no_sat(spec, nosat_mu, coverage)
        summary.update(ewspaoi_with=rep_with.ewspaoi,
                       ewspaoi_without=rep_without.ewspaoi,
                       gamma=rep_with.gamma, beta_sat=rep_with.beta_sat,
                       e_wasted=rep_with.e_wasted)
        fileio.write_analytic_cells_csv(
            os.path.join(args.out, "analytic_cells_with_sat.csv"), rep_with)
        fileio.write_analytic_cells_csv(
            os.path.join(args.out, "analytic_cells_without_sat.csv"),
            rep_without)
    else:
        rep = analytics.ewspaoi_no_sat(spec, sr.mu, coverage)
        summary.update(ewspaoi_without=rep.ewspaoi)
        fileio.write_analytic_cells_csv(
            os.path.join(args.out, "analytic_cells_without_sat.csv"), rep)

    from .policies import solve_targets
    targets = solve_targets(spec, coverage).nu
    summary["lower_bound"] = analytics.lower_bound(spec, coverage,
                                                   targets).value

    alpha_star = alpha_regime = None
    split = _iot_sat_split(spec, bundle)
    if split is not None:
        alpha_star, alpha_regime = split
    summary.update(alpha_star=alpha_star, alpha_regime=alpha_regime)

    path = os.path.join(args.out, "analytic_summary.csv")
    keys = list(summary)
    fileio.write_csv(path, keys, [[summary[k] for k in keys]])
    print(f"wrote analytic report to {args.out}")
    return 0


def _iot_sat_split(spec, bundle):
    """Access-split optimum; defined only for sensor-plus-satellite
    scenarios where every cell has a dedicated sensor and no UAV."""
    sat = spec.satellite
    if sat is None:
        return None
    sensors = [n for n in spec.nodes if n.kind != KIND_SAT]
    if any(n.kind != "iot" for n in sensors):
        return None
    if sorted(n.home_cell for n in sensors) != list(range(spec.graph.n_cells)):
        return None
    sr = bundle.policies.get("sr")
    if sr is None:
        return None
    _, mu_u = sr.tables(spec)
    order = sorted(range(len(sensors)), key=lambda i: sensors[i].home_cell)
    idx = [spec.node_index(sensors[i].id) for i in order]
    mu = np.array([mu_u[i] for i in idx])
    if mu.sum() <= 0:
        return None
    mu = mu / mu.sum()
    coeffs = analytics.iot_sat_coefficients(
        mu, [spec.nodes[i].packet_count for i in idx],
        [spec.nodes[i].success_prob for i in idx],
        spec.availability.lam_a, spec.availability.lam_u,
        sat.packet_count, sat.success_prob)
    return analytics.optimal_alpha(coeffs)


def cmd_sweep(args) -> int:
    bundle, plan = _load_bundle(args)
    horizon, burn, seeds = _sim_params(args, plan, bundle)
    axis1 = args.axis1 or (plan.axis1 if plan else None)
    axis2 = args.axis2 or (plan.axis2 if plan else None)
    if not axis1 or not axis2:
        raise ConfigurationError("sweep needs --axis1 and --axis2")
    mode = args.mode or (plan.mode if plan else "analytic")
    strict = args.strict_prop or bool(plan and plan.strict_prop)
    formula_mode = analytics.MODE_STRICT if strict else analytics.MODE_EXACT
    sr = bundle.policy("sr")
    if not isinstance(sr, RandomizedPolicy):
        raise ConfigurationError("sweeps drive the sr policy")
    os.makedirs(args.out, exist_ok=True)
    grid = boundary.decision_boundary(
        bundle.spec, sr, boundary.parse_axis(axis1),
        boundary.parse_axis(axis2), mode=mode, formula_mode=formula_mode,
        horizon=horizon, burn_in=burn, seeds=seeds,
        workers=args.workers or _default_workers())
    fileio.write_boundary_csv(os.path.join(args.out, "boundary.csv"),
                              grid.rows())
    fileio.write_contour_csv(os.path.join(args.out, "contour.csv"),
                             boundary.zero_contour(grid))
    fileio.emit_plot_script(args.out, "boundary")
    print(f"wrote {len(grid.axis1_values) * len(grid.axis2_values)} grid "
          f"points to {args.out}")
    return 0


def cmd_trace_stats(args) -> int:
    try:
        with open(args.path) as fh:
            trace = traceio.parse_trace(fh, args.format,
                                        resolution_s=args.resolution)
    except OSError as exc:
        raise AoisimError(f"cannot read {args.path}: {exc}") from exc
    stats = traceio.trace_stats(trace)
    for key, val in stats.items():
        print(f"{key}: {val if val is not None else 'absent'}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        keys = list(stats)
        fileio.write_csv(os.path.join(args.out, "trace_stats.csv"), keys,
                         [[stats[k] for k in keys]])
    return 0


def cmd_compare(args) -> int:
    """Cross-file checks. The universal lower bound is evaluated per run
    from that run's own empirical update rates when --config is given
    (theorem-exact), else the analytic summary's reference bound is
    reused for every row."""
    with open(args.runs) as fh:
        runs = list(csv.DictReader(fh))
    with open(args.analytic) as fh:
        summary = next(iter(csv.DictReader(fh)))
    spec = coverage = None
    if args.config:
        bundle = fileio.load_scenario(fileio.resolve_config(args.config))
        spec = bundle.spec
        coverage = long_run_coverage(spec, seed=COVERAGE_SEED)
    ref_bound = float(summary["lower_bound"])
    violations = []
    rel_errors = []
    rows = []
    for r in runs:
        ewsaoi = float(r["ewsaoi"])
        if spec is not None:
            nu_map = json.loads(r["nu"])
            nu = np.array([nu_map.get(n.id, 0.0) for n in spec.nodes])
            bound = analytics.lower_bound(spec, coverage, nu).value
        else:
            bound = ref_bound
        ok = bound <= ewsaoi + 1e-9
        if not ok:
            violations.append((r["policy_id"], r["seed"]))
        row = [r["policy_id"], r["seed"], ewsaoi, bound, int(ok)]
        if r["policy_id"] == "sr" and summary.get("ewspaoi_with"):
            ana = float(summary["ewspaoi_with"])
            rel = abs(float(r["ewspaoi"]) - ana) / ana
            rel_errors.append(rel)
            row.append(rel)
        else:
            row.append(None)
        rows.append(row)
    os.makedirs(args.out, exist_ok=True)
    fileio.write_csv(os.path.join(args.out, "compare.csv"),
                     ["policy_id", "seed", "ewsaoi", "lower_bound",
                      "bound_ok", "sr_peak_rel_err"], rows)
    if rel_errors:
        print(f"sr peak-age relative error: mean "
              f"{float(np.mean(rel_errors)):.4f}, max "
              f"{float(np.max(rel_errors)):.4f}")
    if violations:
        print(f"lower-bound violations: {violations}", file=sys.stderr)
        return 4
    print(f"lower bound respected in all {len(runs)} runs")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="aoisim",
        description="age-of-information simulator and analytics")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="scenario TOML (path or packaged "
                                        "recipe name)")
        p.add_argument("--plan", help="experiment plan TOML")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seeds", help="seed count N (0..N-1) or comma list")
        p.add_argument("--horizon", type=int)
        p.add_argument("--burn-in", type=int, dest="burn_in")
        p.add_argument("--workers", type=int,
                       help=f"parallel workers (default ${ENV_WORKERS} or 1)")

    p = sub.add_parser("simulate", help="run (policy, seed) grids")
    common(p)
    p.add_argument("--policies", help="comma list, e.g. sr,mw,greedy,mwl1")
    p.add_argument("--dump-cycles", action="store_true")
    p.add_argument("--timings", action="store_true",
                   help="record wall times (makes outputs non-reproducible)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="closed-form reports")
    common(p)
    p.add_argument("--strict-prop", action="store_true",
                   help="use the simplified display variants of the "
                        "satellite formulas")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="two-axis satellite benefit grids")
    common(p)
    p.add_argument("--axis1", help="name=lo:hi:count over p_sat|l_sat|lambda_a")
    p.add_argument("--axis2", help="name=lo:hi:count")
    p.add_argument("--mode", choices=["analytic", "simulated"])
    p.add_argument("--strict-prop", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trace-stats", help="visibility trace statistics")
    p.add_argument("--path", required=True)
    p.add_argument("--format", default="bitline",
                   choices=["bitline", "interval-list"])
    p.add_argument("--resolution", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_trace_stats)

    p = sub.add_parser("compare", help="check analytics against run CSVs")
    p.add_argument("--runs", required=True, help="runs.csv from simulate")
    p.add_argument("--analytic", required=True,
                   help="analytic_summary.csv from analyze")
    p.add_argument("--config", help="scenario TOML for per-run bounds")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AoisimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyError as exc:
        print(f"error: unknown identifier {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
