"""Config files (TOML), CSV emission, and plot-script generation.

The scenario format is strict: unknown keys fail loudly so typos never
silently change an experiment. All CSV floats are written with repr()
(shortest round-trip), keeping outputs byte-stable across runs.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .errors import ConfigurationError, InputOutputError
from .netmodel import (AvailabilityProcess, CellGraph, NetworkSpec, NodeSpec,
                       RANDOM_WALK, build_grid)
from .policies import (GreedyPolicy, MaxWeightPolicy, MWL1Policy,
                       RandomizedPolicy)
from .traceio import parse_trace, trace_to_availability


def _check_keys(table: dict, allowed, where: str):
    unknown = set(table) - set(allowed)
    if unknown:
        raise ConfigurationError(
            f"{where}: unknown key(s) {sorted(unknown)} "
            f"(allowed: {sorted(allowed)})")


@dataclass
class ScenarioBundle:
    spec: NetworkSpec
    policies: dict
    sim_defaults: dict = field(default_factory=dict)
    path: str = ""

    def policy(self, name: str):
        if name not in self.policies:
            raise ConfigurationError(
                f"policy {name!r} not configured (have "
                f"{sorted(self.policies)})")
        return self.policies[name]


def packaged_recipe(name: str) -> str:
    """Path of a recipe shipped inside the package."""
    ref = resources.files("aoisim").joinpath("recipes", name)
    if not ref.is_file():
        raise InputOutputError(f"no packaged recipe named {name!r}")
    return str(ref)


def resolve_config(path_or_name: str, relative_to: str = None) -> str:
    """A config argument may be a filesystem path or a packaged recipe
    name; returns a readable path."""
    cands = [path_or_name]
    if relative_to:
        cands.append(os.path.join(relative_to, path_or_name))
    for cand in cands:
        if os.path.isfile(cand):
            return cand
    try:
        return packaged_recipe(path_or_name)
    except InputOutputError:
        raise InputOutputError(
            f"config {path_or_name!r} not found (tried {cands} and the "
            "packaged recipes)") from None


def load_scenario(path: str) -> ScenarioBundle:
    """Load a scenario TOML file into a NetworkSpec plus policy table."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise InputOutputError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    _check_keys(raw, {"id", "grid", "node", "satellite", "policy", "sim"},
                path)

    grid_tbl = raw.get("grid")
    if grid_tbl is None:
        raise ConfigurationError(f"{path}: missing [grid] section")
    _check_keys(grid_tbl, {"rows", "cols", "adjacency", "weights"},
                f"{path} [grid]")
    graph = build_grid(int(grid_tbl.get("rows", 1)),
                       int(grid_tbl.get("cols", 1)),
                       grid_tbl.get("adjacency", "4-connected"),
                       weights=grid_tbl.get("weights"))

    nodes = []
    for i, tbl in enumerate(raw.get("node", [])):
        where = f"{path} [[node]] #{i}"
        _check_keys(tbl, {"id", "kind", "l", "p", "home_cell", "radius",
                          "mobility", "route", "start_cell"}, where)
        for req in ("id", "kind", "l", "p"):
            if req not in tbl:
                raise ConfigurationError(f"{where}: missing key {req!r}")
        kind = tbl["kind"]
        mobility = RANDOM_WALK
        if "route" in tbl and "mobility" in tbl:
            raise ConfigurationError(f"{where}: give route or mobility, not both")
        if "route" in tbl:
            mobility = tuple(int(c) for c in tbl["route"])
        elif tbl.get("mobility", RANDOM_WALK) != RANDOM_WALK:
            raise ConfigurationError(
                f"{where}: mobility must be 'random-walk' or use route = [...]")
        nodes.append(NodeSpec(
            id=str(tbl["id"]), kind=kind, packet_count=int(tbl["l"]),
            success_prob=float(tbl["p"]),
            home_cell=int(tbl.get("home_cell", -1)),
            radius=int(tbl.get("radius", -1)),
            mobility=mobility,
            start_cell=int(tbl.get("start_cell", -1))))
    if not nodes:
        raise ConfigurationError(f"{path}: no [[node]] entries")

    availability = None
    sat_tbl = raw.get("satellite")
    if sat_tbl is not None:
        availability = _load_availability(sat_tbl, path)

    spec = NetworkSpec(graph=graph, nodes=tuple(nodes),
                       availability=availability,
                       scenario_id=str(raw.get("id", os.path.basename(path))))

    policies = {}
    for name, tbl in raw.get("policy", {}).items():
        policies[name] = _load_policy(name, tbl, path)

    sim_tbl = raw.get("sim", {})
    _check_keys(sim_tbl, {"horizon", "burn_in"}, f"{path} [sim]")
    return ScenarioBundle(spec=spec, policies=policies,
                          sim_defaults=dict(sim_tbl), path=path)


def _load_availability(tbl: dict, path: str) -> AvailabilityProcess:
    where = f"{path} [satellite]"
    model = tbl.get("model")
    if model == "geometric":
        _check_keys(tbl, {"model", "lambda_a", "lambda_u", "init"}, where)
        return AvailabilityProcess(
            "geometric", lam_a=float(tbl["lambda_a"]),
            lam_u=float(tbl["lambda_u"]),
            init=tbl.get("init", "stationary"))
    if model == "trace":
        _check_keys(tbl, {"model", "path", "format", "resolution_s",
                          "slot_seconds", "wrap"}, where)
        trace_path = tbl.get("path")
        if trace_path is None:
            raise ConfigurationError(f"{where}: trace model needs path")
        if not os.path.isabs(trace_path):
            trace_path = os.path.join(os.path.dirname(path), trace_path)
        try:
            with open(trace_path, "r") as fh:
                trace = parse_trace(fh, tbl.get("format", "bitline"),
                                    float(tbl.get("resolution_s", 1.0)))
        except OSError as exc:
            raise InputOutputError(f"cannot read trace: {exc}") from exc
        return trace_to_availability(
            trace, slot_seconds=tbl.get("slot_seconds"),
            wrap=tbl.get("wrap", "repeat"))
    raise ConfigurationError(f"{where}: model must be geometric or trace")


def _load_policy(name: str, tbl: dict, path: str):
    where = f"{path} [policy.{name}]"
    if name == "sr":
        _check_keys(tbl, {"mu", "u_period", "sat_unavail_behavior"}, where)
        if "mu" not in tbl:
            raise ConfigurationError(f"{where}: missing mu table")
        return RandomizedPolicy(
            mu={k: float(v) for k, v in tbl["mu"].items()},
            u_period_mu=({k: float(v) for k, v in tbl["u_period"].items()}
                         if "u_period" in tbl else None),
            sat_unavail_behavior=tbl.get("sat_unavail_behavior",
                                         "renormalize"))
    if name == "mw":
        _check_keys(tbl, {"beta", "targets", "allow_idle"}, where)
        targets = tbl.get("targets", "auto")
        if isinstance(targets, dict):
            targets = {k: float(v) for k, v in targets.items()}
        elif targets != "auto":
            raise ConfigurationError(f"{where}: targets must be 'auto' or a table")
        return MaxWeightPolicy(beta=float(tbl.get("beta", 1.0)),
                               targets=targets,
                               allow_idle=bool(tbl.get("allow_idle", False)))
    if name == "greedy":
        _check_keys(tbl, set(), where)
        return GreedyPolicy()
    if name == "mwl1":
        _check_keys(tbl, set(), where)
        return MWL1Policy()
    raise ConfigurationError(f"{where}: unknown policy kind {name!r}")


# ---------------------------------------------------------------------------
# experiment plans

@dataclass
class ExperimentPlan:
    scenario: str
    kind: str = "simulate"
    policies: tuple = ("sr",)
    seeds: tuple = (0,)
    horizon: int = 1_000_000
    burn_in: int = 0
    mode: str = "analytic"
    axis1: str = ""
    axis2: str = ""
    out: str = "out"
    strict_prop: bool = False
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.seeds:
            raise ConfigurationError("plan needs at least one seed")
        if self.horizon < 1:
            raise ConfigurationError("plan horizon must be >= 1")


def load_plan(path: str) -> ExperimentPlan:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise InputOutputError(f"cannot read {path}: {exc}") from exc
    _check_keys(raw, {"kind", "scenario", "policies", "seeds", "horizon",
                      "burn_in", "mode", "axis1", "axis2", "out",
                      "strict_prop", "overrides"}, path)
    if "scenario" not in raw:
        raise ConfigurationError(f"{path}: plan needs a scenario")
    seeds = raw.get("seeds", 1)
    if isinstance(seeds, int):
        seeds = tuple(range(seeds))
    else:
        seeds = tuple(int(s) for s in seeds)
    scenario = resolve_config(raw["scenario"],
                              relative_to=os.path.dirname(path))
    return ExperimentPlan(
        scenario=scenario, kind=raw.get("kind", "simulate"),
        policies=tuple(raw.get("policies", ("sr",))), seeds=seeds,
        horizon=int(raw.get("horizon", 1_000_000)),
        burn_in=int(raw.get("burn_in", 0)), mode=raw.get("mode", "analytic"),
        axis1=raw.get("axis1", ""), axis2=raw.get("axis2", ""),
        out=raw.get("out", "out"), strict_prop=bool(raw.get("strict_prop",
                                                            False)),
        overrides=dict(raw.get("overrides", {})))


# ---------------------------------------------------------------------------
# CSV emission

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if x == int(x) and abs(x) < 1e15:
            return str(int(x)) + ".0"
        return repr(x)
    return str(x)


def write_csv(path: str, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise InputOutputError(f"cannot write {path}: {exc}") from exc


RUN_HEADER = ["scenario_id", "policy_id", "seed", "horizon", "ewsaoi",
              "ewspaoi", "nu", "failed_sat_updates", "wall_time_ms"]


def run_row(metrics) -> list:
    nu = json.dumps({k: round(v, 12) for k, v in sorted(metrics.nu.items())},
                    separators=(",", ":"))
    return [metrics.scenario_id, metrics.policy_id, metrics.seed,
            metrics.horizon, metrics.ewsaoi, metrics.ewspaoi, nu,
            metrics.failed_sat_updates, metrics.wall_time_ms]


def write_runs_csv(path: str, metrics_list):
    write_csv(path, RUN_HEADER, [run_row(m) for m in metrics_list])


AGG_HEADER = ["scenario_id", "policy_id", "n_runs", "ewsaoi_mean",
              "ewsaoi_ci95", "ewspaoi_mean", "ewspaoi_ci95"]


def aggregate_rows(metrics_list):
    """One row per policy: mean and normal-approximation 95% CI."""
    by_policy = {}
    for m in metrics_list:
        by_policy.setdefault((m.scenario_id, m.policy_id), []).append(m)
    rows = []
    for (sid, pid), ms in sorted(by_policy.items()):
        ews = np.array([m.ewsaoi for m in ms], dtype=float)
        ewp = np.array([m.ewspaoi for m in ms], dtype=float)
        n = len(ms)
        row = [sid, pid, n, ews.mean()]
        row.append(1.96 * ews.std(ddof=1) / math.sqrt(n) if n > 1 else None)
        row.append(ewp.mean())
        row.append(1.96 * ewp.std(ddof=1) / math.sqrt(n) if n > 1 else None)
        rows.append(row)
    return rows


def write_aggregate_csv(path: str, metrics_list):
    write_csv(path, AGG_HEADER, aggregate_rows(metrics_list))


def write_cycles_csv(path: str, cycles):
    rows = [[int(c), i, int(w), int(s), int(pk)]
            for i, (c, w, s, pk) in enumerate(
                zip(cycles.cell, cycles.wait, cycles.service, cycles.peak))]
    write_csv(path, ["cell", "i", "W", "S", "peak"], rows)


def write_boundary_csv(path: str, grid_rows):
    write_csv(path, ["axis1", "axis2", "ewspaoi_with", "ewspaoi_without",
                     "diff", "mode"], grid_rows)


def write_contour_csv(path: str, contour_rows):
    write_csv(path, ["axis1", "crossing_axis2", "direction"], contour_rows)


def write_analytic_cells_csv(path: str, report):
    rows = []
    for m in range(len(report.rate)):
        rows.append([m, report.rate[m], report.e_service[m],
                     report.e_wait[m], report.peak_contrib[m]])
    write_csv(path, ["cell", "B_or_C", "E_S", "E_W", "peak_contrib"], rows)


# ---------------------------------------------------------------------------
# plot scripts

_BOUNDARY_PLOT = """\
#!/usr/bin/env python3
# Renders the satellite-benefit grid written next to this script.
import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = Path(__file__).resolve().parent
rows = list(csv.DictReader(open(here / "boundary.csv")))
a1 = sorted({float(r["axis1"]) for r in rows})
a2 = sorted({float(r["axis2"]) for r in rows})
diff = np.full((len(a2), len(a1)), np.nan)
for r in rows:
    diff[a2.index(float(r["axis2"])), a1.index(float(r["axis1"]))] = \\
        float(r["diff"])
fig, ax = plt.subplots(figsize=(5.2, 4.2))
lim = np.nanmax(np.abs(diff))
pc = ax.pcolormesh(a1, a2, diff, cmap="coolwarm_r", vmin=-lim, vmax=lim,
                   shading="nearest")
fig.colorbar(pc, ax=ax, label="peak-age difference (with - without)")
try:
    cont = list(csv.DictReader(open(here / "contour.csv")))
    xs = [float(r["axis1"]) for r in cont]
    ys = [float(r["crossing_axis2"]) for r in cont]
    ax.plot(xs, ys, "k-", lw=2, label="zero boundary")
    ax.legend(loc="best")
except FileNotFoundError:
    pass
ax.set_xlabel("axis1")
ax.set_ylabel("axis2")
ax.set_title("satellite benefit region (red = satellite helps)")
fig.tight_layout()
fig.savefig(here / "boundary.png", dpi=150)
print("wrote", here / "boundary.png")
"""

_POLICY_PLOT = """\
#!/usr/bin/env python3
# Renders the per-policy aggregate comparison written next to this script.
import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
rows = list(csv.DictReader(open(here / "aggregate.csv")))
fig, ax = plt.subplots(figsize=(5.2, 4.0))
labels = [r["policy_id"] for r in rows]
means = [float(r["ewsaoi_mean"]) for r in rows]
errs = [float(r["ewsaoi_ci95"]) if r["ewsaoi_ci95"] else 0.0 for r in rows]
ax.bar(labels, means, yerr=errs, capsize=4)
ax.set_ylabel("average weighted age")
ax.set_title("policy comparison (95% CI)")
fig.tight_layout()
fig.savefig(here / "policies.png", dpi=150)
print("wrote", here / "policies.png")
"""


def emit_plot_script(out_dir: str, kind: str) -> str:
    script = {"boundary": _BOUNDARY_PLOT, "policies": _POLICY_PLOT}.get(kind)
    if script is None:
        raise ConfigurationError(f"unknown plot kind {kind!r}")
    path = os.path.join(out_dir, f"plot_{kind}.py")
    with open(path, "w") as fh:
        fh.write(script)
    return path
