"""Satellite-benefit decision boundaries over parameter grids.

For each grid point the weighted peak age with satellite support is
compared against the terrestrial-only policy (the satellite share
folded back onto the ground nodes). Negative differences mean the
satellite helps. The zero crossing is located per grid column by linear
interpolation.

Analytic mode evaluates the closed forms (geometric availability only);
simulated mode runs paired simulations that share one master seed per
pair, so both sides of a difference see the same availability path and
per-slot packet draws.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analytics import MODE_EXACT, ewspaoi_no_sat, ewspaoi_with_sat
from .errors import ConfigurationError
from .netmodel import KIND_SAT, NetworkSpec, long_run_coverage
from .policies import RandomizedPolicy
from .simcore import COVERAGE_SEED, run

AXIS_NAMES = ("p_sat", "l_sat", "lambda_a")


def parse_axis(text: str):
    """Parse "name=lo:hi:count" into (name, values)."""
    try:
        name, rng = text.split("=", 1)
        lo, hi, count = rng.split(":")
        name = name.strip()
        values = np.linspace(float(lo), float(hi), int(count))
    except ValueError:
        raise ConfigurationError(
            f"bad axis spec {text!r}; expected name=lo:hi:count") from None
    if name not in AXIS_NAMES:
        raise ConfigurationError(
            f"unknown sweep axis {name!r}; choose from {AXIS_NAMES}")
    if name == "l_sat":
        values = np.unique(np.round(values).astype(int))
    return name, values


def scenario_with(spec: NetworkSpec, **overrides) -> NetworkSpec:
    """Copy of ``spec`` with satellite parameters overridden."""
    nodes = []
    for n in spec.nodes:
        if n.kind == KIND_SAT:
            repl = {}
            if "p_sat" in overrides:
                repl["success_prob"] = float(overrides["p_sat"])
            if "l_sat" in overrides:
                repl["packet_count"] = int(overrides["l_sat"])
            n = dataclasses.replace(n, **repl) if repl else n
        nodes.append(n)
    availability = spec.availability
    if "lambda_a" in overrides:
        if availability is None or availability.model != "geometric":
            raise ConfigurationError(
                "lambda_a sweeps need the geometric availability model")
        availability = dataclasses.replace(
            availability, lam_a=float(overrides["lambda_a"]))
    return dataclasses.replace(spec, nodes=tuple(nodes),
                               availability=availability)


def terrestrial_policy(spec: NetworkSpec,
                       policy: RandomizedPolicy) -> RandomizedPolicy:
    """The matching no-satellite policy: the off-period table used for
    every slot (satellite share folded onto the ground nodes)."""
    _, mu_u = policy.tables(spec)
    mu = {n.id: float(mu_u[i]) for i, n in enumerate(spec.nodes)
          if mu_u[i] > 0}
    return RandomizedPolicy(mu=mu, id="sr-nosat")


@dataclass
class BoundaryGrid:
    axis1_name: str
    axis2_name: str
    axis1_values: np.ndarray
    axis2_values: np.ndarray
    with_sat: np.ndarray      # [len(axis1), len(axis2)]
    without_sat: np.ndarray
    mode: str

    @property
    def diff(self):
        return self.with_sat - self.without_sat

    def rows(self):
        out = []
        for i, v1 in enumerate(self.axis1_values):
            for j, v2 in enumerate(self.axis2_values):
                out.append([v1, v2, self.with_sat[i, j],
                            self.without_sat[i, j],
                            self.with_sat[i, j] - self.without_sat[i, j],
                            self.mode])
        return out


def _analytic_point(spec, policy, coverage, name1, v1, name2, v2,
                    formula_mode):
    sp = scenario_with(spec, **{name1: v1, name2: v2})
    avail = sp.availability
    mu = dict(policy.mu)
    _, mu_u = policy.tables(sp)
    u_period = {n.id: float(mu_u[i]) for i, n in enumerate(sp.nodes)}
    rep = ewspaoi_with_sat(sp, mu, coverage, avail.lam_a, avail.lam_u,
                           mode=formula_mode, u_period_mu=u_period)
    return rep.ewspaoi


def _simulated_pair(args):
    (spec, policy, nosat_policy, name1, v1, name2, v2, horizon, burn_in,
     seeds, need_without) = args
    sp = scenario_with(spec, **{name1: v1, name2: v2})
    with_vals = [run(sp, policy, horizon, seed, burn_in=burn_in).ewspaoi
                 for seed in seeds]
    without_vals = None
    if need_without:
        without_vals = [run(sp, nosat_policy, horizon, seed,
                            burn_in=burn_in).ewspaoi for seed in seeds]
    return float(np.mean(with_vals)), without_vals


def decision_boundary(spec: NetworkSpec, policy: RandomizedPolicy,
                      axis1, axis2, mode: str = "analytic",
                      formula_mode: str = MODE_EXACT, coverage=None,
                      horizon: int = 200_000, burn_in: int = 0,
                      seeds=(0,), workers: int = 1) -> BoundaryGrid:
    """Evaluate the with/without-satellite peak-age difference over a
    2-D parameter grid.

    ``axis1``/``axis2`` are (name, values) pairs over p_sat, l_sat, or
    lambda_a. The without-satellite value does not depend on satellite
    parameters, so it is evaluated once (per seed, in simulated mode).
    """
    name1, vals1 = axis1
    name2, vals2 = axis2
    if name1 == name2:
        raise ConfigurationError("sweep axes must differ")
    if spec.satellite is None:
        raise ConfigurationError("scenario has no satellite to sweep")
    if mode == "analytic":
        if spec.availability is None or spec.availability.model != "geometric":
            raise ConfigurationError(
                "analytic boundaries need the geometric availability model "
                "(trace-driven availability is simulation-only)")
        if coverage is None:
            coverage = long_run_coverage(spec, seed=COVERAGE_SEED)
        nosat = terrestrial_policy(spec, policy)
        base = ewspaoi_no_sat(spec, nosat.mu, coverage).ewspaoi
        with_grid = np.empty((len(vals1), len(vals2)))
        for i, v1 in enumerate(vals1):
            for j, v2 in enumerate(vals2):
                with_grid[i, j] = _analytic_point(
                    spec, policy, coverage, name1, v1, name2, v2,
                    formula_mode)
        without_grid = np.full_like(with_grid, base)
        return BoundaryGrid(name1, name2, np.asarray(vals1),
                            np.asarray(vals2), with_grid, without_grid,
                            "analytic")
    if mode != "simulated":
        raise ConfigurationError(f"unknown boundary mode {mode!r}")

    nosat = terrestrial_policy(spec, policy)
    tasks = []
    for i, v1 in enumerate(vals1):
        for j, v2 in enumerate(vals2):
            need_without = (i == 0 and j == 0)
            tasks.append((spec, policy, nosat, name1, v1, name2, v2,
                          horizon, burn_in, tuple(seeds), need_without))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulated_pair, tasks, chunksize=4))
    else:
        results = [_simulated_pair(t) for t in tasks]
    with_grid = np.empty((len(vals1), len(vals2)))
    base = None
    for idx, (wv, wo) in enumerate(results):
        i, j = divmod(idx, len(vals2))
        with_grid[i, j] = wv
        if wo is not None:
            base = float(np.mean(wo))
    without_grid = np.full_like(with_grid, base)
    return BoundaryGrid(name1, name2, np.asarray(vals1), np.asarray(vals2),
                        with_grid, without_grid, "simulated")


def zero_contour(grid: BoundaryGrid):
    """Zero crossings of the difference along axis2, per axis1 column.

    Returns rows (axis1_value, interpolated_axis2_crossing, direction)
    where direction is +1 for a negative-to-positive crossing.
    """
    rows = []
    diff = grid.diff
    v2 = np.asarray(grid.axis2_values, dtype=float)
    for i, v1 in enumerate(grid.axis1_values):
        d = diff[i]
        for j in range(len(v2) - 1):
            a, b = d[j], d[j + 1]
            if a == 0.0:
                rows.append([float(v1), float(v2[j]), int(np.sign(b - a))])
            elif a * b < 0:
                frac = a / (a - b)
                rows.append([float(v1), float(v2[j] + frac * (v2[j + 1] - v2[j])),
                             1 if b > a else -1])
        if d[-1] == 0.0:
            rows.append([float(v1), float(v2[-1]), 0])
    return rows


def _crossings_by_column(grid: BoundaryGrid) -> dict:
    by_col = {i: [] for i in range(len(grid.axis1_values))}
    vals1 = list(grid.axis1_values)
    for v1, cross, _ in zero_contour(grid):
        by_col[vals1.index(v1)].append(cross)
    return by_col


def contour_column_gaps(analytic: BoundaryGrid, simulated: BoundaryGrid):
    """Per-column distance (in axis2 grid steps) between the analytic and
    simulated zero crossings; used to check boundary agreement.

    Columns where neither grid crosses contribute 0. A crossing present
    on only one side counts as its distance to the nearest axis2 edge
    (the other side's boundary sits just outside the grid).
    """
    if not np.allclose(analytic.axis1_values, simulated.axis1_values) or \
            not np.allclose(analytic.axis2_values, simulated.axis2_values):
        raise ConfigurationError("grids must share their axes")
    v2 = np.asarray(analytic.axis2_values, dtype=float)
    step = float(v2[1] - v2[0]) if len(v2) > 1 else 1.0
    ca = _crossings_by_column(analytic)
    cs = _crossings_by_column(simulated)
    gaps = []
    for i in range(len(analytic.axis1_values)):
        a, s = ca[i], cs[i]
        if not a and not s:
            gaps.append(0.0)
            continue
        if a and s:
            worst = max(min(abs(x - y) for y in s) for x in a)
            worst = max(worst, max(min(abs(x - y) for y in a) for x in s))
        else:
            only = a or s
            worst = min(min(abs(x - v2[0]), abs(x - v2[-1])) for x in only)
        gaps.append(worst / step)
    return np.array(gaps)
