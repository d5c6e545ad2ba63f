"""Run orchestration: array compilation, RNG streams, blocks, metrics.

Ages are kept as affine offsets: A_m(s) = s + b_m, where b_m only
changes when a completed update resets cell m. Both kernels maintain
the integer offsets and the per-cell integral of b over the measurement
window, so every reported metric is bit-identical across kernels.

One master seed derives four fixed per-subsystem streams (availability,
policy sampling, packet outcomes, mobility). Each stream fills a
slot-indexed array per block; kernels read entries by slot index, so a
value is tied to its slot no matter which implementation runs, and
paired configurations sharing a master seed see the same availability
sample path.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from ..netmodel import (KIND_IOT, KIND_SAT, KIND_UAV, RANDOM_WALK,
                        NetworkSpec, PathSampler, neighborhood)
from ..policies import (GreedyPolicy, MaxWeightPolicy, MWL1Policy,
                        RandomizedPolicy, targets_for)

POL_SR, POL_MW, POL_GREEDY, POL_MWL1 = 0, 1, 2, 3
KIND_CODE = {KIND_IOT: 0, KIND_UAV: 1, KIND_SAT: 2}

# regs slots
R_HOLDER, R_PKTS, R_INITSLOT = 0, 1, 2
# ctr slots
C_FAILED_SAT, C_INIT_TOTAL, C_INIT_AVAIL, C_EPOCHS, C_REC_N = 0, 1, 2, 3, 4

BLOCK_SLOTS = 1 << 20
BLOCK_SLOTS_RECORDING = 1 << 16

# fixed seed for auto-target / coverage estimation so policy parameters
# do not depend on the per-run seed
COVERAGE_SEED = 202_407


class KernelState:
    """Flat array bundle shared by the compiled and pure-Python kernels."""

    def __init__(self, spec: NetworkSpec, policy, horizon: int, burn: int,
                 mw_targets=None, record_cycles=False):
        graph = spec.graph
        nodes = spec.nodes
        self.n_cells = graph.n_cells
        self.n_nodes = len(nodes)
        self.burn = burn
        self.alpha = np.ascontiguousarray(graph.weights, dtype=np.float64)
        self.sqrt_alpha = np.sqrt(self.alpha)
        self.alpha_total = float(self.alpha.sum())

        self.kind = np.array([KIND_CODE[n.kind] for n in nodes], dtype=np.int64)
        self.l = np.array([n.packet_count for n in nodes], dtype=np.int64)
        self.p = np.array([n.success_prob for n in nodes], dtype=np.float64)
        self.sqrt_p = np.sqrt(self.p)
        self.home = np.array([n.home_cell for n in nodes], dtype=np.int64)
        sats = np.flatnonzero(self.kind == 2)
        self.sat_idx = int(sats[0]) if sats.size else -1

        uavs = [i for i, n in enumerate(nodes) if n.kind == KIND_UAV]
        self.n_uavs = len(uavs)
        self.uav_slot = np.full(self.n_nodes, -1, dtype=np.int64)
        for s, i in enumerate(uavs):
            self.uav_slot[i] = s
        nc = self.n_cells
        self.cov = np.zeros((max(1, self.n_uavs * nc), nc), dtype=np.uint8)
        route_indptr = [0]
        route_cells = []
        pos0, rpos0 = [], []
        for s, i in enumerate(uavs):
            node = nodes[i]
            for pos in range(nc):
                for cell in neighborhood(graph, pos, node.radius):
                    self.cov[s * nc + pos, cell] = 1
            if node.mobility == RANDOM_WALK:
                route_indptr.append(route_indptr[-1])
                pos0.append(spec.uav_start(node))
                rpos0.append(0)
            else:
                route = list(node.mobility)
                route_cells.extend(route)
                route_indptr.append(route_indptr[-1] + len(route))
                start = spec.uav_start(node)
                ri = route.index(start) if start in route else 0
                pos0.append(route[ri])
                rpos0.append(ri)
        self.route_indptr = np.array(route_indptr, dtype=np.int64)
        self.route_cells = np.array(route_cells, dtype=np.int64)
        self.uav_pos = np.array(pos0 or [0], dtype=np.int64)
        self.uav_route_pos = np.array(rpos0 or [0], dtype=np.int64)

        indptr = [0]
        idx = []
        for m in range(nc):
            idx.extend(graph.neighbors[m])
            indptr.append(len(idx))
        self.nbr_indptr = np.array(indptr, dtype=np.int64)
        self.nbr_idx = np.array(idx or [0], dtype=np.int64)

        # policy tables
        self.mu_a = np.zeros(self.n_nodes)
        self.mu_u = np.zeros(self.n_nodes)
        self.nu = np.zeros(self.n_nodes)
        self.beta = 1.0
        self.allow_idle = 0
        if isinstance(policy, RandomizedPolicy):
            self.pol_kind = POL_SR
            self.mu_a, self.mu_u = policy.tables(spec)
        elif isinstance(policy, MaxWeightPolicy):
            self.pol_kind = POL_MW
            if mw_targets is None:
                raise ConfigurationError("max-weight needs resolved targets")
            self.nu = np.ascontiguousarray(mw_targets, dtype=np.float64)
            self.beta = float(policy.beta)
            self.allow_idle = int(policy.allow_idle)
        elif isinstance(policy, GreedyPolicy):
            self.pol_kind = POL_GREEDY
        elif isinstance(policy, MWL1Policy):
            self.pol_kind = POL_MWL1
        else:
            raise ConfigurationError(f"unknown policy type {type(policy)!r}")
        self.mu_a = np.ascontiguousarray(self.mu_a, dtype=np.float64)
        self.mu_u = np.ascontiguousarray(self.mu_u, dtype=np.float64)

        # mutable state
        self.b = np.ones(nc, dtype=np.int64)
        self.seg_start = np.full(nc, burn + 1, dtype=np.int64)
        self.cum_b = np.zeros(nc, dtype=np.int64)
        self.last_complete = np.full(nc, -1, dtype=np.int64)
        self.snap = np.zeros(nc, dtype=np.uint8)
        self.debts = np.zeros(self.n_nodes, dtype=np.float64)
        self.regs = np.zeros(8, dtype=np.int64)
        self.regs[R_HOLDER] = -1

        # accumulators
        self.peak_sum = np.zeros(nc, dtype=np.float64)
        self.peak_cnt = np.zeros(nc, dtype=np.int64)
        self.w_sum = np.zeros(nc, dtype=np.float64)
        self.s_sum = np.zeros(nc, dtype=np.float64)
        self.d_cnt = np.zeros(self.n_nodes, dtype=np.int64)
        self.y_cnt = np.zeros(self.n_nodes, dtype=np.int64)
        self.ctr = np.zeros(8, dtype=np.int64)

        self.rec_on = int(record_cycles)
        cap = 1
        if record_cycles:
            cap = BLOCK_SLOTS_RECORDING * nc
        self.rec_cell = np.zeros(cap, dtype=np.int64)
        self.rec_w = np.zeros(cap, dtype=np.int64)
        self.rec_s = np.zeros(cap, dtype=np.int64)
        self.rec_peak = np.zeros(cap, dtype=np.int64)


@dataclass
class CycleLog:
    """Per-cycle records: covered cell, waiting and service slots, and
    the age just before the reset."""

    cell: np.ndarray
    wait: np.ndarray
    service: np.ndarray
    peak: np.ndarray

    def for_cell(self, m: int):
        sel = self.cell == m
        return self.wait[sel], self.service[sel], self.peak[sel]


@dataclass
class RunMetrics:
    scenario_id: str
    policy_id: str
    seed: int
    horizon: int
    burn_in: int
    ewsaoi: float
    ewspaoi: float
    per_cell_age_mean: np.ndarray
    per_cell_peak_mean: np.ndarray
    per_cell_peak_count: np.ndarray
    nu: dict
    completed: dict
    initiated: dict
    failed_sat_updates: int
    final_debts: dict
    epochs: int
    initiations: int
    initiations_available: int
    cells_without_cycles: list
    truncated: bool = False
    wall_time_ms: float = None
    cycles: CycleLog = None


def streams(seed: int):
    """Fixed-order subsystem generators derived from one master seed."""
    children = np.random.SeedSequence(seed).spawn(4)
    names = ("availability", "policy", "packets", "mobility")
    return {name: np.random.default_rng(c) for name, c in zip(names, children)}


def run(spec: NetworkSpec, policy, horizon: int, seed: int, burn_in: int = 0,
        record_cycles: bool = False, kernel=None, mw_targets=None,
        coverage=None, timings: bool = False) -> RunMetrics:
    """Simulate one (scenario, policy, seed) tuple for ``horizon`` slots.

    Deterministic given its arguments; ``kernel`` picks the block driver
    ("compiled" or "python", default: compiled when built).
    """
    from . import get_kernel  # late import to avoid a cycle

    if horizon < 1:
        raise ConfigurationError("horizon must be >= 1")
    if not (0 <= burn_in < horizon):
        raise ConfigurationError("burn-in must be in [0, horizon)")
    run_block = get_kernel(kernel)
    t_start = time.perf_counter()

    truncated = False
    proc = spec.availability
    if proc is not None and proc.model == "trace" and proc.wrap == "truncate":
        if proc.trace.size < horizon:
            horizon = int(proc.trace.size)
            truncated = True
            if burn_in >= horizon:
                raise ConfigurationError(
                    "burn-in exceeds the truncated trace horizon")

    if isinstance(policy, MaxWeightPolicy) and mw_targets is None:
        if coverage is None:
            from ..netmodel import long_run_coverage
            coverage = long_run_coverage(spec, seed=COVERAGE_SEED)
        mw_targets = targets_for(spec, policy, coverage)

    ks = KernelState(spec, policy, horizon, burn_in, mw_targets=mw_targets,
                     record_cycles=record_cycles)
    rng = streams(seed)
    sampler = PathSampler(proc, rng["availability"]) if proc is not None else None

    block = BLOCK_SLOTS_RECORDING if record_cycles else BLOCK_SLOTS
    rec_chunks = []
    t0 = 0
    while t0 < horizon:
        n = min(block, horizon - t0)
        if sampler is not None:
            avail = sampler.next_block(n)
        else:
            avail = np.ones(n, dtype=np.uint8)
        u_pol = rng["policy"].random(n)
        u_pkt = rng["packets"].random(n)
        u_mob = rng["mobility"].random(n)
        run_block(ks, avail, u_pol, u_pkt, u_mob, t0, n)
        if record_cycles and ks.ctr[C_REC_N]:
            nr = int(ks.ctr[C_REC_N])
            rec_chunks.append((ks.rec_cell[:nr].copy(), ks.rec_w[:nr].copy(),
                               ks.rec_s[:nr].copy(), ks.rec_peak[:nr].copy()))
            ks.ctr[C_REC_N] = 0
        t0 += n

    cycles = None
    if record_cycles:
        if rec_chunks:
            cycles = CycleLog(*[np.concatenate(parts)
                                for parts in zip(*rec_chunks)])
        else:
            empty = np.zeros(0, dtype=np.int64)
            cycles = CycleLog(empty, empty.copy(), empty.copy(), empty.copy())

    wall_ms = (time.perf_counter() - t_start) * 1000.0 if timings else None
    return finalize(ks, spec, getattr(policy, "id", "policy"), seed, horizon,
                    burn_in, cycles=cycles, truncated=truncated,
                    wall_time_ms=wall_ms)


def finalize(ks: KernelState, spec: NetworkSpec, policy_id: str, seed: int,
             horizon: int, burn_in: int, cycles=None, truncated=False,
             wall_time_ms=None) -> RunMetrics:
    """Close the measurement window and assemble the run metrics."""
    nc = ks.n_cells
    window = horizon - burn_in
    # flush the final age-offset segment up to and including slot `horizon`
    s_end = horizon + 1
    for m in range(nc):
        if s_end > ks.seg_start[m]:
            ks.cum_b[m] += ks.b[m] * (s_end - ks.seg_start[m])
            ks.seg_start[m] = s_end
    s1 = (horizon * (horizon + 1) - burn_in * (burn_in + 1)) // 2
    age_mean = (s1 + ks.cum_b.astype(np.float64)) / window
    ewsaoi = float(np.dot(ks.alpha, age_mean) / nc)

    peak_mean = np.full(nc, np.nan)
    missing = []
    for m in range(nc):
        if ks.peak_cnt[m] > 0:
            peak_mean[m] = ks.peak_sum[m] / ks.peak_cnt[m]
        else:
            missing.append(m)
    ewspaoi = float(np.dot(ks.alpha, peak_mean) / nc) if not missing else float("nan")

    ids = [n.id for n in spec.nodes]
    nu = {i: ks.d_cnt[k] / window for k, i in enumerate(ids)}
    return RunMetrics(
        scenario_id=spec.scenario_id, policy_id=policy_id, seed=seed,
        horizon=horizon, burn_in=burn_in, ewsaoi=ewsaoi, ewspaoi=ewspaoi,
        per_cell_age_mean=age_mean, per_cell_peak_mean=peak_mean,
        per_cell_peak_count=ks.peak_cnt.copy(), nu=nu,
        completed={i: int(ks.d_cnt[k]) for k, i in enumerate(ids)},
        initiated={i: int(ks.y_cnt[k]) for k, i in enumerate(ids)},
        failed_sat_updates=int(ks.ctr[C_FAILED_SAT]),
        final_debts={i: float(ks.debts[k]) for k, i in enumerate(ids)},
        epochs=int(ks.ctr[C_EPOCHS]),
        initiations=int(ks.ctr[C_INIT_TOTAL]),
        initiations_available=int(ks.ctr[C_INIT_AVAIL]),
        cells_without_cycles=missing, truncated=truncated,
        wall_time_ms=wall_time_ms, cycles=cycles)
