"""Deployment graph, node roster, coverage, and satellite availability.

Cells are integer ids 0..n_cells-1. A scenario has three node kinds:
fixed sensors tied to one home cell, patrol UAVs that cover every cell
within a hop radius of their current position, and a single satellite
that covers the whole grid whenever its availability process is on.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, TraceExhausted

KIND_IOT = "iot"
KIND_UAV = "uav"
KIND_SAT = "satellite"

RANDOM_WALK = "random-walk"


@dataclass(frozen=True)
class CellGraph:
    """Undirected cell adjacency graph with per-cell importance weights."""

    n_cells: int
    edges: tuple
    weights: np.ndarray
    rows: int = 0
    cols: int = 0

    def __post_init__(self):
        if self.n_cells < 1:
            raise ConfigurationError("graph needs at least one cell")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.n_cells,):
            raise ConfigurationError(
                f"expected {self.n_cells} weights, got {w.shape}")
        if not np.all(w > 0):
            raise ConfigurationError("all cell weights must be positive")
        object.__setattr__(self, "weights", w)
        for (i, j) in self.edges:
            if not (0 <= i < self.n_cells and 0 <= j < self.n_cells) or i == j:
                raise ConfigurationError(f"bad edge ({i}, {j})")
        nbrs = [[] for _ in range(self.n_cells)]
        seen = set()
        for (i, j) in self.edges:
            key = (min(i, j), max(i, j))
            if key in seen:
                continue
            seen.add(key)
            nbrs[i].append(j)
            nbrs[j].append(i)
        object.__setattr__(
            self, "_neighbors", tuple(tuple(sorted(v)) for v in nbrs))
        if self.n_cells > 1 and not self._connected():
            raise ConfigurationError("cell graph must be connected")

    def _connected(self):
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in self._neighbors[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.n_cells

    @property
    def neighbors(self):
        return self._neighbors

    def with_weights(self, weights) -> "CellGraph":
        return CellGraph(self.n_cells, self.edges, np.asarray(weights, float),
                         self.rows, self.cols)


def build_grid(rows: int, cols: int, adjacency: str = "4-connected",
               weights=None) -> CellGraph:
    """Build a rows x cols grid graph, cells numbered row-major.

    ``adjacency`` is "4-connected" (von Neumann) or "8-connected"
    (Moore / Chebyshev distance 1).
    """
    if rows < 1 or cols < 1:
        raise ConfigurationError("grid dimensions must be positive")
    if adjacency not in ("4-connected", "8-connected"):
        raise ConfigurationError(f"unknown adjacency {adjacency!r}")
    edges = []
    for r in range(rows):
        for c in range(cols):
            m = r * cols + c
            if c + 1 < cols:
                edges.append((m, m + 1))
            if r + 1 < rows:
                edges.append((m, m + cols))
            if adjacency == "8-connected":
                if r + 1 < rows and c + 1 < cols:
                    edges.append((m, m + cols + 1))
                if r + 1 < rows and c - 1 >= 0:
                    edges.append((m, m + cols - 1))
    if weights is None:
        weights = np.ones(rows * cols)
    return CellGraph(rows * cols, tuple(edges), np.asarray(weights, float),
                     rows, cols)


def neighborhood(graph: CellGraph, cell: int, r: int) -> set:
    """All cells within shortest-path distance r of ``cell`` (inclusive)."""
    if not (0 <= cell < graph.n_cells):
        raise KeyError(f"unknown cell id {cell}")
    if r < 0:
        raise ConfigurationError("radius must be non-negative")
    dist = {cell: 0}
    queue = deque([cell])
    while queue:
        u = queue.popleft()
        if dist[u] == r:
            continue
        for v in graph.neighbors[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return set(dist)


@dataclass(frozen=True)
class NodeSpec:
    """One transmitting node: packet count, reliability, and coverage rule."""

    id: str
    kind: str
    packet_count: int
    success_prob: float
    home_cell: int = -1          # sensors only
    radius: int = -1             # UAVs only
    mobility: object = RANDOM_WALK  # UAVs: RANDOM_WALK or tuple of cells
    start_cell: int = -1         # UAVs only; -1 = first route cell / cell 0

    def __post_init__(self):
        if self.kind not in (KIND_IOT, KIND_UAV, KIND_SAT):
            raise ConfigurationError(f"unknown node kind {self.kind!r}")
        if self.packet_count < 1:
            raise ConfigurationError(f"{self.id}: packet count must be >= 1")
        if not (0 < self.success_prob <= 1):
            raise ConfigurationError(
                f"{self.id}: success probability must be in (0, 1]")
        if self.kind == KIND_IOT and self.home_cell < 0:
            raise ConfigurationError(f"{self.id}: sensor needs a home cell")
        if self.kind == KIND_UAV:
            if self.radius < 0:
                raise ConfigurationError(f"{self.id}: UAV needs a radius")
            if self.mobility != RANDOM_WALK:
                route = tuple(self.mobility)
                if not route:
                    raise ConfigurationError(f"{self.id}: empty route")
                object.__setattr__(self, "mobility", route)


@dataclass
class AvailabilityProcess:
    """Satellite on/off process: two-state geometric chain or a fixed trace.

    Geometric model: holding times in the on state are geometric with
    mean 1/lam_a, off-state holding times geometric with mean 1/lam_u,
    so the long-run on fraction is lam_u / (lam_a + lam_u).
    """

    model: str = "geometric"
    lam_a: float = 0.0
    lam_u: float = 0.0
    trace: np.ndarray = None
    wrap: str = "repeat"
    init: str = "stationary"     # geometric only: stationary | on | off

    # mutable stepping state
    _state: int = field(default=-1, repr=False)
    _pos: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.model == "geometric":
            if not (0 < self.lam_a < 1) or not (0 < self.lam_u < 1):
                raise ConfigurationError(
                    "geometric availability needs lam_a, lam_u in (0, 1)")
            if self.init not in ("stationary", "on", "off"):
                raise ConfigurationError(f"unknown init {self.init!r}")
        elif self.model == "trace":
            t = np.asarray(self.trace, dtype=np.uint8)
            if t.size == 0:
                raise ConfigurationError("availability trace is empty")
            if self.wrap not in ("repeat", "truncate"):
                raise ConfigurationError(f"unknown wrap policy {self.wrap!r}")
            self.trace = t
        else:
            raise ConfigurationError(f"unknown availability model {self.model!r}")

    @property
    def stationary_on_fraction(self) -> float:
        if self.model == "geometric":
            return self.lam_u / (self.lam_a + self.lam_u)
        return float(np.mean(self.trace))

    def reset(self, rng) -> int:
        """(Re)initialise stepping state; returns the slot-0 state.

        For traces this rewinds without consuming: the next step() call
        returns the first sample again.
        """
        if self.model == "trace":
            self._pos = 0
            self._state = int(self.trace[0])
        elif self.init == "on":
            self._state = 1
        elif self.init == "off":
            self._state = 0
        else:
            self._state = int(rng.random() < self.stationary_on_fraction)
        return self._state

    def step(self, rng) -> int:
        """Advance one slot and return the new state.

        Geometric: flip from the current state with its transition
        probability. Trace: read the next sample (the first call after
        reset() returns the first sample).
        """
        if self._state < 0 and self.model == "geometric":
            raise ConfigurationError("call reset() before step()")
        if self.model == "geometric":
            lam = self.lam_a if self._state == 1 else self.lam_u
            if rng.random() < lam:
                self._state = 1 - self._state
            return self._state
        if self._pos >= self.trace.size:
            if self.wrap == "repeat":
                self._pos = 0
            else:
                raise TraceExhausted("availability trace exhausted")
        self._state = int(self.trace[self._pos])
        self._pos += 1
        return self._state

    def sample_path(self, n: int, rng) -> np.ndarray:
        """Availability for slots 0..n-1 as a uint8 array.

        Geometric paths are built from run lengths, which matches the
        per-slot flip chain in distribution. Truncating traces shorter
        than ``n`` raise TraceExhausted.
        """
        return PathSampler(self, rng).next_block(n)


class PathSampler:
    """Streams the availability path in blocks, carrying run state."""

    def __init__(self, proc: AvailabilityProcess, rng):
        self.proc = proc
        self.rng = rng
        if proc.model == "geometric":
            self._state = AvailabilityProcess(
                "geometric", proc.lam_a, proc.lam_u, init=proc.init
            ).reset(rng)
            self._run_left = self._draw_run(self._state)
        else:
            self._pos = 0

    def _draw_run(self, state) -> int:
        lam = self.proc.lam_a if state == 1 else self.proc.lam_u
        return int(self.rng.geometric(lam))

    def next_block(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError("block size must be >= 0")
        out = np.empty(n, dtype=np.uint8)
        if self.proc.model == "trace":
            trace = self.proc.trace
            size = trace.size
            filled = 0
            while filled < n:
                if self._pos >= size:
                    if self.proc.wrap == "repeat":
                        self._pos = 0
                    else:
                        raise TraceExhausted(
                            f"trace exhausted after {self._pos} samples")
                take = min(n - filled, size - self._pos)
                out[filled:filled + take] = trace[self._pos:self._pos + take]
                self._pos += take
                filled += take
            return out
        filled = 0
        while filled < n:
            take = min(n - filled, self._run_left)
            out[filled:filled + take] = self._state
            filled += take
            self._run_left -= take
            if self._run_left == 0:
                self._state = 1 - self._state
                self._run_left = self._draw_run(self._state)
        return out


def instantaneous_coverage(graph: CellGraph, node: NodeSpec, cell: int,
                           uav_position: int = None,
                           sat_state: int = None) -> int:
    """Whether ``node`` could refresh ``cell`` in the current slot."""
    if not (0 <= cell < graph.n_cells):
        raise KeyError(f"unknown cell id {cell}")
    if node.kind == KIND_IOT:
        return int(node.home_cell == cell)
    if node.kind == KIND_UAV:
        if uav_position is None:
            raise ValueError("uav_position required for a UAV node")
        return int(cell in neighborhood(graph, uav_position, node.radius))
    if sat_state is None:
        raise ValueError("sat_state required for a satellite node")
    return int(sat_state == 1)


@dataclass(frozen=True)
class NetworkSpec:
    """Full deployment: graph, nodes, and the satellite process (if any)."""

    graph: CellGraph
    nodes: tuple
    availability: AvailabilityProcess = None
    scenario_id: str = "scenario"

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("duplicate node ids")
        sats = [n for n in self.nodes if n.kind == KIND_SAT]
        if len(sats) > 1:
            raise ConfigurationError(
                "at most one satellite node per scenario (the constellation "
                "is a single logical entity)")
        if sats and self.availability is None:
            raise ConfigurationError(
                "a satellite node needs an availability process")
        for n in self.nodes:
            if n.kind == KIND_IOT and n.home_cell >= self.graph.n_cells:
                raise ConfigurationError(
                    f"{n.id}: home cell {n.home_cell} not in graph")
            if n.kind == KIND_UAV:
                if n.mobility != RANDOM_WALK:
                    for c in n.mobility:
                        if not (0 <= c < self.graph.n_cells):
                            raise ConfigurationError(
                                f"{n.id}: route cell {c} not in graph")
                if n.start_cell >= self.graph.n_cells:
                    raise ConfigurationError(
                        f"{n.id}: start cell {n.start_cell} not in graph")
        self._warn_reliability_order(sats)

    def _warn_reliability_order(self, sats):
        p_iot = [n.success_prob for n in self.nodes if n.kind == KIND_IOT]
        p_uav = [n.success_prob for n in self.nodes if n.kind == KIND_UAV]
        p_sat = [n.success_prob for n in sats]
        if p_iot and p_uav and min(p_iot) < max(p_uav):
            warnings.warn("a UAV is more reliable than some sensor; "
                          "unusual but allowed", stacklevel=3)
        if (p_uav or p_iot) and p_sat:
            floor = min(p_iot + p_uav)
            if floor < max(p_sat):
                warnings.warn("the satellite is not the least reliable "
                              "node; unusual but allowed", stacklevel=3)

    @property
    def satellite(self) -> NodeSpec:
        for n in self.nodes:
            if n.kind == KIND_SAT:
                return n
        return None

    def node_index(self, node_id: str) -> int:
        for i, n in enumerate(self.nodes):
            if n.id == node_id:
                return i
        raise KeyError(f"unknown node id {node_id!r}")

    def uav_start(self, node: NodeSpec) -> int:
        if node.start_cell >= 0:
            return node.start_cell
        if node.mobility != RANDOM_WALK:
            return node.mobility[0]
        return 0


def long_run_coverage(spec: NetworkSpec, horizon: int = 1_000_000,
                      seed: int = 0) -> np.ndarray:
    """Long-run coverage fractions, one row per node, one column per cell.

    Sensor rows are exact {0,1}. The satellite row is the empirical on
    fraction of its availability process over ``horizon`` slots. UAV rows
    are estimated by simulating the mobility rule in isolation, holding
    each position for an independent full-service duration (the sum of
    packet_count geometric(success_prob) transmission attempts). Dwell
    lengths are position-independent, so the occupancy estimate is
    insensitive to the exact dwell law; only mixing speed changes.
    """
    if horizon < 1:
        raise ConfigurationError("horizon must be >= 1")
    graph = spec.graph
    n_uavs = sum(1 for n in spec.nodes if n.kind == KIND_UAV)
    children = np.random.SeedSequence(seed).spawn(1 + n_uavs)
    avail_rng = np.random.default_rng(children[0])
    out = np.zeros((len(spec.nodes), graph.n_cells), dtype=np.float64)
    uav_i = 0
    for row, node in enumerate(spec.nodes):
        if node.kind == KIND_IOT:
            out[row, node.home_cell] = 1.0
        elif node.kind == KIND_SAT:
            path = spec.availability.sample_path(horizon, avail_rng)
            out[row, :] = float(np.mean(path))
        else:
            rng = np.random.default_rng(children[1 + uav_i])
            uav_i += 1
            occupancy = _uav_occupancy(graph, node, horizon, rng)
            for pos in range(graph.n_cells):
                if occupancy[pos] == 0:
                    continue
                for cell in neighborhood(graph, pos, node.radius):
                    out[row, cell] += occupancy[pos]
            out[row, :] /= horizon
    return out


def _uav_occupancy(graph: CellGraph, node: NodeSpec, horizon: int, rng):
    """Slots spent at each cell by the isolated mobility process."""
    occupancy = np.zeros(graph.n_cells, dtype=np.int64)
    pos = node.start_cell if node.start_cell >= 0 else (
        node.mobility[0] if node.mobility != RANDOM_WALK else 0)
    route_i = 0
    elapsed = 0
    l, p = node.packet_count, node.success_prob
    while elapsed < horizon:
        dwell = l + int(rng.negative_binomial(l, p)) if p < 1 else l
        dwell = min(dwell, horizon - elapsed)
        occupancy[pos] += dwell
        elapsed += dwell
        if node.mobility == RANDOM_WALK:
            nbrs = graph.neighbors[pos]
            if nbrs:
                pos = nbrs[int(rng.random() * len(nbrs))]
        else:
            route_i = (route_i + 1) % len(node.mobility)
            pos = node.mobility[route_i]
    return occupancy
