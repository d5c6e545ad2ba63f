from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoisim.errors import ConfigurationError, TraceExhausted
from aoisim.netmodel import (AvailabilityProcess, NetworkSpec, NodeSpec,
                             PathSampler, build_grid, instantaneous_coverage,
                             long_run_coverage, neighborhood)
from conftest import geometric, iot, sat, uav


def bfs_within(edges, n, cell, r):
    # independent shortest-path enumeration used as the oracle
    adj = {m: set() for m in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    dist = {cell: 0}
    q = deque([cell])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return {m for m, d in dist.items() if d <= r}


class TestBuildGrid:
    def test_4x4_four_connected(self):
        g = build_grid(4, 4)
        assert g.n_cells == 16
        assert len({tuple(sorted(e)) for e in g.edges}) == 24

    def test_degenerate_single_cell(self):
        g = build_grid(1, 1)
        assert g.n_cells == 1
        assert len(g.edges) == 0

    def test_2x2_eight_connected(self):
        # oracle: all pairs within Chebyshev distance 1
        g = build_grid(2, 2, "8-connected")
        coords = {m: (m // 2, m % 2) for m in range(4)}
        expect = {(a, b) for a in range(4) for b in range(a + 1, 4)
                  if max(abs(coords[a][0] - coords[b][0]),
                         abs(coords[a][1] - coords[b][1])) == 1}
        assert {tuple(sorted(e)) for e in g.edges} == expect
        assert len(expect) == 6

    def test_zero_dimension_rejected(self):
        with pytest.raises(ConfigurationError):
            build_grid(0, 4)

    def test_bad_weights_rejected(self):
        with pytest.raises(ConfigurationError):
            build_grid(2, 2, weights=[1.0, 1.0, 0.0, 1.0])


class TestNeighborhood:
    def test_interior_radius_one(self):
        g = build_grid(4, 4)
        assert len(neighborhood(g, 5, 1)) == 5

    def test_radius_zero(self):
        g = build_grid(4, 4)
        assert neighborhood(g, 7, 0) == {7}

    def test_corner_radius_two(self):
        g = build_grid(4, 4)
        got = neighborhood(g, 0, 2)
        assert got == bfs_within(g.edges, 16, 0, 2)
        assert len(got) == 6

    def test_unknown_cell(self):
        g = build_grid(2, 2)
        with pytest.raises(KeyError):
            neighborhood(g, 9, 1)

    @given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 5),
           st.integers(0, 5), st.data())
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_radius(self, rows, cols, r1, r2, data):
        g = build_grid(rows, cols)
        cell = data.draw(st.integers(0, rows * cols - 1))
        lo, hi = min(r1, r2), max(r1, r2)
        assert neighborhood(g, cell, lo) <= neighborhood(g, cell, hi)
        assert neighborhood(g, cell, hi) == bfs_within(
            g.edges, rows * cols, cell, hi)


class TestInstantaneousCoverage:
    def test_sensor_home_cell(self):
        g = build_grid(2, 2)
        n = iot("a", 3)
        assert instantaneous_coverage(g, n, 3) == 1
        assert instantaneous_coverage(g, n, 0) == 0

    def test_satellite_requires_availability(self):
        g = build_grid(2, 2)
        n = sat()
        assert instantaneous_coverage(g, n, 1, sat_state=0) == 0
        assert instantaneous_coverage(g, n, 1, sat_state=1) == 1
        with pytest.raises(ValueError):
            instantaneous_coverage(g, n, 1)

    def test_uav_outside_radius(self):
        g = build_grid(4, 4)
        n = uav("u", radius=1)
        assert instantaneous_coverage(g, n, 7, uav_position=5) == 0
        assert instantaneous_coverage(g, n, 6, uav_position=5) == 1
        with pytest.raises(ValueError):
            instantaneous_coverage(g, n, 6)


class TestAvailability:
    def test_certain_flip(self, rng):
        proc = AvailabilityProcess("geometric", lam_a=0.999999999,
                                   lam_u=0.999999999, init="on")
        proc.reset(rng)
        states = [proc.step(rng) for _ in range(6)]
        assert states == [0, 1, 0, 1, 0, 1]

    def test_trace_wraparound(self, rng):
        proc = AvailabilityProcess("trace", trace=[1, 0, 1], wrap="repeat")
        proc.reset(rng)
        # the fourth call wraps back to the first sample
        assert [proc.step(rng) for _ in range(4)] == [1, 0, 1, 1]

    def test_trace_exhaustion(self, rng):
        proc = AvailabilityProcess("trace", trace=[1, 0], wrap="truncate")
        proc.reset(rng)
        proc.step(rng)
        proc.step(rng)
        with pytest.raises(TraceExhausted):
            proc.step(rng)

    def test_symmetric_long_run_fraction(self, rng):
        proc = geometric(0.05, 0.05)
        path = proc.sample_path(1_000_000, rng)
        assert abs(float(path.mean()) - 0.5) < 0.01

    def test_stepping_matches_stationary_fraction(self, rng):
        proc = geometric(0.02, 0.08)
        proc.reset(rng)
        frac = np.mean([proc.step(rng) for _ in range(200_000)])
        assert abs(frac - 0.8) < 0.01

    def test_on_period_mean_duration(self, rng):
        lam_a = 0.05
        proc = geometric(lam_a, 0.1)
        path = proc.sample_path(1_000_000, rng)
        change = np.flatnonzero(np.diff(path)) + 1
        bounds = np.concatenate(([0], change, [path.size]))
        lengths = np.diff(bounds)
        on_lengths = lengths[path[bounds[:-1]] == 1][1:-1]  # full runs only
        assert on_lengths.size >= 10_000
        assert abs(on_lengths.mean() - 1 / lam_a) / (1 / lam_a) < 0.02

    def test_blocked_sampling_matches_single_path(self, rng):
        proc = geometric(0.03, 0.07)
        s1 = PathSampler(proc, np.random.default_rng(9))
        one = s1.next_block(10_000)
        s2 = PathSampler(proc, np.random.default_rng(9))
        parts = [s2.next_block(n) for n in (1, 999, 4000, 5000)]
        assert np.array_equal(one, np.concatenate(parts))


class TestNetworkSpec:
    def test_two_satellites_rejected(self):
        g = build_grid(2, 2)
        with pytest.raises(ConfigurationError):
            NetworkSpec(graph=g, nodes=(sat("a"), sat("b")),
                        availability=geometric())

    def test_satellite_needs_availability(self):
        g = build_grid(2, 2)
        with pytest.raises(ConfigurationError):
            NetworkSpec(graph=g, nodes=(sat(),))

    def test_reliability_ordering_warns(self):
        g = build_grid(2, 2)
        with pytest.warns(UserWarning):
            NetworkSpec(graph=g,
                        nodes=(iot("a", 0, p=0.5), uav("u", start=1, p=0.9)))


class TestLongRunCoverage:
    def test_single_sensor_single_cell(self):
        spec = NetworkSpec(graph=build_grid(1, 1), nodes=(iot("a", 0),))
        f = long_run_coverage(spec, horizon=100, seed=0)
        assert f.tolist() == [[1.0]]

    def test_satellite_row_matches_symmetric_fraction(self):
        spec = NetworkSpec(graph=build_grid(2, 2),
                           nodes=(iot("a", 0), sat()),
                           availability=geometric(0.05, 0.05))
        f = long_run_coverage(spec, horizon=1_000_000, seed=3)
        assert np.allclose(f[1], f[1][0])
        assert abs(f[1][0] - 0.5) < 0.01

    def test_cyclic_route_symmetric_occupancy(self):
        # route over four distinct cells at radius 0: a quarter each
        spec = NetworkSpec(graph=build_grid(2, 2),
                           nodes=(uav("u", radius=0, mobility=(0, 1, 3, 2),
                                      l=2, p=0.8),))
        f = long_run_coverage(spec, horizon=500_000, seed=5)
        assert np.allclose(f[0], 0.25, atol=0.01)

    def test_random_walk_row_is_consistent(self):
        # two independent estimates agree within Monte-Carlo noise
        spec = NetworkSpec(graph=build_grid(3, 3),
                           nodes=(uav("u", radius=1, start=4),))
        f1 = long_run_coverage(spec, horizon=400_000, seed=1)
        f2 = long_run_coverage(spec, horizon=400_000, seed=2)
        assert np.allclose(f1[0], f2[0], atol=0.02)
        assert np.all(f1[0] > 0) and np.all(f1[0] <= 1)
