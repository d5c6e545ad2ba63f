import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoisim.errors import ConfigurationError, TraceParseError
from aoisim.traceio import (VisibilityTrace, parse_trace, serialize_trace,
                            synthetic_constellation_trace, trace_stats,
                            trace_to_availability)


class TestParse:
    def test_bitline_basic(self):
        t = parse_trace("101")
        assert t.samples.tolist() == [1, 0, 1]

    def test_bitline_multiline_and_stream(self):
        t = parse_trace(io.StringIO("10\n01\n"))
        assert t.samples.tolist() == [1, 0, 0, 1]

    def test_bitline_bad_character(self):
        with pytest.raises(TraceParseError, match="line 2"):
            parse_trace("10\n1x1\n")

    def test_intervals_expansion(self):
        t = parse_trace("0,10,1\n10,20,0\n", format="interval-list")
        assert t.samples.tolist() == [1] * 10 + [0] * 10

    def test_intervals_overlap_rejected(self):
        with pytest.raises(TraceParseError, match="overlap"):
            parse_trace("0,10,1\n5,15,0\n", format="interval-list")

    def test_intervals_gap_rejected(self):
        with pytest.raises(TraceParseError, match="gap"):
            parse_trace("0,10,1\n12,15,0\n", format="interval-list")

    def test_intervals_non_monotone_rejected(self):
        with pytest.raises(TraceParseError):
            parse_trace("0,10,1\n10,5,0\n", format="interval-list")

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=200),
           st.sampled_from(["bitline", "interval-list"]))
    @settings(max_examples=60, deadline=None)
    def test_round_trip(self, bits, fmt):
        trace = VisibilityTrace(np.array(bits, dtype=np.uint8))
        text = serialize_trace(trace, fmt)
        back = parse_trace(text, fmt)
        assert back.samples.tolist() == bits


class TestStats:
    def test_alternating_runs(self):
        t = VisibilityTrace(np.array(([1] * 10 + [0] * 10) * 5,
                                     dtype=np.uint8))
        s = trace_stats(t)
        assert s["availability_fraction"] == pytest.approx(0.5)
        assert s["mean_on_s"] == pytest.approx(10.0)
        assert s["mean_off_s"] == pytest.approx(10.0)
        assert s["on_runs"] == 5

    def test_all_on_has_no_off_mean(self):
        s = trace_stats(VisibilityTrace(np.ones(50, dtype=np.uint8)))
        assert s["availability_fraction"] == 1.0
        assert s["mean_off_s"] is None

    def test_synthetic_constellation_statistics(self):
        # generator parameters chosen to match the published summary:
        # ~59.7% availability with ~967 s / ~657 s mean on/off runs
        t = synthetic_constellation_trace(10_000_000, seed=3)
        s = trace_stats(t)
        assert abs(s["availability_fraction"] - 0.596) < 0.01
        assert abs(s["mean_on_s"] - 967.1) / 967.1 < 0.05
        assert abs(s["mean_off_s"] - 657.0) / 657.0 < 0.05

    def test_rate_recovery(self):
        t = synthetic_constellation_trace(1_000_000, seed=4,
                                          mean_on_s=100.0, mean_off_s=50.0)
        s = trace_stats(t)
        assert abs(s["mean_on_s"] - 100.0) / 100.0 < 0.05
        assert abs(s["mean_off_s"] - 50.0) / 50.0 < 0.05


class TestResample:
    def test_identity(self):
        t = VisibilityTrace(np.array([1, 0, 1], dtype=np.uint8))
        proc = trace_to_availability(t, slot_seconds=1.0)
        assert proc.trace.tolist() == [1, 0, 1]

    def test_majority_window(self):
        t = VisibilityTrace(np.array([1, 1, 0, 0], dtype=np.uint8))
        proc = trace_to_availability(t, slot_seconds=2.0)
        assert proc.trace.tolist() == [1, 0]

    def test_tie_counts_available(self):
        t = VisibilityTrace(np.array([1, 0], dtype=np.uint8))
        proc = trace_to_availability(t, slot_seconds=2.0)
        assert proc.trace.tolist() == [1]

    def test_non_integer_ratio_rejected(self):
        t = VisibilityTrace(np.array([1, 0, 1], dtype=np.uint8))
        with pytest.raises(ConfigurationError):
            trace_to_availability(t, slot_seconds=1.5)

    def test_wrap_policy_forwarded(self):
        t = VisibilityTrace(np.array([1, 0], dtype=np.uint8))
        proc = trace_to_availability(t, wrap="truncate")
        assert proc.wrap == "truncate"
