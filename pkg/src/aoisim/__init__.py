"""Discrete-time age-of-information simulator and analytics for mixed
sensor / UAV / satellite monitoring networks sharing one channel."""

from . import analytics, boundary, errors, fileio, netmodel, policies
from . import simcore, traceio
from .netmodel import (AvailabilityProcess, CellGraph, NetworkSpec, NodeSpec,
                       build_grid, instantaneous_coverage, long_run_coverage,
                       neighborhood)
from .policies import (GreedyPolicy, MaxWeightPolicy, MWL1Policy,
                       RandomizedPolicy, solve_targets)
from .simcore import ACTIVE_KERNEL, HAVE_COMPILED, RunMetrics, run

__version__ = "0.1.0"

__all__ = [
    "analytics", "boundary", "errors", "fileio", "netmodel", "policies",
    "simcore", "traceio",
    "AvailabilityProcess", "CellGraph", "NetworkSpec", "NodeSpec",
    "build_grid", "instantaneous_coverage", "long_run_coverage",
    "neighborhood",
    "GreedyPolicy", "MaxWeightPolicy", "MWL1Policy", "RandomizedPolicy",
    "solve_targets",
    "ACTIVE_KERNEL", "HAVE_COMPILED", "RunMetrics", "run",
]
