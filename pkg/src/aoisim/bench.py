"""Kernel benchmark: compiled extension vs pure-Python fallback.

Runs the same (scenario, policy, seed) workloads on both block drivers,
checks that every metric matches, and prints a throughput table.

    python -m aoisim.bench [--horizon N] [--config PATH]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from . import fileio
from .netmodel import long_run_coverage
from .policies import MaxWeightPolicy, targets_for
from .simcore import COVERAGE_SEED, HAVE_COMPILED, run


def _time_run(kernel, spec, policy, horizon, mw_targets):
    t0 = time.perf_counter()
    metrics = run(spec, policy, horizon, seed=1, burn_in=0, kernel=kernel,
                  mw_targets=mw_targets)
    return time.perf_counter() - t0, metrics


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizon", type=int, default=200_000)
    ap.add_argument("--config", default="scenario_satellite.toml",
                    help="scenario TOML (path or packaged recipe name)")
    args = ap.parse_args(argv)

    bundle = fileio.load_scenario(fileio.resolve_config(args.config))
    spec = bundle.spec
    coverage = long_run_coverage(spec, seed=COVERAGE_SEED)
    print(f"scenario: {spec.scenario_id}, horizon: {args.horizon}, "
          f"compiled kernel built: {HAVE_COMPILED}")
    header = f"{'policy':<8} {'python s':>10} {'compiled s':>11} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name in sorted(bundle.policies):
        policy = bundle.policy(name)
        mw_targets = None
        if isinstance(policy, MaxWeightPolicy):
            mw_targets = targets_for(spec, policy, coverage)
        t_py, m_py = _time_run("python", spec, policy, args.horizon,
                               mw_targets)
        if HAVE_COMPILED:
            t_cy, m_cy = _time_run("compiled", spec, policy, args.horizon,
                                   mw_targets)
            same = (m_py.ewsaoi == m_cy.ewsaoi
                    and (np.isnan(m_py.ewspaoi) and np.isnan(m_cy.ewspaoi)
                         or m_py.ewspaoi == m_cy.ewspaoi)
                    and m_py.completed == m_cy.completed
                    and m_py.failed_sat_updates == m_cy.failed_sat_updates)
            if not same:
                print(f"{name}: KERNEL MISMATCH")
                return 1
            print(f"{name:<8} {t_py:>10.3f} {t_cy:>11.3f} "
                  f"{t_py / t_cy:>7.1f}x")
        else:
            print(f"{name:<8} {t_py:>10.3f} {'-':>11} {'-':>8}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
