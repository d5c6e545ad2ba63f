"""Scheduling policies: randomized access, debt-driven max-weight,
greedy age reduction, and the reliability-weighted baseline.

Selector functions here are the reference implementations used by unit
tests; the simulation kernels inline the same rules for speed and are
checked against these on random states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InfeasibleError
from .netmodel import KIND_SAT, NetworkSpec

SAT_IDLE = "idle"
SAT_RENORMALIZE = "renormalize"


def _validate_mu(mu: dict, what: str):
    total = 0.0
    for node_id, m in mu.items():
        if not (0.0 <= m <= 1.0):
            raise ConfigurationError(
                f"{what}: probability for {node_id!r} outside [0, 1]")
        total += m
    if total > 1.0 + 1e-9:
        raise ConfigurationError(f"{what}: probabilities sum to {total} > 1")
    return total


@dataclass(frozen=True)
class RandomizedPolicy:
    """Stationary randomized access.

    ``mu`` applies while the satellite is available (and in scenarios
    without one). While it is not, ``u_period_mu`` applies when given;
    otherwise ``sat_unavail_behavior`` decides: "renormalize" spreads
    the satellite's share proportionally over the terrestrial nodes,
    "idle" keeps the table, so drawing the satellite wastes the slot.
    """

    mu: dict
    u_period_mu: dict = None
    sat_unavail_behavior: str = SAT_RENORMALIZE
    id: str = "sr"

    def __post_init__(self):
        _validate_mu(self.mu, "mu")
        if self.u_period_mu is not None:
            _validate_mu(self.u_period_mu, "u_period")
        if self.sat_unavail_behavior not in (SAT_IDLE, SAT_RENORMALIZE):
            raise ConfigurationError(
                f"unknown sat_unavail_behavior {self.sat_unavail_behavior!r}")

    def tables(self, spec: NetworkSpec):
        """Per-node probability tables (available, unavailable)."""
        ids = [n.id for n in spec.nodes]
        for key in list(self.mu) + list(self.u_period_mu or {}):
            if key not in ids:
                raise ConfigurationError(f"mu references unknown node {key!r}")
        mu_a = np.array([float(self.mu.get(n.id, 0.0)) for n in spec.nodes])
        sat_ix = next((i for i, n in enumerate(spec.nodes)
                       if n.kind == KIND_SAT), -1)
        if self.u_period_mu is not None:
            mu_u = np.array([float(self.u_period_mu.get(n.id, 0.0))
                             for n in spec.nodes])
            if sat_ix >= 0 and mu_u[sat_ix] != 0.0:
                raise ConfigurationError(
                    "u_period table must give the satellite probability 0")
        else:
            mu_u = mu_a.copy()
            if sat_ix >= 0:
                mu_u[sat_ix] = 0.0
                if self.sat_unavail_behavior == SAT_RENORMALIZE:
                    ter = mu_u.sum()
                    if ter > 0:
                        mu_u *= (ter + mu_a[sat_ix]) / ter
        return mu_a, mu_u


def sample_randomized(mu_a, mu_u, sat_available: int, rng) -> int:
    """Draw the scheduled node index for one idle slot, or -1 to idle."""
    table = mu_a if sat_available else mu_u
    u = rng.random()
    acc = 0.0
    for k, m in enumerate(table):
        acc += m
        if u < acc:
            return k
    return -1


@dataclass(frozen=True)
class MaxWeightPolicy:
    """Age/debt max-weight scheduling at epoch boundaries.

    ``targets`` is either the string "auto" (solve the throughput
    program on long-run coverage) or an explicit node-id -> rate table.
    ``beta`` trades age reduction against throughput debt.
    """

    beta: float = 1.0
    targets: object = "auto"
    allow_idle: bool = False
    id: str = "mw"

    def __post_init__(self):
        if self.beta <= 0:
            raise ConfigurationError("beta must be positive")
        if not (self.targets == "auto" or isinstance(self.targets, dict)):
            raise ConfigurationError("targets must be 'auto' or a table")


@dataclass(frozen=True)
class GreedyPolicy:
    """Largest instantaneous weighted age reduction."""

    id: str = "greedy"


@dataclass(frozen=True)
class MWL1Policy:
    """Single-slot max-weight baseline: sqrt(p_k) sum sqrt(alpha_m) A_m."""

    id: str = "mwl1"


@dataclass
class MaxWeightState:
    """Mutable throughput-debt state, one instance per run."""

    nu_targets: np.ndarray
    beta: float = 1.0
    debts: np.ndarray = None
    epoch: int = 0

    def __post_init__(self):
        if self.debts is None:
            self.debts = np.zeros_like(np.asarray(self.nu_targets, float))


def update_debts(state: MaxWeightState, scheduled: int, delivered: int):
    """Settle one epoch: every debt grows by its target; the scheduled
    node pays one on delivery. Raw debts stay signed; only the positive
    part enters the selection weight."""
    state.debts = state.debts + state.nu_targets
    if scheduled >= 0 and delivered:
        state.debts[scheduled] -= 1.0
    state.epoch += 1
    return state


def max_weight_weights(ages, coverage_now, alpha, l, p, debts, beta):
    """The per-node selection weight C_k.

    C_k = beta p_k x_k^+ + p_k sum_{m in M_k} alpha_m A_m (A_m + 2 - 2/p_k)
          - 2 l_k sum_{m not in M_k} alpha_m A_m
          - (l_k (l_k + p_k - 1) / p_k) sum_m alpha_m
    """
    ages = np.asarray(ages, dtype=float)
    cov = np.asarray(coverage_now, dtype=bool)
    alpha = np.asarray(alpha, dtype=float)
    l = np.asarray(l, dtype=float)
    p = np.asarray(p, dtype=float)
    xp = np.maximum(np.asarray(debts, dtype=float), 0.0)
    wa = alpha * ages
    total_wa = wa.sum()
    alpha_total = alpha.sum()
    out = np.empty(len(l))
    for k in range(len(l)):
        cov_term = float(np.sum(wa[cov[k]] * (ages[cov[k]] + 2.0 - 2.0 / p[k])))
        cov_wa = float(wa[cov[k]].sum())
        out[k] = (beta * p[k] * xp[k] + p[k] * cov_term
                  - 2.0 * l[k] * (total_wa - cov_wa)
                  - l[k] * (l[k] + p[k] - 1.0) / p[k] * alpha_total)
    return out


def max_weight_select(ages, coverage_now, alpha, l, p, state: MaxWeightState,
                      sat_available: int, sat_index: int = -1,
                      allow_idle: bool = False) -> int:
    """Argmax of C_k over schedulable nodes; ties go to the lowest index.

    The satellite is excluded while unavailable. Returns -1 only when no
    candidate exists, or when ``allow_idle`` and every weight is
    negative.
    """
    c = max_weight_weights(ages, coverage_now, alpha, l, p,
                           state.debts, state.beta)
    if sat_index >= 0 and not sat_available:
        c[sat_index] = -np.inf
    best = int(np.argmax(c))
    if not np.isfinite(c[best]):
        return -1
    if allow_idle and c[best] < 0:
        return -1
    return best


def greedy_select(ages, coverage_now, alpha, sat_available: int,
                  sat_index: int = -1) -> int:
    """Largest sum of covered weighted ages; idle when nothing is covered."""
    ages = np.asarray(ages, dtype=float)
    cov = np.asarray(coverage_now, dtype=bool)
    alpha = np.asarray(alpha, dtype=float)
    scores = cov @ (alpha * ages)
    if sat_index >= 0 and not sat_available:
        scores[sat_index] = -np.inf
    best = int(np.argmax(scores))
    if not np.isfinite(scores[best]) or scores[best] <= 0.0:
        return -1
    return best


def mwl1_select(ages, coverage_now, alpha, p, sat_available: int,
                sat_index: int = -1) -> int:
    """Reliability-weighted variant: sqrt(p_k) sum sqrt(alpha_m) A_m."""
    ages = np.asarray(ages, dtype=float)
    cov = np.asarray(coverage_now, dtype=bool)
    alpha = np.asarray(alpha, dtype=float)
    scores = np.sqrt(np.asarray(p, float)) * (cov @ (np.sqrt(alpha) * ages))
    if sat_index >= 0 and not sat_available:
        scores[sat_index] = -np.inf
    best = int(np.argmax(scores))
    if not np.isfinite(scores[best]) or scores[best] <= 0.0:
        return -1
    return best


# ---------------------------------------------------------------------------
# throughput targets

@dataclass
class ThroughputTargets:
    nu: np.ndarray            # per-node update rates, spec node order
    slack: float              # 1 - sum l_k nu_k / p_k
    objective: float
    iterations: int = 0
    closed_form: bool = False


def _budget(nu, l, p):
    return float(np.sum(l * nu / p))


def _rate_objective(nu, alpha, f):
    den = f.T @ nu
    if np.any(den <= 0):
        return math.inf
    return float(np.sum(alpha / den))


def solve_targets(spec: NetworkSpec, coverage: np.ndarray,
                  tol: float = 1e-8, max_iter: int = 200_000
                  ) -> ThroughputTargets:
    """Update-rate targets minimizing sum_m alpha_m / (sum_k nu_k f_mk)
    under the channel budget sum_k l_k nu_k / p_k <= 1.

    When every cell is covered by exactly one dedicated single-cell
    node, the KKT closed form applies:
    nu_k = sqrt(alpha_k p_k / l_k) / sum_j sqrt(alpha_j l_j / p_j).

    Otherwise gradient descent runs on the budget face. The objective
    is homogeneous of degree -1 and decreasing in every rate, so the
    optimum is budget-tight and minimizing on the face is the same as
    unconstrained descent on the scale-invariant objective
    J(nu) * budget(nu), whose stationary rays are exactly the KKT
    points; each step is clipped at zero and rescaled onto the budget.
    Backtracking line search, relative-change stop at ``tol``.
    """
    f = np.asarray(coverage, dtype=float)
    alpha = spec.graph.weights
    l = np.array([n.packet_count for n in spec.nodes], dtype=float)
    p = np.array([n.success_prob for n in spec.nodes], dtype=float)
    n_nodes, n_cells = f.shape
    for m in range(n_cells):
        if not np.any(f[:, m] > 0):
            raise InfeasibleError(f"cell {m} is unreachable (no coverage)")

    if _unique_coverage(f):
        cell_of = np.argmax(f > 0, axis=1)
        a_k = alpha[cell_of]
        denom = np.sum(np.sqrt(a_k * l / p))
        nu = np.sqrt(a_k * p / l) / denom
        return ThroughputTargets(
            nu=nu, slack=1.0 - _budget(nu, l, p),
            objective=_rate_objective(nu, alpha, f), closed_form=True)

    # feasible interior start, proportional to per-slot efficiency
    cost = l / p
    nu = p / l
    nu = nu / _budget(nu, l, p)
    obj = _rate_objective(nu, alpha, f)
    step = 1.0 / max(obj, 1.0)
    it = 0
    for it in range(1, max_iter + 1):
        den = f.T @ nu
        grad_j = -(f @ (alpha / den ** 2))
        # scale-invariant objective J * budget; on the face budget = 1
        grad = grad_j + obj * cost
        improved = False
        while step > 1e-30:
            cand = np.maximum(nu - step * grad, 0.0)
            b = _budget(cand, l, p)
            if b > 0:
                cand = cand / b
                new_obj = _rate_objective(cand, alpha, f)
                if new_obj < obj:
                    improved = True
                    break
            step *= 0.5
        if not improved:
            break
        rel = (obj - new_obj) / max(abs(obj), 1e-300)
        nu, obj = cand, new_obj
        step *= 1.5
        if rel < tol:
            break
    return ThroughputTargets(nu=nu, slack=1.0 - _budget(nu, l, p),
                             objective=obj, iterations=it)


def _unique_coverage(f) -> bool:
    # one dedicated coverer per cell, each covering exactly one cell at 1
    n_nodes, n_cells = f.shape
    if n_nodes != n_cells:
        return False
    coverers = f > 0
    if not np.all(coverers.sum(axis=0) == 1):
        return False
    if not np.all(coverers.sum(axis=1) == 1):
        return False
    return bool(np.all(f[coverers] == 1.0))


def targets_for(spec: NetworkSpec, policy: MaxWeightPolicy,
                coverage: np.ndarray) -> np.ndarray:
    """Resolve a max-weight policy's targets to a per-node rate vector."""
    if policy.targets == "auto":
        return solve_targets(spec, coverage).nu
    nu = np.zeros(len(spec.nodes))
    for node_id, rate in policy.targets.items():
        nu[spec.node_index(node_id)] = float(rate)
    l = np.array([n.packet_count for n in spec.nodes], dtype=float)
    p = np.array([n.success_prob for n in spec.nodes], dtype=float)
    if _budget(nu, l, p) > 1.0 + 1e-9:
        raise InfeasibleError("explicit targets exceed the channel budget")
    return nu
