"""Closed-form age analytics for randomized scheduling.

Evaluates, per cell, the expected waiting and service times of refresh
cycles under a stationary randomized policy, with and without a
satellite, the universal average-age lower bound, and the sensor-vs-
satellite access-split analysis.

Two formula modes exist where the algebra admits two published-looking
variants:

* ``mode="exact"`` (default): the derivation-faithful forms. The
  interrupted-update success probability carries a 1/(1-lam_a)
  prefactor, the conditional wasted-time mean sums k*(1-lam_a)^(k-1)
  survival terms from k=1, and the waiting time after a failed
  satellite update includes the full expected off-dwell 1/lam_u.
  Monte-Carlo validation sides with these forms.
* ``mode="strict"``: the simplified display variants (no prefactor,
  shifted wasted-time index adding +1, no off-dwell term). Kept for
  comparison; selected by the CLI --strict-prop flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InfeasibleError, NumericError
from .netmodel import KIND_SAT, NetworkSpec

MODE_EXACT = "exact"
MODE_STRICT = "strict"


# ---------------------------------------------------------------------------
# negative-binomial service helpers

def nb_service_moments(l: int, p: float):
    """Mean and second moment of the extra service slots after the first
    packet: the number of trials needed for l-1 successes at rate p.

    mean = (l-1)/p, second moment = (l-1)(l-p)/p^2; both 0 for l = 1.
    """
    if l < 1:
        raise ConfigurationError("packet count must be >= 1")
    if not (0 < p <= 1):
        raise ConfigurationError("success probability must be in (0, 1]")
    mean = (l - 1) / p
    second = (l - 1) * (l - p) / (p * p)
    return mean, second


def _blocking_second_moment(l: int, p: float) -> float:
    # E[Y^2] for the channel-blocking time of a non-covering node:
    # Y = 1 on first-packet failure, else 1 + full remaining service.
    return 2 * l - 1 + (l - 1) * (l - p) / (p * p)


def psi(q: float, l: int, p: float) -> float:
    """E[q^L] for the busy period L of one scheduled update attempt:
    length 1 on first-packet failure, else 1 plus the remaining
    negative-binomial service. psi(q; 1, p) = q for all p.
    """
    if l < 1:
        raise ConfigurationError("packet count must be >= 1")
    if not (0 < p <= 1) or not (0 < q <= 1):
        raise ConfigurationError("need p in (0,1] and q in (0,1]")
    if (1 - p) * q >= 1:
        raise ConfigurationError("(1-p)q must be < 1")
    return q * (1 - p + p * (p * q / (1 - (1 - p) * q)) ** (l - 1))


def sat_gamma(p_sat: float, lam_a: float, l_sat: int,
              mode: str = MODE_EXACT) -> float:
    """Probability that a satellite update, once its first packet is
    through, finishes before the availability window closes.

    Exact form: (1/(1-lam_a)) * (p(1-lam_a)/(p+lam_a-p*lam_a))^(l-1).
    Strict form drops the leading 1/(1-lam_a). l_sat = 1 returns 1.
    """
    if not (0 < p_sat <= 1):
        raise ConfigurationError("p_sat must be in (0, 1]")
    if not (0 <= lam_a < 1):
        raise ConfigurationError("lam_a must be in [0, 1)")
    if l_sat < 1:
        raise ConfigurationError("l_sat must be >= 1")
    if l_sat == 1:
        return 1.0
    base = p_sat * (1 - lam_a) / (p_sat + lam_a - p_sat * lam_a)
    val = base ** (l_sat - 1)
    if mode == MODE_EXACT:
        val /= 1 - lam_a
    elif mode != MODE_STRICT:
        raise ConfigurationError(f"unknown mode {mode!r}")
    return min(val, 1.0)


def sat_wasted_time(p_sat: float, lam_a: float, l_sat: int,
                    tol: float = 1e-12, max_terms: int = 10_000_000,
                    mode: str = MODE_EXACT):
    """Conditional moments of the slots burnt by an interrupted satellite
    update: (E[X], E[X^2]) of the on-dwell given it ends before the
    remaining l_sat-1 packets do.

    Evaluates sums over k of lam_a(1-lam_a)^(k-1) * P(S > k), where S is
    the negative-binomial trial count for l_sat-1 successes. The tail of
    S is tracked with a multiplicative pmf recurrence, no special
    functions. The series stops once the closed-form geometric remainder
    bound drops below ``tol`` relative to each accumulated sum.

    Strict mode shifts the mean by +1 (index-shifted display variant);
    the second moment is only defined for the exact convention.
    """
    if l_sat < 1:
        raise ConfigurationError("l_sat must be >= 1")
    if not (0 < lam_a < 1):
        raise ConfigurationError("lam_a must be in (0, 1)")
    if not (0 < p_sat <= 1):
        raise ConfigurationError("p_sat must be in (0, 1]")
    if mode not in (MODE_EXACT, MODE_STRICT):
        raise ConfigurationError(f"unknown mode {mode!r}")
    if l_sat == 1:
        # a single-packet update is never interrupted mid-service
        return 0.0, 0.0
    q = 1.0 - lam_a
    r = l_sat - 1
    num0 = num1 = num2 = 0.0
    surv = 1.0          # P(S > k), exact 1 while k < r
    pmf = p_sat ** r    # P(S = r), first reachable value
    geom = lam_a        # lam_a * q^(k-1)
    k = 1
    while k <= max_terms:
        if k >= r:
            if k == r:
                surv -= pmf
            else:
                pmf *= (k - 1) * (1 - p_sat) / (k - r)
                surv -= pmf
            if surv < 0.0:
                surv = 0.0
        term = geom * surv
        num0 += term
        num1 += k * term
        num2 += k * k * term
        # remainder bounds: surv is non-increasing, so the rest of each
        # series is at most surv * sum_{j>k} j^i lam_a q^(j-1):
        #   R0 = q^k, R1 = q^k((k+1)lam_a + q)/lam_a,
        #   R2 = q^k((k+1)^2 + q(2k+3)/lam_a + 2q^2/lam_a^2)
        if k >= r:
            qk = q ** k
            r0 = qk
            r1 = qk * ((k + 1) * lam_a + q) / lam_a
            r2 = qk * ((k + 1) ** 2 + q * (2 * k + 3) / lam_a
                       + 2 * q * q / (lam_a * lam_a))
            if (surv * r0 <= tol * num0 and surv * r1 <= tol * num1
                    and surv * r2 <= tol * num2):
                break
        geom *= q
        k += 1
    else:
        raise NumericError(
            f"wasted-time series did not converge within {max_terms} terms "
            f"(p_sat={p_sat}, lam_a={lam_a}, l_sat={l_sat})")
    if num0 <= 0.0:
        raise NumericError("interruption probability underflowed to zero")
    mean = num1 / num0
    second = num2 / num0
    if mode == MODE_STRICT:
        mean += 1.0
    return mean, second


def sat_beta(mu_sat: float, mu_terrestrial, l_terrestrial, p_terrestrial,
             l_sat: int, p_sat: float, lam_a: float, lam_u: float,
             u_period_mu=None) -> float:
    """Probability that a scheduling epoch begins while the satellite is
    available, from the two-state busy-period chain.

    The on-side mix sums over every node (satellite included) at the
    on-period access probabilities; the off-side mix sums over
    terrestrial nodes only, using ``u_period_mu`` when the policy uses a
    separate off-period distribution and the main table otherwise.
    """
    mu_t = np.asarray(mu_terrestrial, dtype=float)
    l_t = np.asarray(l_terrestrial, dtype=int)
    p_t = np.asarray(p_terrestrial, dtype=float)
    if not (0 < lam_a < 1 and 0 < lam_u < 1):
        raise ConfigurationError("lam_a, lam_u must be in (0, 1)")
    q_a = 1.0 - lam_a
    q_u = 1.0 - lam_u
    d_a = mu_sat * psi(q_a, l_sat, p_sat) if mu_sat > 0 else 0.0
    d_a += sum(m * psi(q_a, int(l), p)
               for m, l, p in zip(mu_t, l_t, p_t) if m > 0)
    if u_period_mu is not None:
        mu_u = np.asarray(u_period_mu, dtype=float)
    else:
        mu_u = mu_t
    d_u = sum(m * psi(q_u, int(l), p)
              for m, l, p in zip(mu_u, l_t, p_t) if m > 0)
    num = d_a * (1.0 - d_u)
    den = num + d_u * (1.0 - d_a)
    if den <= 0.0:
        raise NumericError("degenerate availability mix in beta computation")
    return num / den


# ---------------------------------------------------------------------------
# peak-age reports

@dataclass
class PeakAoiReport:
    """Per-cell closed-form cycle statistics and the weighted peak age."""

    ewspaoi: float
    rate: np.ndarray          # per-cell refresh probability per busy epoch
    e_service: np.ndarray     # extra service slots past the first packet
    e_wait: np.ndarray        # waiting slots including the first packet
    e_service2: np.ndarray
    e_wait2: np.ndarray
    peak_contrib: np.ndarray  # alpha_m (2 E[S] + E[W] + 1)
    mode: str = MODE_EXACT
    gamma: float = None
    beta_sat: float = None
    e_wasted: float = None


def _terrestrial_arrays(spec: NetworkSpec, mu: dict, coverage: np.ndarray):
    mu_t, l_t, p_t, rows = [], [], [], []
    mu_sat = 0.0
    sat_node = None
    for i, node in enumerate(spec.nodes):
        m = float(mu.get(node.id, 0.0))
        if m < 0:
            raise ConfigurationError(f"negative access probability for {node.id}")
        if node.kind == KIND_SAT:
            mu_sat = m
            sat_node = node
            continue
        mu_t.append(m)
        l_t.append(node.packet_count)
        p_t.append(node.success_prob)
        rows.append(coverage[i])
    for key in mu:
        spec.node_index(key)  # raises on unknown ids
    total = sum(mu_t) + mu_sat
    if total > 1.0 + 1e-9:
        raise ConfigurationError(f"access probabilities sum to {total} > 1")
    f = np.array(rows, dtype=float) if rows else np.zeros((0, spec.graph.n_cells))
    return (np.array(mu_t), np.array(l_t, dtype=int), np.array(p_t),
            f, mu_sat, sat_node)


def ewspaoi_no_sat(spec: NetworkSpec, mu: dict,
                   coverage: np.ndarray) -> PeakAoiReport:
    """Weighted peak age under randomized access, terrestrial nodes only.

    Per cell: B_m = sum_k mu_k p_k f_mk and the peak contribution is
    (alpha_m / B_m) (1 + sum_k mu_k (f_mk + 1)(l_k - 1)), aggregated as
    the cell average plus one.
    """
    mu_t, l_t, p_t, f, mu_sat, _ = _terrestrial_arrays(spec, mu, coverage)
    if mu_sat > 0:
        raise ConfigurationError(
            "satellite access probability must be 0 for the no-satellite form")
    alpha = spec.graph.weights
    n_cells = spec.graph.n_cells
    b = np.zeros(n_cells)
    if mu_t.size:
        b = (mu_t * p_t) @ f
    for m in range(n_cells):
        if b[m] <= 0:
            raise InfeasibleError(f"cell {m} has zero refresh rate (uncovered)")
    lm1 = l_t - 1.0
    e_s = ((mu_t * lm1) @ f) / b
    e_w = (1.0 + (mu_t * lm1) @ (1.0 - f)) / b
    e_s2 = ((mu_t * lm1 * (l_t - p_t) / p_t) @ f) / b
    ey2 = np.array([_blocking_second_moment(int(l), p)
                    for l, p in zip(l_t, p_t)])
    idle = 1.0 - mu_t.sum()
    e_w2 = np.empty(n_cells)
    for m in range(n_cells):
        cov = f[:, m]
        e_w2[m] = (
            np.sum(mu_t * cov * (1.0 + 2.0 * (1.0 - p_t) * e_w[m]))
            + np.sum(mu_t * (1.0 - cov) * (ey2 + 2.0 * l_t * e_w[m]))
            + idle * (1.0 + 2.0 * e_w[m])
        ) / b[m]
    percell = alpha / b * (1.0 + ((mu_t * lm1) @ (f + 1.0)))
    ewspaoi = float(np.mean(percell)) + 1.0
    return PeakAoiReport(
        ewspaoi=ewspaoi, rate=b, e_service=e_s, e_wait=e_w,
        e_service2=e_s2, e_wait2=e_w2,
        peak_contrib=alpha * (2 * e_s + e_w + 1.0))


def ewspaoi_with_sat(spec: NetworkSpec, mu: dict, coverage: np.ndarray,
                     lam_a: float, lam_u: float, mode: str = MODE_EXACT,
                     u_period_mu: dict = None) -> PeakAoiReport:
    """Weighted peak age under randomized access with satellite support.

    The satellite covers every cell while available; its contribution is
    weighted by the epoch-availability fraction beta and the completion
    probability gamma. With mu_sat = 0 this reduces exactly to
    ewspaoi_no_sat.
    """
    mu_t, l_t, p_t, f, mu_sat, sat_node = _terrestrial_arrays(
        spec, mu, coverage)
    if sat_node is None and mu_sat > 0:
        raise ConfigurationError("mu assigns mass to a missing satellite")
    alpha = spec.graph.weights
    n_cells = spec.graph.n_cells
    if mu_sat == 0.0:
        rep = ewspaoi_no_sat(spec, mu, coverage)
        rep.mode = mode
        return rep
    l_sat, p_sat = sat_node.packet_count, sat_node.success_prob
    gamma = sat_gamma(p_sat, lam_a, l_sat, mode=mode)
    upm = None
    if u_period_mu is not None:
        upm = [float(u_period_mu.get(n.id, 0.0))
               for n in spec.nodes if n.kind != KIND_SAT]
        if float(u_period_mu.get(sat_node.id, 0.0)) != 0.0:
            raise ConfigurationError(
                "off-period table must give the satellite probability 0")
    beta = sat_beta(mu_sat, mu_t, l_t, p_t, l_sat, p_sat, lam_a, lam_u,
                    u_period_mu=upm)
    e_xw, e_xw2 = sat_wasted_time(p_sat, lam_a, l_sat, mode=mode)
    den_sat = p_sat + lam_a - p_sat * lam_a
    sat_rate = beta * mu_sat * p_sat * gamma
    b_ter = (mu_t * p_t) @ f if mu_t.size else np.zeros(n_cells)
    c = b_ter + sat_rate
    for m in range(n_cells):
        if c[m] <= 0:
            raise InfeasibleError(f"cell {m} has zero refresh rate (uncovered)")
    lm1 = l_t - 1.0
    ter_s = (mu_t * lm1) @ f if mu_t.size else np.zeros(n_cells)
    e_s = (ter_s + sat_rate * (l_sat - 1) / den_sat) / c
    fail_wait = e_xw if mode == MODE_STRICT else e_xw + 1.0 / lam_u
    ter_w = (mu_t * lm1) @ (1.0 - f) if mu_t.size else np.zeros(n_cells)
    e_w = (1.0 + ter_w
           + beta * mu_sat * p_sat * (1.0 - gamma) * fail_wait) / c
    e_s2 = (((mu_t * lm1 * (l_t - p_t) / p_t) @ f if mu_t.size else 0.0)
            + sat_rate * (l_sat - 1) * (l_sat - den_sat) / den_sat ** 2) / c
    ey2 = np.array([_blocking_second_moment(int(l), p)
                    for l, p in zip(l_t, p_t)])
    idle = 1.0 - mu_t.sum() - beta * mu_sat * (1.0 + p_sat)
    e_w2 = np.empty(n_cells)
    for m in range(n_cells):
        cov = f[:, m] if mu_t.size else np.zeros(0)
        sat_fail = (e_xw2 + 2.0 * e_xw * e_w[m] + 2.0 * e_xw + 2.0 * e_w[m]
                    + (2.0 / lam_u ** 2)
                    * (1.0 + lam_u * (1.0 + e_xw + e_w[m])) + 1.0)
        e_w2[m] = (
            (np.sum(mu_t * cov * (1.0 + 2.0 * (1.0 - p_t) * e_w[m]))
             + np.sum(mu_t * (1.0 - cov) * (ey2 + 2.0 * l_t * e_w[m]))
             if mu_t.size else 0.0)
            + idle * (1.0 + 2.0 * e_w[m])
            + beta * mu_sat * p_sat * (gamma + (1.0 - gamma) * sat_fail)
        ) / c[m]
    peak = alpha * (2.0 * e_s + e_w + 1.0)
    return PeakAoiReport(
        ewspaoi=float(np.mean(peak)), rate=c, e_service=e_s, e_wait=e_w,
        e_service2=e_s2, e_wait2=e_w2, peak_contrib=peak, mode=mode,
        gamma=gamma, beta_sat=beta, e_wasted=e_xw)


# ---------------------------------------------------------------------------
# lower bound

@dataclass
class BoundReport:
    value: float
    base_term: float          # (1/2|V|) sum alpha_m
    packing_term: float       # Cauchy-Schwarz term
    allocation: np.ndarray    # gamma_{m,k} actually used


def lower_bound(spec: NetworkSpec, coverage: np.ndarray,
                nu: np.ndarray) -> BoundReport:
    """Universal average-age lower bound for any non-anticipatory policy
    delivering per-node update rates ``nu``.

    Uses the allocation gamma_{m,k} = nu_k f_{m,k} and evaluates

        (1/2|V|) sum_m alpha_m +
        (1/2|V|^2) (sum_m sqrt(alpha_m sum_k l_k g_mk /
                    ((sum_k p_k f_mk)(sum_k g_mk))))^2,

    with sums over the nodes that cover cell m.
    """
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < -1e-12):
        raise ConfigurationError("update rates must be non-negative")
    graph = spec.graph
    n_cells = graph.n_cells
    l = np.array([n.packet_count for n in spec.nodes], dtype=float)
    p = np.array([n.success_prob for n in spec.nodes], dtype=float)
    alloc = nu[:, None] * coverage
    total = 0.0
    for m in range(n_cells):
        cover = coverage[:, m] > 0
        g = alloc[cover, m]
        gsum = g.sum()
        if gsum <= 0:
            raise InfeasibleError(
                f"cell {m} receives no updates under this allocation")
        psum = (p[cover] * coverage[cover, m]).sum()
        lsum = (l[cover] * g).sum()
        total += math.sqrt(graph.weights[m] * lsum / (psum * gsum))
    base = graph.weights.sum() / (2.0 * n_cells)
    packing = total * total / (2.0 * n_cells * n_cells)
    return BoundReport(value=base + packing, base_term=base,
                       packing_term=packing, allocation=alloc)


# ---------------------------------------------------------------------------
# renewal estimates from simulated cycles

def renewal_aoi_from_samples(waits, services):
    """Renewal-reward age estimates from per-cycle (wait, service) slot
    counts of one cell, in cycle order.

    The average uses adjacent-cycle pairing for the cross term:
    E[(W+S)^2]/(2 E[W+S]) + E[S_prev (W+S)]/E[W+S] + 1/2. The mean peak
    is reported under both the bare and the +1 display conventions; the
    bare one matches per-record ages just before reset.
    """
    w = np.asarray(waits, dtype=float)
    s = np.asarray(services, dtype=float)
    if w.size != s.size or w.size < 2:
        raise ConfigurationError("need at least two complete cycles")
    x = w[1:] + s[1:]
    s_prev = s[:-1]
    ex = x.mean()
    avg = float((x * x).mean() / (2 * ex) + (s_prev * x).mean() / ex + 0.5)
    peak_bare = float(2 * s.mean() + w.mean())
    return {
        "avg_aoi": avg,
        "peak_aoi": peak_bare,
        "peak_aoi_plus1": peak_bare + 1.0,
    }


# ---------------------------------------------------------------------------
# sensor-vs-satellite access split

@dataclass
class IoTSatCoefficients:
    """Per-cell numerator/denominator lines of the access-split objective
    J(a) = sum_m (N0_m + N1_m a) / (D0_m + D1_m a) over the satellite
    access share a in [0, 1].
    """

    n0: np.ndarray
    n1: np.ndarray
    d0: np.ndarray
    d1: np.ndarray
    m_other: np.ndarray       # sum of the other sensors' access probs
    k_adv: np.ndarray         # K_m = N1_m D0_m - N0_m D1_m, sign of dJ/da


def iot_sat_coefficients(mu, l, p, lam_a: float, lam_u: float,
                         l_sat: int, p_sat: float) -> IoTSatCoefficients:
    """Coefficient lines for the sensor-only deployment where cell m is
    sensor m's home cell and off-period access sums to one.

    K_m > 0 means the m-th fractional term grows with the satellite
    share (the sensor side is preferable there); K_m < 0 favors the
    satellite. All-positive K picks share 0, all-negative picks 1.
    """
    mu = np.asarray(mu, dtype=float)
    l = np.asarray(l, dtype=float)
    p = np.asarray(p, dtype=float)
    if abs(mu.sum() - 1.0) > 1e-9:
        raise ConfigurationError(
            "sensor access probabilities must sum to 1 in the access-split "
            f"analysis (got {mu.sum()})")
    m_other = mu.sum() - mu
    n0 = 2.0 * lam_a * ((l - 1.0) + m_other)
    n1 = 2.0 * lam_u * ((l_sat - 1.0) - mu * (l - 1.0) - m_other)
    d0 = lam_a * mu * p
    d1 = lam_u * (p_sat - mu * p)
    return IoTSatCoefficients(n0=n0, n1=n1, d0=d0, d1=d1, m_other=m_other,
                              k_adv=n1 * d0 - n0 * d1)


def split_objective(coeffs: IoTSatCoefficients, a) -> float:
    den = coeffs.d0 + coeffs.d1 * np.asarray(a)
    if np.any(den <= 0):
        return math.inf
    return float(np.sum((coeffs.n0 + coeffs.n1 * np.asarray(a)) / den))


def optimal_alpha(coeffs: IoTSatCoefficients, tol: float = 1e-8):
    """Minimizing satellite access share for the split objective.

    dJ/da = sum_m K_m / (D0_m + D1_m a)^2, so a uniform K sign pins the
    optimum to an endpoint (all positive -> 0, all negative -> 1) and
    mixed signs admit an interior optimum found by golden-section
    search. The search stays inside the interval where every
    denominator line is positive.
    """
    k = coeffs.k_adv
    hi = 1.0
    for d0, d1 in zip(coeffs.d0, coeffs.d1):
        if d0 + d1 * hi <= 0:
            # denominator line crosses zero before a = 1
            hi = min(hi, (0.0 - d0) / d1 * (1 - 1e-12))
    if hi <= 0:
        raise NumericError("no positive-denominator interval for the split")
    if np.all(k >= 0):
        return 0.0, "no_sat"
    if np.all(k <= 0):
        return (hi, "all_sat") if hi >= 1.0 else (hi, "interior")
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    lo = 0.0
    a, b = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
    fa, fb = split_objective(coeffs, a), split_objective(coeffs, b)
    while hi - lo > tol:
        if fa <= fb:
            hi, b, fb = b, a, fa
            a = hi - invphi * (hi - lo)
            fa = split_objective(coeffs, a)
        else:
            lo, a, fa = a, b, fb
            b = lo + invphi * (hi - lo)
            fb = split_objective(coeffs, b)
    star = 0.5 * (lo + hi)
    for endpoint in (0.0, 1.0):
        if split_objective(coeffs, endpoint) <= split_objective(coeffs, star):
            star = endpoint
    if star <= tol:
        return 0.0, "no_sat"
    if star >= 1.0 - tol:
        return 1.0, "all_sat"
    return float(star), "interior"


def optimal_alpha_two_cell(coeffs: IoTSatCoefficients):
    """Closed interior optimum for the two-sensor case with mixed K
    signs: the positive root of sqrt|K_1| (D0_2 + a D1_2) =
    sqrt|K_2| (D0_1 + a D1_1). Returns None when it falls outside
    (0, 1) or the signs are not mixed.
    """
    k = coeffs.k_adv
    if k.size != 2 or k[0] * k[1] >= 0:
        return None
    r1, r2 = math.sqrt(abs(k[0])), math.sqrt(abs(k[1]))
    best = None
    for sgn in (1.0, -1.0):
        den = sgn * r2 * coeffs.d1[0] - r1 * coeffs.d1[1]
        if den == 0:
            continue
        a = (r1 * coeffs.d0[1] - sgn * r2 * coeffs.d0[0]) / den
        if 0 < a < 1:
            if best is None or split_objective(coeffs, a) < split_objective(
                    coeffs, best):
                best = float(a)
    return best
