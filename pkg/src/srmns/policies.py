"""Online accept/reject policies.

Every policy consumes an ``ArrivalSequence`` period by period and returns a
``PolicyTrace``. The online index policy re-solves the index problem in each
period against a single sampled forecast of the remaining arrivals; DLP and
DPD are the bid-price and aggregated-state DP baselines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ArrivalSequence, Instance, sample_arrivals
from .offline import SolveContext, _reaches, solve_index
from .pbin import CountDistribution, binomial_dist, convolve, expected_overage


RATIO_TOL = 1e-12


class DegeneratePolicyError(RuntimeError):
    """A policy is undefined for this instance (e.g. DLP rejects everyone)."""


@dataclass(frozen=True, eq=False)
class PolicyTrace:
    policy: str
    arrivals: ArrivalSequence
    decisions: np.ndarray
    x_series: np.ndarray

    @property
    def final_x(self) -> np.ndarray:
        return self.x_series[-1]

    def x_at(self, t: int) -> np.ndarray:
        """Accepted counts after period t (t = 0 is before any arrival)."""
        return self.x_series[t]

    def rows(self):
        """(period, arrival type, accepted) triples, periods 1-based."""
        return [(t + 1, int(j), bool(a))
                for t, (j, a) in enumerate(zip(self.arrivals.types, self.decisions))]


def _trace(name: str, A: ArrivalSequence, decisions) -> PolicyTrace:
    decisions = np.asarray(decisions, dtype=bool)
    steps = np.zeros((A.T + 1, A.k), dtype=np.int64)
    steps[np.flatnonzero(decisions) + 1, A.types[decisions]] = 1
    x_series = np.cumsum(steps, axis=0)
    decisions.setflags(write=False)
    x_series.setflags(write=False)
    return PolicyTrace(name, A, decisions, x_series)


def _check_path(instance: Instance, A: ArrivalSequence):
    if A.k != instance.k or A.T != instance.horizon:
        raise ValueError(f"arrival sequence (k={A.k}, T={A.T}) does not match the instance")


def run_online_index(instance: Instance, A: ArrivalSequence, seed) -> PolicyTrace:
    """Re-solve the index problem each period against one sampled forecast.

    In period t with a type-j arrival, future counts are taken from a forecast
    sequence drawn once per run (plus the current arrival) and the arrival is
    accepted iff the index solution keeps at least half of the type-j count.
    """
    _check_path(instance, A)
    forecast = sample_arrivals(instance, seed)
    T, k = A.T, instance.k
    p, d = instance.show_probs, instance.demands
    unconditional = (p == 0) | instance.always_accept
    x = np.zeros(k, dtype=np.int64)
    past = binomial_dist(0, 0.0)
    decisions = np.zeros(T, dtype=bool)
    for t in range(T):
        j = int(A.types[t])
        if unconditional[j]:
            accept = True
        else:
            nf = forecast.future_counts(t + 2)
            nf[j] += 1
            accept = _reaches(instance, nf, j, (int(nf[j]) + 1) // 2, past)
        if accept:
            decisions[t] = True
            x[j] += 1
            past = convolve(past, binomial_dist(1, float(p[j]), int(d[j])))
    return _trace("online_index", A, decisions)


def run_clairvoyant_index(instance: Instance, A: ArrivalSequence) -> PolicyTrace:
    """Replay the hindsight index solution: accept the first x*_j type-j arrivals."""
    _check_path(instance, A)
    target = solve_index(SolveContext.fresh(instance, A.counts())).x
    seen = np.zeros(instance.k, dtype=np.int64)
    decisions = np.zeros(A.T, dtype=bool)
    for t, j in enumerate(A.types):
        decisions[t] = seen[j] < target[j]
        seen[j] += 1
    return _trace("clairvoyant_index", A, decisions)


def dlp_dual(instance: Instance) -> float:
    """Capacity dual of the fluid relaxation, solved as a fractional knapsack.

    Types are filled in decreasing critical ratio by their expected
    consumption T lambda_j d_j p_j. The price is the (capped) ratio of the
    first type that overflows capacity, or 0 when everything fits. At an exact
    fit the smallest optimal dual is returned.
    """
    T, B = instance.horizon, instance.capacity
    used = 0.0
    for j in range(instance.k):
        load = T * instance.arrival_probs[j] * instance.demands[j] * instance.show_probs[j]
        if load == 0:
            continue
        used += load
        if used > B:
            return float(min(instance.critical_ratios[j], 1.0))
    return 0.0


def dlp_accepts(instance: Instance, price: float | None = None) -> np.ndarray:
    """Types whose value covers their expected consumption at the dual price.

    ``v_j >= d_j p_j price`` is tested as ``q_j >= price`` so that the
    marginal type, whose ratio is the price itself, is not lost to rounding.
    """
    price = dlp_dual(instance) if price is None else price
    return instance.critical_ratios >= price - RATIO_TOL


def run_dlp(instance: Instance, A: ArrivalSequence, price: float | None = None) -> PolicyTrace:
    _check_path(instance, A)
    accepts = dlp_accepts(instance, price)
    return _trace("dlp", A, accepts[A.types])


def estimate_alpha(instance: Instance, M: int = 100, seed=0, price: float | None = None) -> np.ndarray:
    """Share of each type among DLP acceptances, pooled over M sampled paths."""
    if M < 1:
        raise ValueError("need at least one sample path")
    accepts = dlp_accepts(instance, price)
    totals = np.zeros(instance.k, dtype=np.int64)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    for child in root.spawn(M):
        totals += run_dlp(instance, sample_arrivals(instance, child), price).final_x
    if not accepts.any() or totals.sum() == 0:
        raise DegeneratePolicyError("DLP accepts no customers, so acceptance shares are undefined")
    return totals / totals.sum()


@dataclass(frozen=True, eq=False)
class DpdTable:
    """U[s, x]: value to go with s periods elapsed and x customers accepted.

    Row T is the terminal penalty; period t (1-based) decides with row t.
    """

    alpha: np.ndarray
    U: np.ndarray

    def marginal_cost(self, t: int, x: int) -> float:
        return float(self.U[t, x] - self.U[t, x + 1])


def _type_mixture(n_lo: int, w_lo: float, p: float, d: int) -> CountDistribution:
    """w_lo * law(d Bin(n_lo, p)) + (1 - w_lo) * law(d Bin(n_lo + 1, p))."""
    a = binomial_dist(n_lo, p, d)
    if w_lo >= 1.0:
        return a
    b = binomial_dist(n_lo + 1, p, d)
    lo = min(a.offset, b.offset)
    hi = max(a.offset + a.pmf.size, b.offset + b.pmf.size)
    pmf = np.zeros(hi - lo)
    pmf[a.offset - lo:a.offset - lo + a.pmf.size] += w_lo * a.pmf
    pmf[b.offset - lo:b.offset - lo + b.pmf.size] += (1.0 - w_lo) * b.pmf
    return CountDistribution(pmf, lo, b.s_max)


def aggregated_overage(instance: Instance, alpha, x: int) -> float:
    """Expected overage when x accepted customers split by shares alpha."""
    law = binomial_dist(0, 0.0)
    for j, a in enumerate(alpha):
        share = x * float(a)
        n_lo = int(np.floor(share))
        w_lo = n_lo + 1 - share
        law = convolve(law, _type_mixture(n_lo, w_lo, float(instance.show_probs[j]),
                                          int(instance.demands[j])))
    return expected_overage(law, instance.capacity)


def dpd_table(instance: Instance, alpha) -> DpdTable:
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (instance.k,) or np.any(alpha < 0) or abs(alpha.sum() - 1.0) > 1e-10:
        raise ValueError("alpha must be a length-k probability vector")
    T = instance.horizon
    U = np.empty((T + 1, T + 1))
    U[T] = [-aggregated_overage(instance, alpha, x) for x in range(T + 1)]
    lam, v = instance.arrival_probs, instance.eff_values
    for s in range(T - 1, -1, -1):
        nxt = U[s + 1]
        up = np.append(nxt[1:], -np.inf)
        U[s] = np.sum(lam[:, None] * np.maximum(v[:, None] + up[None, :], nxt[None, :]), axis=0)
    alpha.setflags(write=False)
    U.setflags(write=False)
    return DpdTable(alpha, U)


def run_dpd(instance: Instance, A: ArrivalSequence, table: DpdTable) -> PolicyTrace:
    _check_path(instance, A)
    if table.U.shape != (A.T + 1, A.T + 1):
        raise ValueError("table was built for a different horizon")
    v = instance.eff_values
    total = 0
    decisions = np.zeros(A.T, dtype=bool)
    for t, j in enumerate(A.types):
        if v[j] >= table.marginal_cost(t + 1, total):
            decisions[t] = True
            total += 1
    return _trace("dpd", A, decisions)


def run_expected_greedy(instance: Instance, A: ArrivalSequence) -> PolicyTrace:
    """Accept while expected consumption stays within capacity."""
    _check_path(instance, A)
    use = instance.demands * instance.show_probs
    load = 0.0
    decisions = np.zeros(A.T, dtype=bool)
    for t, j in enumerate(A.types):
        if load + use[j] <= instance.capacity + 1e-12:
            decisions[t] = True
            load += use[j]
    return _trace("expected_greedy", A, decisions)
