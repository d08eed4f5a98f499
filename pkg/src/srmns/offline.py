"""Deterministic acceptance problem: given customers already accepted and a
count of future arrivals per type, choose how many future arrivals of each
type to accept so as to maximize expected revenue minus expected
compensation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import stats

from .core import Instance
from .pbin import (
    CountDistribution,
    _binom_core,
    binomial_dist,
    convolve,
    dist_of,
    expected_overage,
    tail_with_extra,
)

BRUTE_FORCE_BUDGET = 20_000_000
EXHAUSTIVE_BUDGET = 1_000_000
TIE_TOL = 1e-12
_TABLE_CELLS = 4_000_000


class BudgetExceededError(RuntimeError):
    """An enumeration would exceed its evaluation budget."""


@dataclass(frozen=True, eq=False)
class SolveContext:
    instance: Instance
    x_past: np.ndarray
    nf: np.ndarray

    def __post_init__(self):
        for name in ("x_past", "nf"):
            arr = np.array(getattr(self, name), dtype=np.int64)
            if arr.shape != (self.instance.k,) or np.any(arr < 0):
                raise ValueError(f"{name} must be a nonnegative length-{self.instance.k} vector")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def fresh(cls, instance: Instance, nf) -> "SolveContext":
        return cls(instance, np.zeros(instance.k, dtype=np.int64), nf)

    @cached_property
    def past_dist(self) -> CountDistribution:
        return dist_of(self.instance, self.x_past)


@dataclass(frozen=True, eq=False)
class IndexSolution:
    x: np.ndarray
    threshold: int


def _check_feasible(ctx: SolveContext, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    if x.shape != ctx.nf.shape or np.any(x < 0) or np.any(x > ctx.nf):
        raise ValueError(f"x={x.tolist()} is outside the box [0, {ctx.nf.tolist()}]")
    return x


def objective(ctx: SolveContext, x) -> float:
    x = _check_feasible(ctx, x)
    inst = ctx.instance
    total = ctx.x_past + x
    revenue = float(np.dot(inst.eff_values, total))
    return revenue - expected_overage(dist_of(inst, total), inst.capacity)


def _unconditional(inst: Instance, j: int) -> bool:
    return inst.show_probs[j] == 0.0 or bool(inst.always_accept[j])


def local_opt_check(ctx: SolveContext, x) -> np.ndarray:
    """Per type, whether x_j is the largest best response to the other counts.

    Uses the tail test at B - d_j + 1 for multi-unit demand; with unit demand
    this is the exact marginal-value characterization.
    """
    x = _check_feasible(ctx, x)
    inst = ctx.instance
    total = ctx.x_past + x
    dist = dist_of(inst, total)
    q = inst.critical_ratios
    out = np.zeros(inst.k, dtype=bool)
    for j in range(inst.k):
        c = inst.capacity - int(inst.demands[j]) + 1
        cond_add = x[j] == ctx.nf[j] or dist.tail(c) > q[j]
        if x[j] == 0:
            cond_drop = True
        else:
            fewer = total.copy()
            fewer[j] -= 1
            cond_drop = dist_of(inst, fewer).tail(c) <= q[j]
        out[j] = cond_add and cond_drop
    return out


def max_accept_count(base: CountDistribution, q: float, p: float, d: int, upper: int, B: int) -> int:
    """Largest m in [0, upper] with m = 0 or P[base + d Bin(m-1, p) >= B-d+1] <= q.

    ``base`` must already contain this type's past trials. The tested
    probability is nondecreasing in m, so a binary search suffices.
    """
    if upper <= 0:
        return 0
    if q >= 1.0:
        return int(upper)
    c = B - d + 1

    def ok(m):
        return tail_with_extra(base, m - 1, p, d, c) <= q

    if ok(upper):
        return int(upper)
    lo, hi = 0, int(upper) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def threshold_of(x, nf) -> int:
    """Smallest index t with x = nf before t and x = 0 after t; -1 if none."""
    x, nf = np.asarray(x), np.asarray(nf)
    for t in range(x.size):
        if np.all(x[:t] == nf[:t]) and np.all(x[t + 1:] == 0):
            return t
    return -1


def _index_sweep(ctx: SolveContext, stop_at: int | None = None, past_dist=None) -> np.ndarray:
    inst = ctx.instance
    base = ctx.past_dist if past_dist is None else past_dist
    q, p, d = inst.critical_ratios, inst.show_probs, inst.demands
    x = np.zeros(inst.k, dtype=np.int64)
    last = inst.k - 1 if stop_at is None else stop_at
    for j in range(last + 1):
        n = int(ctx.nf[j])
        if n == 0:
            continue
        if _unconditional(inst, j):
            m = n
        else:
            m = max_accept_count(base, float(q[j]), float(p[j]), int(d[j]), n, inst.capacity)
        x[j] = m
        if m < n:
            break
        if j < last:
            base = convolve(base, binomial_dist(m, float(p[j]), int(d[j])))
    return x


def _require_sorted(inst: Instance):
    if not inst.is_normalized:
        raise ValueError("index solutions need a normalized instance (see core.normalize)")


def solve_index(ctx: SolveContext) -> IndexSolution:
    """Optimal index solution by a greedy sweep in critical-ratio order.

    Each type takes its locally optimal count against everything accepted
    before it; the first type that cannot take all its arrivals becomes the
    threshold and every later type is rejected.
    """
    _require_sorted(ctx.instance)
    x = _index_sweep(ctx)
    return IndexSolution(x, max(threshold_of(x, ctx.nf), 0))


def index_count_for(ctx: SolveContext, j: int, past_dist=None) -> int:
    """Type-j entry of the optimal index solution; skips work past type j."""
    return int(_index_sweep(ctx, stop_at=j, past_dist=past_dist)[j])


def index_reaches(ctx: SolveContext, j: int, need: int, past_dist=None) -> bool:
    """Whether the optimal index solution accepts at least ``need`` of type j.

    Equivalent to ``index_count_for(ctx, j) >= need`` but uses a single tail
    test per type: an earlier type keeps the sweep going only if its full
    count passes, and the tested probability is monotone in the count.
    """
    base = ctx.past_dist if past_dist is None else past_dist
    return _reaches(ctx.instance, ctx.nf, j, need, base)


def _reaches(inst: Instance, nf, j: int, need: int, base: CountDistribution) -> bool:
    if need <= 0:
        return True
    if need > nf[j]:
        return False
    q, p, d = inst.critical_ratios, inst.show_probs, inst.demands
    B = inst.capacity
    for i in range(j + 1):
        n = int(nf[i])
        if n == 0:
            continue
        m = need if i == j else n
        if q[i] < 1.0 and p[i] > 0.0:
            if tail_with_extra(base, m - 1, float(p[i]), int(d[i]), B - int(d[i]) + 1) > q[i]:
                return False
        if i < j:
            base = convolve(base, binomial_dist(n, float(p[i]), int(d[i])))
    return True


def solve_index_exhaustive(ctx: SolveContext, budget: int = EXHAUSTIVE_BUDGET) -> IndexSolution:
    """Enumerate every (threshold, threshold count) pair; oracle for solve_index."""
    _require_sorted(ctx.instance)
    nf = ctx.nf
    if int(np.sum(nf + 1)) > budget:
        raise BudgetExceededError(f"{int(np.sum(nf + 1))} index candidates exceed budget {budget}")
    best, best_key = None, None
    for t in range(nf.size):
        for m in range(int(nf[t]) + 1):
            x = np.zeros_like(nf)
            x[:t] = nf[:t]
            x[t] = m
            val = objective(ctx, x)
            if best is None or val > best_key[0] + TIE_TOL or (
                abs(val - best_key[0]) <= TIE_TOL and (x.sum(), -t) > best_key[1:]
            ):
                best, best_key = x, (val, x.sum(), -t)
    return IndexSolution(best, max(threshold_of(best, nf), 0))


@lru_cache(maxsize=8)
def _binom_table(H: int, p: float) -> np.ndarray:
    y = np.arange(H + 1)
    table = stats.binom.pmf(y[None, :], y[:, None], p)
    table.setflags(write=False)
    return table


def _inner_overages(H: int, p: float, g: np.ndarray) -> np.ndarray:
    """E[g(Bin(m, p))] for m = 0..H."""
    if (H + 1) ** 2 <= _TABLE_CELLS:
        return _binom_table(H, p) @ g
    out = np.empty(H + 1)
    for m in range(H + 1):
        lo, core = _binom_core(m, p)
        out[m] = np.dot(core, g[lo:lo + core.size])
    return out


def bruteforce_box(ctx: SolveContext, prune: bool = True):
    """Per-type enumeration bounds (lo, hi) for the global search.

    With pruning, unconditionally accepted types are pinned at their
    arrival count and each other type is capped at its best response
    against the past alone; a max-total global optimum is locally optimal
    at every type and best responses shrink as the others grow, so no such
    optimum is cut off. The cap is only sound for unit demands.
    """
    inst = ctx.instance
    lo = np.zeros(inst.k, dtype=np.int64)
    hi = ctx.nf.copy()
    if not prune:
        return lo, hi
    unit = bool(np.all(inst.demands == 1))
    for j in range(inst.k):
        if _unconditional(inst, j):
            lo[j] = hi[j]
        elif unit:
            hi[j] = max_accept_count(ctx.past_dist, float(inst.critical_ratios[j]),
                                     float(inst.show_probs[j]), 1, int(hi[j]), inst.capacity)
    return lo, hi


def bruteforce_evaluations(ctx: SolveContext, prune: bool = True) -> int:
    lo, hi = bruteforce_box(ctx, prune)
    return math.prod(int(h - l + 1) for l, h in zip(lo, hi))


def solve_global_bruteforce(ctx: SolveContext, budget: int = BRUTE_FORCE_BUDGET,
                            prune: bool = True) -> np.ndarray:
    """Exact maximizer of the objective; among near-ties, the largest total."""
    return _bruteforce(ctx, budget, prune)[0]


def _bruteforce(ctx: SolveContext, budget: int, prune: bool):
    inst = ctx.instance
    B = inst.capacity
    lo, hi = bruteforce_box(ctx, prune)
    evals = math.prod(int(h - l + 1) for l, h in zip(lo, hi))
    if evals > budget:
        raise BudgetExceededError(f"{evals} objective evaluations exceed budget {budget}")
    eff, p, d = inst.eff_values, inst.show_probs, inst.demands
    inner = int(np.argmax(hi - lo))
    H = int(hi[inner])
    ys = np.arange(H + 1)
    outer = [j for j in range(inst.k) if j != inner]
    start = binomial_dist(int(ctx.x_past[inner]), float(p[inner]), int(d[inner]))
    best = {"val": -np.inf, "total": -1, "x": None}

    def leaf(base, xo):
        total_outer = ctx.x_past + xo
        g = base.overages(B - int(d[inner]) * ys)
        vals = float(np.dot(eff, total_outer)) + eff[inner] * ys - _inner_overages(H, float(p[inner]), g)
        m = int(np.flatnonzero(vals >= vals.max() - TIE_TOL)[-1])
        val, tot = float(vals[m]), int(xo.sum()) + m
        if val > best["val"] + TIE_TOL or (abs(val - best["val"]) <= TIE_TOL and tot > best["total"]):
            x = xo.copy()
            x[inner] = m
            best.update(val=val, total=tot, x=x)

    def walk(pos, base, xo):
        if pos == len(outer):
            leaf(base, xo)
            return
        j = outer[pos]
        for n in range(int(lo[j]), int(hi[j]) + 1):
            xo[j] = n
            law = binomial_dist(int(ctx.x_past[j]) + n, float(p[j]), int(d[j]))
            walk(pos + 1, convolve(base, law), xo)
        xo[j] = 0

    walk(0, start, np.zeros(inst.k, dtype=np.int64))
    return best["x"], best["val"], evals


def best_response(ctx: SolveContext, x, j: int) -> int:
    """Locally optimal count of type j holding the other future counts fixed."""
    inst = ctx.instance
    if _unconditional(inst, j):
        return int(ctx.nf[j])
    others = ctx.x_past + np.asarray(x, dtype=np.int64)
    others[j] = ctx.x_past[j]
    return max_accept_count(dist_of(inst, others), float(inst.critical_ratios[j]),
                            float(inst.show_probs[j]), int(inst.demands[j]),
                            int(ctx.nf[j]), inst.capacity)


def coordinate_ascent(ctx: SolveContext, start) -> np.ndarray:
    """Cyclic best responses from ``start`` until a full pass changes nothing."""
    x = _check_feasible(ctx, start).copy()
    k = ctx.instance.k
    for _ in range(int(ctx.nf.sum()) + k + 1):
        changed = False
        for j in range(k):
            new = best_response(ctx, x, j)
            if new != x[j]:
                x[j] = new
                changed = True
        if not changed:
            break
    return x


def solve_global_ascent(ctx: SolveContext, restarts: int = 5, seed: int = 0) -> np.ndarray:
    """Best coordinate-ascent fixpoint over several starts.

    Starts are the zero vector, the optimal index solution, then uniformly
    random feasible points. A heuristic: the result is a lower bound on the
    global optimum.
    """
    rng = np.random.default_rng(seed)
    starts = [np.zeros_like(ctx.nf), _index_sweep(ctx)]
    while len(starts) < restarts:
        starts.append(rng.integers(0, ctx.nf + 1))
    best, best_key = None, None
    for s in starts[:max(restarts, 1)]:
        x = coordinate_ascent(ctx, s)
        key = (objective(ctx, x), int(x.sum()))
        if best is None or key[0] > best_key[0] + TIE_TOL or (
            abs(key[0] - best_key[0]) <= TIE_TOL and key[1] > best_key[1]
        ):
            best, best_key = x, key
    return best


def sensitivity_shift(ctx: SolveContext, x, j: int, i: int) -> int:
    """How many type-j acceptances to give up after one more type-i acceptance.

    Returns the l >= 0 for which x + e_i - l e_j is locally optimal at j.
    """
    x = _check_feasible(ctx, x)
    if not local_opt_check(ctx, x)[j]:
        raise ValueError(f"x is not locally optimal at type {j}")
    bumped = x.copy()
    bumped[i] += 1
    _check_feasible(ctx, bumped)
    shift = int(bumped[j]) - best_response(ctx, bumped, j)
    assert shift >= 0, "best responses are monotone in the other counts"
    return shift


def partial_types(x, nf) -> int:
    """Number of types accepted partially (0 < x_j < nf_j)."""
    x, nf = np.asarray(x), np.asarray(nf)
    return int(np.sum((x > 0) & (x < nf)))


def exchange_radius(ctx: SolveContext, x, i: int, j: int, r_max: int = 200):
    """Smallest R <= r_max, with R/p_i and R/p_j integral, such that adding
    R/p_i type-i customers beats adding R/p_j type-j customers; None if none.
    """
    inst = ctx.instance
    pi, pj = float(inst.show_probs[i]), float(inst.show_probs[j])
    x = np.asarray(x, dtype=np.int64)
    for R in range(1, r_max + 1):
        ni, nj = R / pi, R / pj
        if abs(ni - round(ni)) > 1e-9 or abs(nj - round(nj)) > 1e-9:
            continue
        xi, xj = x.copy(), x.copy()
        xi[i] += round(ni)
        xj[j] += round(nj)
        if np.any(xi > ctx.nf) or np.any(xj > ctx.nf):
            return None
        if objective(ctx, xi) > objective(ctx, xj):
            return R
    return None
