"""Exact law of the resource units consumed by accepted customers.

Each accepted type-j customer independently shows up with probability p_j
and then consumes d_j units, so total consumption is a weighted
Poisson-Binomial variable. Distributions are stored as a contiguous pmf
window ``pmf`` starting at ``offset``; entries below ``TRIM`` at either end
are dropped, which keeps the arrays at O(sqrt(n)) width without moving any
reported probability by more than ~1e-17.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import stats

from .core import Instance

TRIM = 1e-20
# below this, n * p < TRIM for any realistic n, so the trimmed law is a point mass at 0
TINY_P = 1e-250
NEG_TOL = 1e-15
MASS_TOL = 1e-10


class DistributionError(ArithmeticError):
    """A pmf drifted away from total mass one (a bug, not rounding)."""


@dataclass(frozen=True, eq=False)
class CountDistribution:
    pmf: np.ndarray
    offset: int = 0
    s_max: int | None = None

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        if pmf.ndim != 1 or pmf.size == 0:
            raise DistributionError("pmf must be a nonempty 1-d array")
        if pmf.min() < -NEG_TOL:
            raise DistributionError(f"negative probability {pmf.min():.3g}")
        pmf = np.clip(pmf, 0.0, None)
        if abs(pmf.sum() - 1.0) > MASS_TOL:
            raise DistributionError(f"pmf sums to {pmf.sum():.15g}")
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)
        object.__setattr__(self, "offset", int(self.offset))
        top = self.offset + pmf.size - 1
        object.__setattr__(self, "s_max", top if self.s_max is None else int(self.s_max))

    @cached_property
    def _suffix(self) -> np.ndarray:
        # suffix[i] = P[X >= offset + i]; summed from the top to keep tails accurate
        out = np.zeros(self.pmf.size + 1)
        out[:-1] = np.cumsum(self.pmf[::-1])[::-1]
        return out

    @cached_property
    def _tail_full(self) -> np.ndarray:
        # P[X >= s] for s = 0 .. offset + size - 1; zero beyond
        out = np.empty(self.offset + self.pmf.size)
        out[:self.offset + 1] = self._suffix[0]
        out[self.offset:] = self._suffix[:-1]
        out[0] = 1.0
        return out

    @cached_property
    def _suffix_sum(self) -> np.ndarray:
        # suffix_sum[i] = sum_{i' >= i} suffix[i']
        return np.cumsum(self._suffix[::-1])[::-1]

    @cached_property
    def mean(self) -> float:
        return float(self.offset + np.dot(np.arange(self.pmf.size), self.pmf))

    def full(self) -> np.ndarray:
        """pmf over the nominal support 0..s_max."""
        out = np.zeros(self.s_max + 1)
        out[self.offset:self.offset + self.pmf.size] = self.pmf
        return out

    def tail(self, m: int) -> float:
        """P[X >= m]."""
        if m <= 0:
            return 1.0
        i = m - self.offset
        if i <= 0:
            return float(self._suffix[0])
        if i >= self.pmf.size:
            return 0.0
        return float(self._suffix[i])

    def tails(self, ms: np.ndarray) -> np.ndarray:
        """Vectorized ``tail`` over an integer array of thresholds."""
        ms = np.asarray(ms)
        idx = np.clip(ms - self.offset, 0, self.pmf.size)
        return np.where(ms <= 0, 1.0, self._suffix[idx])

    def overages(self, ts: np.ndarray) -> np.ndarray:
        """E[(X - t)^+] for each integer t in ``ts``."""
        ts = np.asarray(ts)
        idx = np.clip(ts + 1 - self.offset, 0, self.pmf.size)
        return np.where(ts < self.offset, self.mean - ts, self._suffix_sum[idx])


def _trim(pmf: np.ndarray, offset: int):
    keep = np.flatnonzero(pmf > TRIM)
    if keep.size == 0:
        raise DistributionError("all probability mass below the trim threshold")
    lo, hi = keep[0], keep[-1] + 1
    return pmf[lo:hi], offset + int(lo)


def point_mass(s: int = 0) -> CountDistribution:
    return CountDistribution(np.ones(1), s, s)


@lru_cache(maxsize=100_000)
def _binom_core(n: int, p: float):
    """Trimmed Bin(n, p) pmf as (first support point, read-only array)."""
    if n == 0 or p < TINY_P:
        lo, pmf = 0, np.ones(1)
    elif p == 1.0:
        lo, pmf = n, np.ones(1)
    else:
        pmf, lo = _trim(stats.binom.pmf(np.arange(n + 1), n, p), 0)
        pmf = pmf / pmf.sum() if abs(pmf.sum() - 1.0) > 1e-14 else pmf
    pmf.setflags(write=False)
    return lo, pmf


@lru_cache(maxsize=100_000)
def binomial_dist(n: int, p: float, d: int = 1) -> CountDistribution:
    """Law of d * Bin(n, p)."""
    if n < 0 or not 0.0 <= p <= 1.0 or d < 1:
        raise ValueError(f"bad binomial parameters n={n}, p={p}, d={d}")
    lo, core = _binom_core(int(n), float(p))
    if d == 1:
        return CountDistribution(core, lo, n)
    pmf = np.zeros((core.size - 1) * d + 1)
    pmf[::d] = core
    return CountDistribution(pmf, lo * d, n * d)


def convolve(a: CountDistribution, b: CountDistribution) -> CountDistribution:
    """Law of the sum of two independent counts."""
    if a.pmf.size == 1 and a.pmf[0] == 1.0:
        return CountDistribution(b.pmf, b.offset + a.offset, b.s_max + a.s_max)
    if b.pmf.size == 1 and b.pmf[0] == 1.0:
        return CountDistribution(a.pmf, a.offset + b.offset, a.s_max + b.s_max)
    pmf, off = _trim(np.convolve(a.pmf, b.pmf), a.offset + b.offset)
    return CountDistribution(pmf, off, a.s_max + b.s_max)


def dist_of(instance: Instance, x) -> CountDistribution:
    """Law of sum_j d_j Bin(x_j, p_j)."""
    out = point_mass(0)
    for j, n in enumerate(np.asarray(x).tolist()):
        if n < 0:
            raise ValueError("acceptance counts must be nonnegative")
        if n:
            out = convolve(out, binomial_dist(n, float(instance.show_probs[j]), int(instance.demands[j])))
    return out


def tail_prob(dist: CountDistribution, m: int) -> float:
    return dist.tail(m)


def expected_overage(dist: CountDistribution, B: int) -> float:
    """E[(X - B)^+], the expected total compensation at capacity B."""
    if B < 0:
        raise ValueError("capacity must be nonnegative")
    if dist.s_max <= B:
        return 0.0
    s = dist.offset + np.arange(dist.pmf.size)
    return float(np.dot(np.maximum(s - B, 0), dist.pmf))


def expected_overage_tailsum(dist: CountDistribution, B: int) -> float:
    """Same quantity as a sum of survival probabilities, sum_{s>=B} P[X > s]."""
    if dist.s_max <= B:
        return 0.0
    return float(sum(dist.tail(s + 1) for s in range(B, dist.s_max + 1)))


def tail_with_extra(base: CountDistribution, n: int, p: float, d: int, m: int) -> float:
    """P[base + d * Bin(n, p) >= m] without materializing the convolution."""
    lo, core = _binom_core(int(n), float(p))
    tf = base._tail_full
    size = core.size
    top = m - d * lo
    # term i reads P[base >= top - d*i]: zero above tf, one below zero
    first = min(size, max(0, -(-(top - tf.size + 1) // d)))
    neg = min(size, max(0, top // d + 1))
    acc = 0.0
    if first < neg:
        s_hi, s_lo = top - d * first, top - d * (neg - 1)
        acc = float(np.dot(core[first:neg], tf[s_lo:s_hi + 1:d][::-1]))
    if neg < size:
        acc += float(_core_suffix(int(n), float(p))[neg])
    return acc


@lru_cache(maxsize=100_000)
def _core_suffix(n: int, p: float) -> np.ndarray:
    core = _binom_core(n, p)[1]
    out = np.cumsum(core[::-1])[::-1]
    out.setflags(write=False)
    return out


class DistributionCache:
    """Per-type binomials for a count vector plus their convolution.

    Removing a trial re-folds the cached per-type laws instead of
    deconvolving, which is unstable.
    """

    def __init__(self, instance: Instance, counts=None):
        self.instance = instance
        self.counts = np.zeros(instance.k, dtype=np.int64) if counts is None else np.array(counts, dtype=np.int64)
        self.per_type = [self._law(j) for j in range(instance.k)]
        self.combined = self._fold()

    def _law(self, j):
        inst = self.instance
        return binomial_dist(int(self.counts[j]), float(inst.show_probs[j]), int(inst.demands[j]))

    def _fold(self):
        out = point_mass(0)
        for law in self.per_type:
            out = convolve(out, law)
        return out

    def update(self, j: int, delta: int = 1) -> "DistributionCache":
        if self.counts[j] + delta < 0:
            raise ValueError(f"count of type {j} would become negative")
        self.counts[j] += delta
        self.per_type[j] = self._law(j)
        self.combined = self._fold()
        return self


def cache_update(cache: DistributionCache, j: int, delta: int) -> DistributionCache:
    return cache.update(j, delta)
