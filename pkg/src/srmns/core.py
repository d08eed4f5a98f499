"""Problem instances and arrival sequences.

Types are indexed from 0 internally. A normalized instance lists types in
decreasing critical ratio; ``perm`` maps each sorted position back to the
type's position in the caller's input order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from functools import cached_property

import numpy as np

PROB_TOL = 1e-12
RATIO_DECIMALS = 12


class InstanceError(ValueError):
    """Raised when instance parameters are out of range."""


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    arrival_probs: np.ndarray
    values: np.ndarray
    show_probs: np.ndarray
    capacity: int
    horizon: int
    refunds: np.ndarray = None
    demands: np.ndarray = None
    perm: np.ndarray = None

    def __post_init__(self):
        lam = _frozen(self.arrival_probs, float)
        k = lam.shape[0]
        refunds = np.zeros(k) if self.refunds is None else self.refunds
        demands = np.ones(k, dtype=int) if self.demands is None else self.demands
        perm = np.arange(k) if self.perm is None else self.perm
        object.__setattr__(self, "arrival_probs", lam)
        object.__setattr__(self, "values", _frozen(self.values, float))
        object.__setattr__(self, "show_probs", _frozen(self.show_probs, float))
        object.__setattr__(self, "refunds", _frozen(refunds, float))
        object.__setattr__(self, "demands", _frozen(demands, np.int64))
        object.__setattr__(self, "perm", _frozen(perm, np.int64))
        object.__setattr__(self, "capacity", int(self.capacity))
        object.__setattr__(self, "horizon", int(self.horizon))
        self._validate()

    def _validate(self):
        lam, v, p = self.arrival_probs, self.values, self.show_probs
        r, d = self.refunds, self.demands
        k = lam.shape[0]
        if k < 1 or lam.ndim != 1:
            raise InstanceError("need at least one customer type")
        for name, arr in (("v", v), ("p", p), ("r", r), ("d", d), ("perm", self.perm)):
            if arr.shape != (k,):
                raise InstanceError(f"{name} must have length {k}")
        if np.any(lam <= 0) or abs(lam.sum() - 1.0) > PROB_TOL:
            raise InstanceError("arrival probabilities must be positive and sum to 1")
        if np.any(p < 0) or np.any(p > 1):
            raise InstanceError("show probabilities must lie in [0, 1]")
        if np.any(v < 0) or np.any(v >= 1):
            raise InstanceError("values must lie in [0, 1)")
        if np.any(r < 0) or np.any((r > 0) & (r >= v)):
            raise InstanceError("refunds must satisfy 0 <= r < v (or r = 0)")
        if np.any(d < 1):
            raise InstanceError("demands must be positive integers")
        if sorted(self.perm.tolist()) != list(range(k)):
            raise InstanceError("perm must be a permutation of the type indices")
        if self.capacity < 0:
            raise InstanceError("capacity must be nonnegative")
        if self.horizon < 1:
            raise InstanceError("horizon must be positive")

    @property
    def k(self) -> int:
        return self.arrival_probs.shape[0]

    @cached_property
    def eff_values(self) -> np.ndarray:
        """Expected revenue per accepted customer after no-show refunds."""
        return _frozen(self.values - self.refunds * (1.0 - self.show_probs), float)

    @cached_property
    def critical_ratios(self) -> np.ndarray:
        denom = self.demands * self.show_probs
        safe = np.where(denom > 0, denom, 1.0)
        with np.errstate(over="ignore"):
            return _frozen(np.where(denom > 0, self.eff_values / safe, np.inf), float)

    @cached_property
    def always_accept(self) -> np.ndarray:
        return _frozen(self.critical_ratios >= 1.0, bool)

    def sort_key(self, j: int):
        # ratios are compared at 12 decimals so that 0.1/0.5 and 0.06/0.3 tie
        q = self.critical_ratios[j]
        q = round(float(q), RATIO_DECIMALS) if np.isfinite(q) else np.inf
        return (-q, -self.eff_values[j], -self.show_probs[j], int(self.perm[j]))

    @property
    def is_normalized(self) -> bool:
        order = sorted(range(self.k), key=self.sort_key)
        return order == list(range(self.k))

    def to_input_order(self, x) -> np.ndarray:
        """Reorder a per-type vector from sorted order into input order."""
        x = np.asarray(x)
        out = np.empty_like(x)
        out[self.perm] = x
        return out

    def from_input_order(self, x) -> np.ndarray:
        return np.asarray(x)[self.perm]

    def with_horizon(self, horizon: int, capacity: int | None = None) -> "Instance":
        return Instance(
            self.arrival_probs, self.values, self.show_probs,
            self.capacity if capacity is None else capacity, horizon,
            self.refunds, self.demands, self.perm,
        )

    def to_dict(self) -> dict:
        """Instance file document, arrays in input order."""
        order = np.argsort(self.perm)
        doc = {
            "lambda": self.arrival_probs[order].tolist(),
            "v": self.values[order].tolist(),
            "p": self.show_probs[order].tolist(),
            "B": self.capacity,
            "T": self.horizon,
        }
        if np.any(self.refunds != 0):
            doc["r"] = self.refunds[order].tolist()
        if np.any(self.demands != 1):
            doc["d"] = self.demands[order].tolist()
        return doc


def normalize(raw: Instance) -> Instance:
    """Sort types by critical ratio (desc), then value, then show probability.

    The returned instance's ``perm`` composes with the input's, so repeated
    normalization is a no-op and results can always be mapped back to the
    original input order.
    """
    order = sorted(range(raw.k), key=raw.sort_key)
    return Instance(
        raw.arrival_probs[order], raw.values[order], raw.show_probs[order],
        raw.capacity, raw.horizon, raw.refunds[order], raw.demands[order],
        raw.perm[order],
    )


def make_instance(lam, v, p, B, T, r=None, d=None) -> Instance:
    """Validate raw parameters (input order) and return the normalized instance."""
    return normalize(Instance(lam, v, p, B, T, r, d))


def instance_from_dict(doc: dict) -> Instance:
    try:
        return make_instance(doc["lambda"], doc["v"], doc["p"], doc["B"], doc["T"],
                             doc.get("r"), doc.get("d"))
    except KeyError as exc:
        raise InstanceError(f"instance document is missing field {exc}") from None


def load_instance(path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text()))


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(inst.to_dict(), indent=2) + "\n")


@dataclass(frozen=True, eq=False)
class ArrivalSequence:
    """Arrival types A_1..A_T (0-based type indices) for a k-type instance."""

    types: np.ndarray
    k: int
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        types = _frozen(self.types, np.int64)
        if types.ndim != 1 or types.size == 0:
            raise ValueError("arrival sequence must be a nonempty 1-d array")
        if types.min() < 0 or types.max() >= self.k:
            raise ValueError("arrival types out of range")
        onehot = np.zeros((types.size + 1, self.k), dtype=np.int64)
        onehot[np.arange(1, types.size + 1), types] = 1
        cum = np.cumsum(onehot, axis=0)
        cum.setflags(write=False)
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "_cum", cum)

    @property
    def T(self) -> int:
        return self.types.size

    def count_window(self, t1: int, t2: int) -> np.ndarray:
        """Per-type arrival counts over periods t1..t2 (1-based, inclusive)."""
        if not 1 <= t1 <= t2 <= self.T:
            raise ValueError(f"window [{t1}, {t2}] outside [1, {self.T}]")
        return self._cum[t2] - self._cum[t1 - 1]

    def counts(self) -> np.ndarray:
        return self._cum[-1].copy()

    def future_counts(self, t: int) -> np.ndarray:
        """Counts over periods t..T; zero vector when t > T."""
        return self._cum[-1] - self._cum[t - 1] if t <= self.T else np.zeros(self.k, dtype=np.int64)


def count_window(A: ArrivalSequence, t1: int, t2: int) -> np.ndarray:
    return A.count_window(t1, t2)


def sample_arrivals(instance: Instance, seed) -> ArrivalSequence:
    """Draw T iid arrival types with probabilities lambda.

    ``seed`` may be anything ``numpy.random.default_rng`` accepts.
    """
    rng = np.random.default_rng(seed)
    types = rng.choice(instance.k, size=instance.horizon, p=instance.arrival_probs)
    return ArrivalSequence(types, instance.k)
