"""Simulation harness: scoring, hindsight coupling traces, and replicated
loss experiments with common random numbers."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import ArrivalSequence, Instance, sample_arrivals
from .offline import (
    BRUTE_FORCE_BUDGET,
    SolveContext,
    _bruteforce,
    bruteforce_evaluations,
    objective,
    solve_global_ascent,
    solve_index,
)
from .pbin import dist_of, expected_overage
from .policies import (
    PolicyTrace,
    dpd_table,
    estimate_alpha,
    run_clairvoyant_index,
    run_dlp,
    run_dpd,
    run_expected_greedy,
    run_online_index,
)

__all__ = [
    "sample_arrivals", "eval_expected", "eval_realized", "CouplingTrace", "coupling_trace",
    "clairvoyant_general", "ExperimentConfig", "LossReport", "run_replications",
    "loglog_slope", "linear_slope_ci",
]

POLICIES = ("online_index", "dlp", "dpd", "expected_greedy")
BENCHMARKS = ("clairvoyant_index", "clairvoyant_general")
TELESCOPE_TOL = 1e-9


def eval_expected(instance: Instance, x) -> float:
    """Expected revenue minus expected compensation of a final acceptance vector."""
    x = np.asarray(x, dtype=np.int64)
    revenue = float(np.dot(instance.eff_values, x))
    return revenue - expected_overage(dist_of(instance, x), instance.capacity)


def eval_realized(instance: Instance, x, seed) -> float:
    """One draw of show-ups: realized revenue minus realized compensation."""
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=np.int64)
    shows = rng.binomial(x, instance.show_probs)
    # refunds are paid to no-shows, so realized revenue is v x - r (x - shows)
    revenue = float(np.dot(instance.values, x) - np.dot(instance.refunds, x - shows))
    used = int(np.dot(instance.demands, shows))
    return revenue - max(used - instance.capacity, 0)


@dataclass(frozen=True, eq=False)
class CouplingTrace:
    H: np.ndarray
    per_period_loss: np.ndarray

    @property
    def loss_event_count(self) -> int:
        return int(np.sum(self.per_period_loss > 0))

    @property
    def total_loss(self) -> float:
        return float(self.H[0] - self.H[-1])


def coupling_trace(instance: Instance, A: ArrivalSequence, trace: PolicyTrace,
                   max_step: float | None = None) -> CouplingTrace:
    """Hindsight index objective H[t] given the policy's first t-1 decisions.

    ``H[t-1]`` in the returned array is the value for period t. Checks the
    telescoping identity, the per-step bound, and, for the online index
    policy, that the last value equals the policy's own objective.
    """
    if trace.arrivals is not A and not np.array_equal(trace.arrivals.types, A.types):
        raise ValueError("trace was produced on a different arrival sequence")
    H = np.empty(A.T)
    for t in range(1, A.T + 1):
        ctx = SolveContext(instance, trace.x_at(t - 1), A.future_counts(t))
        H[t - 1] = objective(ctx, solve_index(ctx).x)
    losses = H[:-1] - H[1:]
    if abs((H[0] - H[-1]) - losses.sum()) > TELESCOPE_TOL:
        raise ArithmeticError("hindsight objectives fail to telescope")
    step = float(max(instance.demands.max(), 1)) if max_step is None else max_step
    if np.any(losses > step + TELESCOPE_TOL):
        raise ArithmeticError("a single period lost more than the per-step bound")
    if trace.policy == "online_index":
        final = eval_expected(instance, trace.final_x)
        if abs(H[-1] - final) > TELESCOPE_TOL:
            raise ArithmeticError(f"last hindsight value {H[-1]} != policy objective {final}")
    H.setflags(write=False)
    losses.setflags(write=False)
    return CouplingTrace(H, losses)


GENERAL_SOLVERS = ("auto", "bruteforce", "ascent")


def clairvoyant_general(instance: Instance, counts, budget: int = BRUTE_FORCE_BUDGET,
                        seed: int = 0, solver: str = "auto"):
    """Hindsight optimum: exact enumeration inside the budget, else ascent.

    Returns (x, exact) where ``exact`` is False when the heuristic was used.
    ``solver`` forces one method; forced enumeration still honors the budget.
    """
    ctx = SolveContext.fresh(instance, counts)
    if solver == "bruteforce":
        return _bruteforce(ctx, budget, prune=True)[0], True
    if solver == "auto" and bruteforce_evaluations(ctx, prune=True) <= budget:
        return _bruteforce(ctx, budget, prune=True)[0], True
    return solve_global_ascent(ctx, seed=seed), False


@dataclass(frozen=True)
class ExperimentConfig:
    instance: Instance
    policies: tuple = ("online_index",)
    benchmark: str = "clairvoyant_index"
    reps: int = 100
    seed: int = 0
    budget: int = BRUTE_FORCE_BUDGET
    workers: int = 1
    alpha_paths: int = 100
    general_solver: str = "auto"
    label: str = ""

    def __post_init__(self):
        unknown = set(self.policies) - set(POLICIES) - set(BENCHMARKS)
        if unknown:
            raise ValueError(f"unknown policies {sorted(unknown)}")
        if self.benchmark not in BENCHMARKS:
            raise ValueError(f"benchmark must be one of {BENCHMARKS}")
        if self.general_solver not in GENERAL_SOLVERS:
            raise ValueError(f"general_solver must be one of {GENERAL_SOLVERS}")
        if self.reps < 1 or self.workers < 1:
            raise ValueError("reps and workers must be positive")

    @property
    def evaluated(self) -> tuple:
        names = [self.benchmark] + [p for p in self.policies if p != self.benchmark]
        return tuple(names)


@dataclass(frozen=True, eq=False)
class LossReport:
    T: int
    B: int
    benchmark: str
    names: tuple
    objectives: dict
    solver_used: dict = field(default_factory=dict)
    label: str = ""

    @property
    def reps(self) -> int:
        return int(self.objectives[self.benchmark].size)

    def mean(self, name: str) -> float:
        return float(self.objectives[name].mean())

    def stderr(self, name: str) -> float:
        a = self.objectives[name]
        return float(a.std(ddof=1) / np.sqrt(a.size)) if a.size > 1 else 0.0

    def losses(self, name: str) -> np.ndarray:
        """Per-replication benchmark minus policy objective."""
        return self.objectives[self.benchmark] - self.objectives[name]

    def abs_loss(self, name: str) -> float:
        return float(self.losses(name).mean())

    def abs_loss_stderr(self, name: str) -> float:
        a = self.losses(name)
        return float(a.std(ddof=1) / np.sqrt(a.size)) if a.size > 1 else 0.0

    def rel_loss(self, name: str) -> float:
        bench = self.mean(self.benchmark)
        return 1.0 - self.mean(name) / bench if bench != 0 else float("nan")

    def rows(self) -> list:
        return [
            {
                "T": self.T, "B": self.B, "policy": name,
                "mean_obj": self.mean(name), "stderr": self.stderr(name),
                "abs_loss": self.abs_loss(name), "abs_loss_stderr": self.abs_loss_stderr(name),
                "rel_loss": self.rel_loss(name),
            }
            for name in self.names
        ]


def _replicate(args):
    config, dpd, rep_seed = args
    inst = config.instance
    path_seed, forecast_seed, solver_seed = rep_seed.spawn(3)
    A = sample_arrivals(inst, path_seed)
    out, exact = {}, None
    for name in config.evaluated:
        if name == "clairvoyant_index":
            x = run_clairvoyant_index(inst, A).final_x
        elif name == "clairvoyant_general":
            x, exact = clairvoyant_general(inst, A.counts(), config.budget,
                                           int(solver_seed.generate_state(1)[0]),
                                           config.general_solver)
        elif name == "online_index":
            x = run_online_index(inst, A, forecast_seed).final_x
        elif name == "dlp":
            x = run_dlp(inst, A).final_x
        elif name == "dpd":
            x = run_dpd(inst, A, dpd).final_x
        else:
            x = run_expected_greedy(inst, A).final_x
        out[name] = eval_expected(inst, x)
    return out, exact


def run_replications(config: ExperimentConfig) -> LossReport:
    """Score every policy and the benchmark on the same sampled paths.

    Replication r uses child r of ``SeedSequence(config.seed)`` for its
    arrivals, forecast and solver seeds, so results do not depend on the
    worker count.
    """
    inst = config.instance
    root = np.random.SeedSequence(config.seed)
    alpha_seed, *rep_seeds = root.spawn(config.reps + 1)
    dpd = None
    if "dpd" in config.evaluated:
        dpd = dpd_table(inst, estimate_alpha(inst, config.alpha_paths, alpha_seed))
    jobs = [(config, dpd, s) for s in rep_seeds]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))
    else:
        results = [_replicate(job) for job in jobs]
    objectives = {name: np.array([r[0][name] for r in results]) for name in config.evaluated}
    solver_used = {}
    if "clairvoyant_general" in config.evaluated:
        exact = sum(1 for _, e in results if e)
        solver_used = {"bruteforce": exact, "ascent": len(results) - exact}
    return LossReport(inst.horizon, inst.capacity, config.benchmark, config.evaluated,
                      objectives, solver_used, config.label)


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) on log(x); needs positive values."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log slope needs positive values")
    return float(stats.linregress(np.log(xs), np.log(ys)).slope)


def linear_slope_ci(xs, ys, level: float = 0.95):
    """Least-squares slope of y on x with a two-sided t confidence interval."""
    fit = stats.linregress(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
    half = stats.t.ppf(0.5 + level / 2, len(xs) - 2) * fit.stderr
    return float(fit.slope), float(fit.slope - half), float(fit.slope + half)
