"""Experiment catalogue and the studies that run it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..core import Instance, make_instance, sample_arrivals
from ..offline import SolveContext, objective, solve_global_bruteforce, solve_index
from ..policies import run_online_index
from ..sim import ExperimentConfig, LossReport, coupling_trace, eval_expected, run_replications

EXP_B_GRID_NOTE = ("horizon grid printed as {15,10,15,...,150}; read as {15,30,...,150} "
                   "(step 15) with B = T/3")


@dataclass(frozen=True)
class Preset:
    name: str
    kind: str
    build: Callable[[dict], Instance]
    points: tuple
    policies: tuple = ("online_index", "clairvoyant_index")
    benchmark: str = "clairvoyant_general"
    reps: int = 100
    seed: int = 0
    tag: str = ""
    param: str = ""
    general_solver: str = "auto"
    notes: dict = field(default_factory=dict)

    def instance(self, point: dict | None = None) -> Instance:
        return self.build(self.points[0] if point is None else point)

    def at_horizons(self, horizons) -> "Preset":
        """Same preset restricted or extended to the given horizons."""
        if self.kind not in ("scaling", "index_gap"):
            raise ValueError(f"preset {self.name} is not horizon-parameterized")
        pts = tuple({"T": int(T), "B": self.notes["capacity"](int(T))} for T in horizons)
        return Preset(self.name, self.kind, self.build, pts, self.policies, self.benchmark,
                      self.reps, self.seed, self.tag, self.param, self.general_solver, self.notes)


def _exp_a(pt):
    return make_instance([0.3, 0.2, 0.5], [0.044, 0.1, 0.06], [0.2, 0.5, 0.3], pt["B"], pt["T"])


def _exp_b(pt):
    return make_instance([0.2, 0.3, 0.5], [0.6, 0.4, 0.3], [0.8, 0.8, 0.8], pt["B"], pt["T"])


def _sweep_p(pt):
    p = pt["p"]
    return make_instance([0.2, 0.3, 0.5], [p - 0.1, p - 0.2, p - 0.3], [p, p, p], pt["B"], pt["T"])


def _sweep_v(pt):
    v = pt["v"]
    return make_instance([0.2, 0.3, 0.5], [v, v, v], [v + 0.1, v + 0.2, v + 0.3], pt["B"], pt["T"])


def _lb_general(pt):
    T = pt["T"]
    root = math.isqrt(T)
    if root * root != T or T < 16:
        raise ValueError("lb_general needs a perfect-square horizon of at least 16")
    return make_instance([1 / 6, 1 / 3, 1 / 2], [0.5, 1 / root, 0.0], [1.0, 3 / root, 1.0],
                         pt["B"], T)


def _lb_index(pt):
    T = pt["T"]
    return make_instance([0.5, 0.5], [0.25, 0.5 - 1 / T], [0.5, 1.0], pt["B"], T)


def _dpd_counter(eps):
    def build(pt):
        return make_instance([0.8, 0.2], [0.5, eps], [1.0, 0.0], pt["B"], pt["T"])
    return build


def _pts(horizons, capacity):
    return tuple({"T": T, "B": capacity(T)} for T in horizons)


def _fifth(T):
    return T // 5


def _third(T):
    return T // 3


def _sixth(T):
    return T // 6


def _half(T):
    return T // 2


def _catalogue(eps: float = 0.1) -> dict:
    grid = np.round(np.linspace(0.4, 0.9, 11), 10)
    vgrid = np.round(np.linspace(0.1, 0.6, 11), 10)
    return {
        "exp_a": Preset("exp_a", "scaling", _exp_a, _pts(range(25, 251, 25), _fifth),
                        reps=100, seed=101, tag="uniform loss with switching",
                        notes={"capacity": _fifth}),
        "exp_a_switch": Preset("exp_a_switch", "switching", _exp_a,
                               tuple({"T": 1000, "B": B} for B in range(1, 16)),
                               seed=102, tag="general optimum switches from type 2 to type 1",
                               notes={"fixed_path": True}),
        "exp_a_constrained": Preset("exp_a_constrained", "switching", _exp_a,
                                    tuple({"T": 5 * B, "B": B} for B in range(1, 16)),
                                    seed=103, tag="switching with demand-limited arrivals",
                                    notes={"fixed_path": False}),
        "exp_b": Preset("exp_b", "scaling", _exp_b, _pts(range(15, 151, 15), _third),
                        reps=100, seed=201, tag="no switching; clairvoyant index optimal",
                        notes={"capacity": _third, "grid": EXP_B_GRID_NOTE}),
        "sweep_p": Preset("sweep_p", "sweep", _sweep_p,
                          tuple({"T": 20, "B": 10, "p": float(p)} for p in grid),
                          reps=100, seed=301, param="p", tag="loss across show probabilities"),
        "sweep_v": Preset("sweep_v", "sweep", _sweep_v,
                          tuple({"T": 20, "B": 10, "v": float(v)} for v in vgrid),
                          reps=100, seed=302, param="v", tag="loss across values"),
        "lb_general": Preset("lb_general", "scaling", _lb_general,
                             _pts((400, 900, 1600, 2500, 3600), _sixth),
                             policies=("online_index",), reps=200, seed=401, general_solver="ascent",
                             tag="online loss grows like sqrt(T)", notes={"capacity": _sixth}),
        "lb_index": Preset("lb_index", "index_gap", _lb_index,
                           _pts((600, 1200, 2400, 4800), _sixth), policies=(), reps=1, seed=402,
                           tag="index solutions lose order sqrt(T)", notes={"capacity": _sixth}),
        "dpd_counter": Preset("dpd_counter", "scaling", _dpd_counter(eps),
                              _pts((200, 400, 800, 1600), _half),
                              policies=("dpd", "online_index", "dlp"), reps=200, seed=501,
                              tag="aggregated DP loses order T", notes={"capacity": _half, "eps": eps}),
    }


PRESET_NAMES = tuple(_catalogue())


def preset(name: str, eps: float = 0.1) -> Preset:
    table = _catalogue(eps)
    if name not in table:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    if name == "dpd_counter" and not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    return table[name]


def _label(p: Preset, pt: dict) -> str:
    return f"{pt[p.param]:g}" if p.param else ""


def run_scaling(p: Preset, reps: int | None = None, seed: int | None = None,
                workers: int = 1, budget: int | None = None) -> list[LossReport]:
    """One replicated experiment per grid point; point i uses seed + i."""
    base = p.seed if seed is None else seed
    out = []
    for i, pt in enumerate(p.points):
        kw = {} if budget is None else {"budget": budget}
        cfg = ExperimentConfig(p.instance(pt), p.policies, p.benchmark, reps or p.reps,
                               base + i, workers=workers, general_solver=p.general_solver,
                               label=_label(p, pt), **kw)
        out.append(run_replications(cfg))
    return out


def run_switching(p: Preset, seed: int | None = None) -> list[dict]:
    """Hindsight general and index solutions on fixed sampled paths.

    With ``fixed_path`` one long path is shared by every capacity, so demand
    never binds; otherwise each point samples its own path.
    """
    base = p.seed if seed is None else seed
    rows = []
    shared = None
    if p.notes.get("fixed_path"):
        shared = sample_arrivals(p.instance(), base)
    for i, pt in enumerate(p.points):
        inst = p.instance(pt)
        A = shared if shared is not None else sample_arrivals(inst, base + i)
        ctx = SolveContext.fresh(inst, A.counts())
        for solver, x in (("clairvoyant_general", solve_global_bruteforce(ctx)),
                          ("clairvoyant_index", solve_index(ctx).x)):
            row = {"T": inst.horizon, "B": inst.capacity, "solver": solver}
            for j, n in enumerate(inst.to_input_order(x), start=1):
                row[f"x{j}"] = int(n)
            for j, n in enumerate(inst.to_input_order(A.counts()), start=1):
                row[f"n{j}"] = int(n)
            row["objective"] = objective(ctx, x)
            rows.append(row)
    return rows


def index_gap(inst: Instance) -> dict:
    """Alternative (0, T/6) versus the index solution on expected counts (T/2, T/2)."""
    T = inst.horizon
    nf = inst.from_input_order(np.array([T // 2, T // 2]))
    ctx = SolveContext.fresh(inst, nf)
    x_index = solve_index(ctx).x
    alt = inst.from_input_order(np.array([0, T // 6]))
    idx_val, alt_val = eval_expected(inst, x_index), eval_expected(inst, alt)
    return {"T": T, "B": inst.capacity, "index_obj": idx_val, "alt_obj": alt_val,
            "gap": alt_val - idx_val}


def run_index_gap(p: Preset) -> list[dict]:
    return [index_gap(p.instance(pt)) for pt in p.points]


def coupling_paths(inst: Instance, reps: int, seed: int) -> list[dict]:
    """Online index runs with their hindsight coupling diagnostics."""
    rows = []
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(reps)):
        path_seed, forecast_seed = child.spawn(2)
        A = sample_arrivals(inst, path_seed)
        c = coupling_trace(inst, A, run_online_index(inst, A, forecast_seed))
        rows.append({"rep": r, "loss_events": c.loss_event_count, "total_loss": c.total_loss,
                     "max_step_loss": float(c.per_period_loss.max(initial=0.0))})
    return rows


def run_coupling(p: Preset, reps: int | None = None, seed: int | None = None) -> list[dict]:
    base = p.seed if seed is None else seed
    out = []
    for i, pt in enumerate(p.points):
        inst = p.instance(pt)
        paths = coupling_paths(inst, reps or p.reps, base + i)
        ev = np.array([r["loss_events"] for r in paths], dtype=float)
        tl = np.array([r["total_loss"] for r in paths])
        se = ev.std(ddof=1) / np.sqrt(ev.size) if ev.size > 1 else 0.0
        out.append({"T": inst.horizon, "B": inst.capacity, "reps": ev.size,
                    "mean_loss_events": float(ev.mean()), "stderr": float(se),
                    "max_loss_events": int(ev.max()), "mean_total_loss": float(tl.mean())})
    return out
