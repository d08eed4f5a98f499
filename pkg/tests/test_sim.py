import numpy as np
import pytest
from conftest import random_instance
from hypothesis import given, settings
from hypothesis import strategies as st

from srmns.bench import preset
from srmns.core import make_instance
from srmns.policies import run_clairvoyant_index, run_dlp, run_online_index
from srmns.sim import (
    ExperimentConfig,
    clairvoyant_general,
    coupling_trace,
    eval_expected,
    eval_realized,
    linear_slope_ci,
    loglog_slope,
    run_replications,
    sample_arrivals,
)


def test_sample_arrivals_examples():
    one = make_instance([1.0], [0.3], [0.5], 2, 50)
    assert not sample_arrivals(one, 0).types.any()
    inst = make_instance([0.2, 0.3, 0.5], [0.1, 0.2, 0.3], [0.5, 0.6, 0.7], 5, 100_000)
    A = sample_arrivals(inst, 42)
    freq = A.counts() / A.T
    sigma = np.sqrt(inst.arrival_probs * (1 - inst.arrival_probs) / A.T)
    assert np.all(np.abs(freq - inst.arrival_probs) <= 4 * sigma)
    assert np.array_equal(A.types, sample_arrivals(inst, 42).types)


def test_eval_expected_shared_vectors():
    inst = make_instance([1.0], [0.5], [1.0], 1, 5)
    assert eval_expected(inst, [0]) == 0.0
    assert eval_expected(inst, [2]) == pytest.approx(0.0, abs=1e-15)
    inst = make_instance([1.0], [0.4], [0.5], 1, 5)
    assert eval_expected(inst, [2]) == pytest.approx(0.55, abs=1e-15)


def test_eval_realized_deterministic_cases():
    inst = make_instance([0.5, 0.5], [0.4, 0.3], [1.0, 0.0], 2, 10, r=[0.1, 0.2])
    for seed in range(5):
        assert eval_realized(inst, [3, 4], seed) == pytest.approx(eval_expected(inst, [3, 4]), abs=1e-12)
    assert eval_realized(inst, [0, 0], 1) == 0.0


def test_eval_realized_converges_to_expected():
    rng = np.random.default_rng(3)
    inst = random_instance(rng, k=3, B=4, refunds=True, demands=True)
    x = np.array([3, 2, 4])
    rng_draws = np.random.default_rng(10)
    p, d, B = inst.show_probs, inst.demands, inst.capacity
    n = 100_000
    shows = rng_draws.binomial(np.broadcast_to(x, (n, 3)), p)
    revenue = np.dot(inst.values, x) - (x - shows) @ inst.refunds
    draws = revenue - np.maximum(shows @ d - B, 0)
    sigma = draws.std() / np.sqrt(n)
    assert abs(draws.mean() - eval_expected(inst, x)) <= 4 * sigma
    singles = np.array([eval_realized(inst, x, s) for s in range(2000)])
    assert abs(singles.mean() - eval_expected(inst, x)) <= 4 * singles.std() / np.sqrt(singles.size)


def test_coupling_with_itself_has_no_losses():
    inst = preset("exp_b").instance({"T": 45, "B": 15})
    A = sample_arrivals(inst, 7)
    c = coupling_trace(inst, A, run_clairvoyant_index(inst, A))
    assert c.loss_event_count == 0 and c.total_loss == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_coupling_identities_hold(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, T=int(rng.integers(2, 30)), demands=bool(rng.random() < 0.3))
    A = sample_arrivals(inst, seed)
    trace = run_online_index(inst, A, seed + 1)
    c = coupling_trace(inst, A, trace)
    assert c.H[-1] == pytest.approx(eval_expected(inst, trace.final_x), abs=1e-9)
    assert c.H[0] - eval_expected(inst, trace.final_x) <= c.loss_event_count * inst.demands.max() + 1e-9
    assert c.per_period_loss.sum() == pytest.approx(c.total_loss, abs=1e-9)


def test_coupling_rejects_foreign_trace():
    inst = preset("exp_b").instance({"T": 30, "B": 10})
    A, other = sample_arrivals(inst, 1), sample_arrivals(inst, 2)
    with pytest.raises(ValueError):
        coupling_trace(inst, A, run_dlp(inst, other))


def test_single_deterministic_type_by_hand():
    inst = make_instance([1.0], [0.4], [1.0], 3, 8)
    cfg = ExperimentConfig(inst, ("online_index", "dlp", "expected_greedy"), "clairvoyant_general",
                           reps=1, seed=5)
    rep = run_replications(cfg)
    assert rep.mean("clairvoyant_general") == pytest.approx(0.4 * 3, abs=1e-12)
    assert rep.mean("online_index") == pytest.approx(1.2, abs=1e-12)
    assert rep.mean("expected_greedy") == pytest.approx(1.2, abs=1e-12)
    assert rep.abs_loss("online_index") == pytest.approx(0.0, abs=1e-12)
    assert rep.solver_used == {"bruteforce": 1, "ascent": 0}


def test_replications_are_bit_reproducible_and_worker_independent():
    inst = preset("exp_a").instance({"T": 50, "B": 10})
    cfg = ExperimentConfig(inst, ("online_index", "dlp", "dpd"), "clairvoyant_general", reps=8, seed=3)
    a, b = run_replications(cfg), run_replications(cfg)
    par = run_replications(ExperimentConfig(inst, ("online_index", "dlp", "dpd"), "clairvoyant_general",
                                            reps=8, seed=3, workers=2))
    for name in a.names:
        assert np.array_equal(a.objectives[name], b.objectives[name])
        assert np.array_equal(a.objectives[name], par.objectives[name])


def test_benchmark_ordering_in_the_mean():
    inst = preset("exp_a").instance({"T": 75, "B": 15})
    rep = run_replications(ExperimentConfig(inst, ("clairvoyant_index", "online_index"),
                                            "clairvoyant_general", reps=30, seed=8))
    for name in ("clairvoyant_index", "online_index"):
        assert rep.abs_loss(name) >= -3 * rep.abs_loss_stderr(name)
    gap = rep.objectives["clairvoyant_index"] - rep.objectives["online_index"]
    assert gap.mean() >= -3 * gap.std(ddof=1) / np.sqrt(gap.size)
    rows = rep.rows()
    assert [r["policy"] for r in rows] == ["clairvoyant_general", "clairvoyant_index", "online_index"]
    assert rows[0]["rel_loss"] == 0.0


def test_clairvoyant_general_solver_selection():
    inst = preset("exp_a").instance({"T": 50, "B": 10})
    counts = sample_arrivals(inst, 1).counts()
    x, exact = clairvoyant_general(inst, counts)
    assert exact
    y, exact = clairvoyant_general(inst, counts, budget=10)
    assert not exact and eval_expected(inst, y) <= eval_expected(inst, x) + 1e-12
    _, exact = clairvoyant_general(inst, counts, solver="ascent")
    assert not exact


def test_config_validation():
    inst = preset("exp_a").instance({"T": 50, "B": 10})
    for bad in ({"policies": ("nope",)}, {"benchmark": "online_index"}, {"reps": 0},
                {"general_solver": "magic"}):
        with pytest.raises(ValueError):
            ExperimentConfig(inst, **bad)


def test_slope_helpers():
    xs = np.array([10.0, 20.0, 40.0, 80.0])
    assert loglog_slope(xs, 3 * xs ** 0.5) == pytest.approx(0.5, abs=1e-12)
    assert loglog_slope(xs, 2 / xs) == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(ValueError):
        loglog_slope(xs, [1.0, 0.0, 1.0, 1.0])
    slope, lo, hi = linear_slope_ci(xs, 2 * xs + np.array([0.1, -0.1, 0.1, -0.1]))
    assert lo <= 2 <= hi and slope == pytest.approx(2.0, abs=0.01)
