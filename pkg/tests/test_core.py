import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srmns.core import (
    ArrivalSequence,
    Instance,
    InstanceError,
    count_window,
    instance_from_dict,
    load_instance,
    make_instance,
    normalize,
    sample_arrivals,
    save_instance,
)


def test_sort_puts_higher_ratio_first_and_flags_always_accept():
    inst = make_instance([0.5, 0.5], [0.1, 0.5], [0.2, 0.5], 3, 10)
    assert inst.perm.tolist() == [1, 0]
    assert inst.critical_ratios.tolist() == pytest.approx([1.0, 0.5])
    assert inst.always_accept.tolist() == [True, False]


def test_equal_ratios_break_ties_by_value():
    inst = make_instance([0.3, 0.2, 0.5], [0.044, 0.1, 0.06], [0.2, 0.5, 0.3], 5, 25)
    assert inst.perm.tolist() == [0, 1, 2]
    assert inst.critical_ratios.tolist() == pytest.approx([0.22, 0.2, 0.2])


def test_reversed_tie_inputs_are_resorted():
    inst = make_instance([0.5, 0.5], [0.06, 0.1], [0.3, 0.5], 5, 25)
    assert inst.perm.tolist() == [1, 0]


def test_refund_lowers_effective_value():
    inst = make_instance([1.0], [0.3], [0.5], 1, 5, r=[0.1])
    assert inst.eff_values[0] == pytest.approx(0.25)
    assert inst.critical_ratios[0] == pytest.approx(0.5)


def test_zero_show_probability_is_always_accepted():
    inst = make_instance([0.8, 0.2], [0.5, 0.1], [1.0, 0.0], 5, 10)
    assert np.isinf(inst.critical_ratios[0])
    assert inst.always_accept[0]
    assert inst.perm.tolist() == [1, 0]


@pytest.mark.parametrize("kwargs", [
    dict(lam=[0.5, 0.4], v=[0.1, 0.1], p=[0.5, 0.5], B=1, T=1),
    dict(lam=[1.0], v=[0.1], p=[1.2], B=1, T=1),
    dict(lam=[1.0], v=[1.0], p=[0.5], B=1, T=1),
    dict(lam=[1.0], v=[0.1], p=[0.5], B=-1, T=1),
    dict(lam=[1.0], v=[0.1], p=[0.5], B=1, T=0),
    dict(lam=[1.0], v=[0.1], p=[0.5], B=1, T=3, r=[0.2]),
    dict(lam=[1.0], v=[0.1], p=[0.5], B=1, T=3, d=[0]),
    dict(lam=[0.0, 1.0], v=[0.1, 0.1], p=[0.5, 0.5], B=1, T=1),
])
def test_invalid_parameters_raise(kwargs):
    with pytest.raises(InstanceError):
        make_instance(kwargs["lam"], kwargs["v"], kwargs["p"], kwargs["B"], kwargs["T"],
                      kwargs.get("r"), kwargs.get("d"))


def test_count_window_examples():
    A = ArrivalSequence([0, 1, 0], 2)
    assert count_window(A, 1, 3).tolist() == [2, 1]
    assert count_window(A, 2, 2).tolist() == [0, 1]
    for t in range(1, 4):
        w = count_window(A, t, t)
        assert w.sum() == 1 and w.max() == 1
    with pytest.raises(ValueError):
        count_window(A, 0, 2)
    with pytest.raises(ValueError):
        count_window(A, 2, 4)
    assert A.future_counts(4).tolist() == [0, 0]
    assert A.future_counts(2).tolist() == [1, 1]


def test_instance_file_round_trip(tmp_path):
    inst = make_instance([0.2, 0.3, 0.5], [0.3, 0.6, 0.4], [0.8, 0.9, 0.5], 7, 21,
                         r=[0.1, 0.0, 0.2], d=[1, 2, 1])
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    doc = json.loads(path.read_text())
    assert doc["v"] == [0.3, 0.6, 0.4]
    back = load_instance(path)
    for name in ("arrival_probs", "values", "show_probs", "refunds", "demands", "perm"):
        assert np.array_equal(getattr(back, name), getattr(inst, name))


def test_missing_field_is_instance_error():
    with pytest.raises(InstanceError):
        instance_from_dict({"lambda": [1.0], "v": [0.1], "p": [0.5], "B": 1})


def test_sample_arrivals_is_seeded():
    inst = make_instance([0.2, 0.3, 0.5], [0.6, 0.4, 0.3], [0.8, 0.8, 0.8], 5, 200)
    a, b = sample_arrivals(inst, 7), sample_arrivals(inst, 7)
    assert np.array_equal(a.types, b.types)
    single = make_instance([1.0], [0.3], [0.5], 5, 50)
    assert np.all(sample_arrivals(single, 1).types == 0)


def test_sample_frequencies_match_lambda():
    inst = make_instance([0.2, 0.3, 0.5], [0.6, 0.4, 0.3], [0.8, 0.8, 0.8], 5, 100_000)
    freq = sample_arrivals(inst, 3).counts() / inst.horizon
    sigma = np.sqrt(inst.arrival_probs * (1 - inst.arrival_probs) / inst.horizon)
    assert np.all(np.abs(freq - inst.arrival_probs) <= 4 * sigma)


params = st.integers(1, 5).flatmap(lambda k: st.tuples(
    st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k),
    st.lists(st.floats(0.0, 0.99), min_size=k, max_size=k),
    st.lists(st.sampled_from([0.0, 0.2, 0.5, 1.0]) | st.floats(0.0, 1.0), min_size=k, max_size=k),
))


@settings(max_examples=200, deadline=None)
@given(params)
def test_normalize_idempotent_and_invertible(args):
    w, v, p = args
    lam = np.array(w) / np.sum(w)
    raw = Instance(lam, v, p, 3, 10)
    once = normalize(raw)
    twice = normalize(once)
    assert np.array_equal(once.perm, twice.perm)
    assert np.array_equal(once.to_input_order(once.values), raw.values)
    assert np.array_equal(once.to_input_order(once.show_probs), raw.show_probs)
    with np.errstate(over="ignore"):
        q = np.round(once.critical_ratios, 12)
    assert np.all(q[:-1] >= q[1:])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=40))
def test_full_window_sums_to_horizon(types):
    A = ArrivalSequence(types, 4)
    assert count_window(A, 1, A.T).sum() == A.T
    assert np.array_equal(A.counts(), np.bincount(types, minlength=4))
