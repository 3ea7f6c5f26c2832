import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from learnplane import traffic
from learnplane.acceptance import binomial_outliers, outlier_allowance, transition_counts
from learnplane.core import default_config
from learnplane.traffic import TrafficModel, TrafficState


def slice1():
    return traffic.slice_models(default_config())[0]


def slice2():
    return traffic.slice_models(default_config())[1]


def conv_oracle(u, model):
    """Row u of the aggregate chain as a convolution of two binomial pmfs."""
    (o00, o01), (o10, o11) = model.activity
    n = model.users

    def binom(k, p):
        return np.array([math.comb(k, i) * p**i * (1 - p) ** (k - i) for i in range(k + 1)])

    return np.convolve(binom(u, o11), binom(n - u, o01))


def test_expected_traffic_table_values():
    assert abs(traffic.expected_traffic(slice1()) / 1e6 - 2.88) <= 0.01
    assert abs(traffic.expected_traffic(slice2()) / 1e6 - 4.35) <= 0.01


def test_expected_traffic_exact():
    assert traffic.expected_traffic(slice1()) == pytest.approx(0.5 / 1.42 * 16 * 512e3)
    assert traffic.expected_traffic(slice2()) == pytest.approx(0.5 * 17 * 512e3)


def test_offered_load_share_of_capacity():
    cfg = default_config()
    total = traffic.expected_traffic(slice1()) + traffic.expected_traffic(slice2())
    assert abs(total / 1e6 - 7.23) <= 0.02
    assert total / traffic.capacity(cfg) == pytest.approx(0.94, abs=0.01)


def test_expected_traffic_no_users():
    assert traffic.expected_traffic(TrafficModel(0, 1.0, ((0.5, 0.5), (0.5, 0.5)))) == 0


def test_degenerate_chain():
    with pytest.raises(ValueError):
        traffic.expected_traffic(TrafficModel(3, 1.0, ((1.0, 0.0), (0.0, 1.0))))


def test_capacity():
    assert traffic.capacity(default_config()) == 7.68e6
    assert traffic.capacity(SimpleNamespace(n_resources=0, packet_size=512, slot_duration=1e-3)) == 0
    assert traffic.capacity(default_config().replace(n_resources=1)) == pytest.approx(0.512e6)


def test_model_validation():
    with pytest.raises(ValueError):
        TrafficModel(-1, 1.0, ((0.5, 0.5), (0.5, 0.5)))
    with pytest.raises(ValueError):
        TrafficModel(1, 0.0, ((0.5, 0.5), (0.5, 0.5)))
    with pytest.raises(ValueError):
        TrafficModel(1, 1.0, ((0.5, 0.6), (0.5, 0.5)))


def test_transition_prob_examples():
    half = TrafficModel(2, 1.0, ((0.5, 0.5), (0.5, 0.5)))
    assert traffic.aggregate_transition_prob(0, 0, half) == pytest.approx(0.25)
    one = TrafficModel(1, 1.0, slice1().activity)
    assert traffic.aggregate_transition_prob(0, 1, one) == pytest.approx(0.5)


def test_transition_prob_range_errors():
    with pytest.raises(ValueError):
        traffic.aggregate_transition_prob(17, 0, slice1())
    with pytest.raises(ValueError):
        traffic.aggregate_transition_prob(0, -1, slice1())


@pytest.mark.parametrize("model", [slice1(), slice2()])
def test_transition_matrix_matches_convolution(model):
    p = traffic.aggregate_transition_matrix(model)
    for u in range(model.users + 1):
        np.testing.assert_allclose(p[u], conv_oracle(u, model), atol=1e-14)


@settings(max_examples=100, deadline=None)
@given(
    n=st.integers(0, 20),
    a=st.floats(0, 1, allow_nan=False),
    b=st.floats(0, 1, allow_nan=False),
)
def test_rows_sum_to_one(n, a, b):
    model = TrafficModel(n, 1.0, ((1 - a, a), (b, 1 - b)))
    p = traffic.aggregate_transition_matrix(model)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_transition_prob_monte_carlo_u4():
    model = TrafficModel(4, 512e3, slice1().activity)
    rng = np.random.default_rng(99)
    counts = transition_counts(model, 10**6, rng)
    p = traffic.aggregate_transition_matrix(model)
    assert binomial_outliers(counts, p) <= outlier_allowance(counts.size)


def test_outlier_allowance():
    assert outlier_allowance(1) == 0
    assert outlier_allowance(25) == 1
    assert outlier_allowance(10_000) > outlier_allowance(289) >= 1


def test_binomial_outliers_flags_gross_mismatch():
    p = np.array([[0.5, 0.5], [0.1, 0.9]])
    assert binomial_outliers(np.array([[500, 500], [100, 900]]), p) == 0
    assert binomial_outliers(np.array([[700, 300], [100, 900]]), p) == 2
    # one hit where 0.06 were expected is not evidence of anything
    assert binomial_outliers(np.array([[1, 999], [0, 1000]]), np.array([[6e-5, 1 - 6e-5], [0, 1]])) == 0


def test_relabeling_invariance():
    """Which users are active does not matter, only how many."""
    model = TrafficModel(6, 1.0, ((0.7, 0.3), (0.4, 0.6)))
    trials = 40_000
    first = np.array([1, 1, 0, 0, 0, 0], dtype=bool)
    second = np.array([0, 0, 0, 0, 1, 1], dtype=bool)
    rng = np.random.default_rng(5)
    hist = []
    for start in (first, second):
        h = np.zeros(7)
        for _ in range(trials):
            _, k = traffic.step(TrafficState(start.copy()), model, rng)
            h[k] += 1
        hist.append(h)
    p = traffic.aggregate_transition_matrix(model)[2]
    for h in hist:
        sigma = np.sqrt(trials * p * (1 - p))
        assert np.all(np.abs(h - trials * p) <= 3 * sigma + 1e-9)


def test_step_absorbing_inactive():
    model = TrafficModel(5, 1.0, ((1.0, 0.0), (0.5, 0.5)))
    state = TrafficState(np.zeros(5, dtype=bool))
    rng = np.random.default_rng(0)
    for _ in range(50):
        state, k = traffic.step(state, model, rng)
        assert k == 0 and state.count == 0


def test_step_periodic_chain():
    model = TrafficModel(1, 1.0, ((0.0, 1.0), (1.0, 0.0)))
    state = TrafficState(np.zeros(1, dtype=bool))
    rng = np.random.default_rng(0)
    seen = []
    for _ in range(6):
        state, k = traffic.step(state, model, rng)
        seen.append(k)
    assert seen == [1, 0, 1, 0, 1, 0]


def test_step_counts_new_state_times_packets():
    model = TrafficModel(3, 1.0, ((0.0, 1.0), (0.0, 1.0)), packets_per_user=2)
    state, k = traffic.step(TrafficState(np.zeros(3, dtype=bool)), model, np.random.default_rng(0))
    assert state.count == 3 and k == 6


def test_mean_arrivals_slice1():
    model = slice1()
    rng = np.random.default_rng(2024)
    state = traffic.initial_state(model, rng)
    slots = 10**6
    counts = np.empty(slots)
    for i in range(slots):
        state, counts[i] = traffic.step(state, model, rng)
    expected = 16 * 0.5 / 1.42
    # batch means absorb the chain's autocorrelation
    batches = counts.reshape(1000, -1).mean(axis=1)
    se = batches.std(ddof=1) / math.sqrt(len(batches))
    assert abs(counts.mean() - expected) <= 3 * se


def test_initial_state_stationary():
    model = slice2()
    rng = np.random.default_rng(1)
    draws = np.array([traffic.initial_state(model, rng).count for _ in range(20_000)])
    p = model.stationary_active()
    se = math.sqrt(model.users * p * (1 - p) / len(draws))
    assert abs(draws.mean() - model.users * p) <= 3 * se


def test_state_count():
    assert TrafficState(np.array([True, False, True])).count == 2
