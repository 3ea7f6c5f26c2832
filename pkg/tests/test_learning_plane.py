import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from learnplane.learning_plane import (
    ExperienceSample,
    LearningQueue,
    RhoSchedule,
    SlotType,
    draw_slot_type,
    offer_sample,
    rho,
    transmit,
)

TABLE = RhoSchedule(0.2, 0.01, 8e-4, 1000)


def sample(tag=0.0):
    return ExperienceSample(np.full(13, tag), 1, tag, np.full(13, tag))


def test_rho_examples():
    assert rho(0, TABLE) == 0.2
    assert rho(999, TABLE) == 0.2
    assert rho(1000, TABLE) == pytest.approx(0.1992, abs=1e-15)
    assert rho(238_000, TABLE) == 0.01
    assert rho(237_999, TABLE) > 0.01
    for t in (238_001, 300_000, 10**7):
        assert rho(t, TABLE) == 0.01


def test_floor_slot():
    assert TABLE.floor_slot() == 238_000
    assert TABLE.floor_slot() == TABLE.pace * math.ceil((TABLE.rho_0 - TABLE.rho_f) / TABLE.sigma - 1e-9)


@settings(max_examples=200, deadline=None)
@given(t=st.integers(0, 10**6), dt=st.integers(0, 10**5))
def test_rho_bounded_monotone_piecewise(t, dt):
    r = rho(t, TABLE)
    assert TABLE.rho_f <= r <= TABLE.rho_0
    assert rho(t + dt, TABLE) <= r
    block_start = (t // TABLE.pace) * TABLE.pace
    assert rho(block_start, TABLE) == r


def test_schedule_validation():
    with pytest.raises(ValueError):
        RhoSchedule(0.1, 0.2, 1e-3, 10)
    with pytest.raises(ValueError):
        RhoSchedule(0.2, 0.1, 0.0, 10)
    with pytest.raises(ValueError):
        RhoSchedule(0.2, 0.1, 1e-3, 0)


def test_slot_type_degenerate_schedules():
    rng = np.random.default_rng(0)
    never = RhoSchedule(0.0, 0.0, 1e-3, 10)
    always = RhoSchedule(1.0, 1.0, 1e-3, 10)
    assert all(draw_slot_type(t, never, rng) is SlotType.DRL for t in range(1000))
    assert all(draw_slot_type(t, always, rng) is SlotType.LEARNING for t in range(1000))


def test_slot_type_frequency():
    rng = np.random.default_rng(17)
    slots = 10**5
    hits = sum(draw_slot_type(t, TABLE, rng) is SlotType.LEARNING for t in range(slots))
    probs = np.array([rho(t, TABLE) for t in range(slots)])
    mean = probs.sum()
    sigma = math.sqrt((probs * (1 - probs)).sum())
    assert abs(hits - mean) <= 3 * sigma


def test_offer_zero_pressure_always_accepts():
    q = LearningQueue(10, 3)
    rng = np.random.default_rng(0)
    assert offer_sample(q, sample(), rng)
    assert len(q) == 1 and q.e_pkts == 3


def test_offer_full_queue_always_rejects():
    q = LearningQueue(5, 3)
    for _ in range(5):
        q.push(sample())
    rng = np.random.default_rng(0)
    assert not any(q.offer(sample(), rng) for _ in range(1000))
    assert q.early_rejected == 1000 and len(q) == 5


def test_offer_half_pressure():
    rng = np.random.default_rng(3)
    trials = 10**5
    accepted = 0
    for _ in range(trials):
        q = LearningQueue(1500, 3)
        q._items.extend([[None, 3]] * 750)
        accepted += q.offer(sample(), rng)
    sigma = math.sqrt(trials * 0.25)
    assert abs(accepted - trials / 2) <= 3 * sigma


def test_transmit_examples():
    a, b = sample(1), sample(2)
    q = LearningQueue(10, 3)
    q.push(a)
    assert transmit(q, 3) == [a]
    assert q.e_pkts == 0

    q = LearningQueue(10, 3)
    q.push(a, 1)
    q.push(b)
    assert q.transmit(2) == [a]
    assert q.remaining() == [2]
    assert q.transmit(0) == []


def test_transmit_negative():
    with pytest.raises(ValueError):
        LearningQueue(10, 3).transmit(-1)


def test_pressure():
    q = LearningQueue(4, 2)
    q.push(sample())
    assert q.pressure == 0.25


@settings(max_examples=150, deadline=None)
@given(
    ops=st.lists(st.tuples(st.integers(0, 3), st.integers(0, 10)), min_size=1, max_size=80),
    capacity=st.integers(1, 8),
    frags=st.integers(1, 4),
    seed=st.integers(0, 2**16),
)
def test_fragment_and_sample_conservation(ops, capacity, frags, seed):
    rng = np.random.default_rng(seed)
    q = LearningQueue(capacity, frags)
    delivered = []
    next_id = 0
    for n_offer, k in ops:
        for _ in range(n_offer):
            q.offer(sample(next_id), rng)
            next_id += 1
            assert len(q) <= capacity
            assert q.e_pkts <= capacity * frags
        before = q.e_pkts
        out = q.transmit(k)
        assert before - q.e_pkts == min(k, before)
        delivered += out
        rem = q.remaining()
        # only the head may be partially sent
        assert all(r == frags for r in rem[1:])
        assert q.e_pkts == sum(rem)
    assert q.offered == q.early_rejected + q.delivered + len(q)
    assert q.offered * frags == q.fragments_sent + q.e_pkts + q.early_rejected * frags
    ids = [s.reward for s in delivered]
    assert ids == sorted(ids)
