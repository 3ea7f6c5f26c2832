import math

import pytest
from hypothesis import given, settings, strategies as st

from learnplane.queueing import (
    INF,
    Packet,
    SliceQueue,
    counterfactual_reward,
    qos,
    slot_reward,
)

T_MAX = 70


def queue_with_ages(ages, t, capacity=1500, deadline=T_MAX, slice_id=2):
    """Build a queue whose packets have the given ages at slot ``t`` (oldest first)."""
    q = SliceQueue(slice_id, capacity, deadline)
    for age in ages:
        q.enqueue(1, t - age)
    return q


def test_enqueue_examples():
    q = SliceQueue(1, 10)
    assert q.enqueue(3, 0) == (3, 0)
    full = queue_with_ages([0] * 10, 5, capacity=10, slice_id=1)
    assert full.enqueue(5, 5) == (0, 5)
    partial = queue_with_ages([0] * 8, 5, capacity=10, slice_id=1)
    assert partial.enqueue(5, 5) == (2, 3)
    assert len(partial) == 10


def test_enqueue_rejects_negative_and_out_of_order():
    q = SliceQueue(1, 10)
    with pytest.raises(ValueError):
        q.enqueue(-1, 0)
    q.enqueue(1, 5)
    with pytest.raises(ValueError):
        q.enqueue(1, 4)


def test_expire_examples():
    t = 200
    q = queue_with_ages([71, 70, 3], t)
    assert q.expire(t) == 1
    assert q.ages(t) == [70, 3]

    q = queue_with_ages([10, 5], t)
    assert q.expire(t) == 0

    q = queue_with_ages([100, 99, 98], t)
    assert q.expire(t) == 3
    assert len(q) == 0


def test_expire_requires_deadline():
    with pytest.raises(ValueError):
        SliceQueue(1, 10).expire(0)


def test_serve_examples():
    t = 50
    q = queue_with_ages([10, 5, 2], t)
    assert q.serve(2, t) == [10, 5]
    assert q.ages(t) == [2]
    assert SliceQueue(1, 10).serve(7, 0) == []

    q = queue_with_ages([70], 100)
    q.expire(100)
    lat = q.serve(1, 100)
    assert lat == [70]
    assert qos(2, lat[0], T_MAX) == 1


def test_serve_negative():
    with pytest.raises(ValueError):
        SliceQueue(1, 10).serve(-1, 0)


def test_qos_examples():
    assert qos(1, 10_000, T_MAX) == 1
    assert qos(2, 70, T_MAX) == 1
    assert qos(2, 71, T_MAX) == 0
    assert qos(1, INF, T_MAX) == 0
    assert qos(2, INF, T_MAX) == 0


def f2(age):
    return qos(2, age, T_MAX)


@pytest.mark.parametrize("ages,expected", [([68, 70, 70], 2), ([], 0), ([69, 69], 0)])
def test_urgent_count_examples(ages, expected):
    t = 300
    q = queue_with_ages(sorted(ages, reverse=True), t)
    assert q.urgent_count(t) == expected
    # defining sum over packets
    assert sum(f2(a) - f2(a + 1) for a in q.ages(t)) == expected


def test_urgent_count_requires_deadline():
    with pytest.raises(ValueError):
        SliceQueue(1, 10).urgent_count(0)


def test_slot_reward_examples():
    assert slot_reward(([3, 4, 5], [1, 2]), T_MAX) == 5
    assert slot_reward(([], []), T_MAX) == 0
    assert slot_reward(([], [70]), T_MAX) == 1
    assert slot_reward(([], [71]), T_MAX) == 0


def test_packets_and_counts():
    q = queue_with_ages([5, 5, 2], 10)
    assert q.packets() == [Packet(2, 5), Packet(2, 5), Packet(2, 8)]
    assert q.count_created_at(5) == 2
    assert q.count_created_at(8) == 1
    assert q.count_created_at(6) == 0
    assert list(q.runs()) == [(5, 2), (8, 1)]
    assert Packet(1, 3).age(10) == 7


# -- reference model -----------------------------------------------------------


class ListQueue:
    """One entry per packet; the obvious implementation."""

    def __init__(self, capacity, deadline):
        self.items = []
        self.capacity = capacity
        self.deadline = deadline

    def enqueue(self, k, t):
        acc = min(k, self.capacity - len(self.items))
        self.items += [t] * acc
        return acc, k - acc

    def expire(self, t):
        keep = [c for c in self.items if t - c <= self.deadline]
        dropped = len(self.items) - len(keep)
        self.items = keep
        return dropped

    def serve(self, k, t):
        out = [t - c for c in self.items[:k]]
        self.items = self.items[k:]
        return out


slot_ops = st.lists(
    st.tuples(st.integers(0, 3), st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=60
)


@settings(max_examples=200, deadline=None)
@given(ops=slot_ops, capacity=st.integers(1, 12), deadline=st.integers(0, 6))
def test_matches_list_model(ops, capacity, deadline):
    q = SliceQueue(2, capacity, deadline)
    ref = ListQueue(capacity, deadline)
    arrivals = served = 0
    t = 0
    prev_ages = {}
    for gap, k_new, k_serve in ops:
        t += gap
        assert q.expire(t) == ref.expire(t)
        assert q.enqueue(k_new, t) == ref.enqueue(k_new, t)
        arrivals += k_new
        assert q.urgent_count(t) == sum(1 for c in ref.items if t - c == deadline)
        lat = q.serve(k_serve, t)
        assert lat == ref.serve(k_serve, t)
        served += len(lat)
        assert all(x <= deadline for x in lat)
        assert len(q) <= capacity
        ages = q.ages(t)
        assert ages == sorted(ages, reverse=True)
        assert ages == [t - c for c in ref.items]
        # monotone aging: a packet never gets younger
        assert all(a >= prev_ages.get(t - a, a) for a in ages)
        prev_ages = {t - a: a for a in ages}
    assert arrivals == q.rejected + q.deadline_dropped + q.served + len(q)
    assert q.served == served
    assert q.accepted == arrivals - q.rejected


@settings(max_examples=100, deadline=None)
@given(ops=slot_ops, capacity=st.integers(1, 12))
def test_reject_only_queue_conservation(ops, capacity):
    q = SliceQueue(1, capacity)
    arrivals = 0
    t = 0
    for gap, k_new, k_serve in ops:
        t += gap
        q.enqueue(k_new, t)
        arrivals += k_new
        q.serve(k_serve, t)
    assert q.deadline_dropped == 0
    assert arrivals == q.rejected + q.served + len(q)


@settings(max_examples=100, deadline=None)
@given(lat=st.lists(st.lists(st.integers(0, T_MAX), max_size=15), min_size=2, max_size=2))
def test_slot_reward_counts_served_within_deadline(lat):
    assert slot_reward(lat, T_MAX) == len(lat[0]) + len(lat[1])


# -- counterfactual ------------------------------------------------------------


def snapshot(ages1, ages2, t):
    q1 = queue_with_ages(sorted(ages1, reverse=True), t, slice_id=1, deadline=None)
    q2 = queue_with_ages(sorted(ages2, reverse=True), t)
    q2.expire(t)
    return q1, q2


def test_counterfactual_examples():
    t = 500
    q1, q2 = snapshot([3] * 15, [], t)
    assert counterfactual_reward(q1, q2, t, 15, T_MAX) == 15
    q1, q2 = snapshot([], [], t)
    assert counterfactual_reward(q1, q2, t, 15, T_MAX) == 0


def test_counterfactual_reads_only():
    t = 500
    q1, q2 = snapshot([9, 8, 1], [70, 70, 2], t)
    before = (q1.ages(t), q2.ages(t), len(q1), len(q2))
    counterfactual_reward(q1, q2, t, 4, T_MAX)
    assert (q1.ages(t), q2.ages(t), len(q1), len(q2)) == before


@settings(max_examples=200, deadline=None)
@given(
    ages1=st.lists(st.integers(0, 200), max_size=20),
    ages2=st.lists(st.integers(0, 80), max_size=20),
    n=st.integers(0, 20),
)
def test_counterfactual_equals_min_n_backlog(ages1, ages2, n):
    # after expiry every queued packet would earn QoS 1 if served now
    t = 1000
    q1, q2 = snapshot(ages1, ages2, t)
    assert counterfactual_reward(q1, q2, t, n, T_MAX) == min(n, len(q1) + len(q2))


def test_infinite_latency_constant():
    assert INF == math.inf
