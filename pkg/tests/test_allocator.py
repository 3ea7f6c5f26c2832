import itertools
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings, strategies as st

from learnplane.allocator import (
    BRUTE_FORCE_MAX_N,
    Allocation,
    GreedyInputs,
    brute_force_allocate,
    greedy_allocate,
    objective,
    shortfall_terms,
)

CHI1 = 1400


def test_shortfall_examples():
    inp = GreedyInputs(q1=CHI1, q2=0, xi2=0, e_pkts=0, n=15, chi1=CHI1)
    for z in [Allocation(0, 0, 0), Allocation(5, 5, 5), Allocation(15, 0, 0)]:
        assert shortfall_terms(inp, z) == (0, 0, 0)
    inp = GreedyInputs(q1=1405, q2=4, xi2=4, e_pkts=0, n=15, chi1=CHI1)
    assert shortfall_terms(inp, Allocation(3, 4, 0))[:2] == (-2, 0)


def test_objective_weights():
    inp = GreedyInputs(q1=1405, q2=4, xi2=4, e_pkts=30, n=15, chi1=CHI1, learning_capacity=1500)
    z = Allocation(3, 2, 1)
    assert objective(inp, z) == Fraction(-2 - 2, 2) + Fraction(-14, 1500)


def test_greedy_examples():
    inp = GreedyInputs(q1=1405, q2=4, xi2=4, e_pkts=30, n=15, chi1=CHI1)
    z = greedy_allocate(inp)
    assert z.as_tuple() == (5, 4, 6)
    assert objective(inp, z) == exhaustive_best(inp)

    empty = GreedyInputs(0, 0, 0, 0, 15, CHI1)
    z = greedy_allocate(empty)
    assert z.as_tuple() == (0, 0, 0) and z.idle(15) == 15

    urgent = GreedyInputs(q1=1500, q2=20, xi2=20, e_pkts=9, n=15, chi1=CHI1)
    assert greedy_allocate(urgent).as_tuple() == (0, 15, 0)


def test_brute_force_examples():
    assert brute_force_allocate(GreedyInputs(0, 1, 1, 1, 1, CHI1)).as_tuple() == (0, 1, 0)
    assert brute_force_allocate(GreedyInputs(0, 0, 0, 1, 1, CHI1)).as_tuple() == (0, 0, 1)


def test_brute_force_bound():
    with pytest.raises(ValueError):
        brute_force_allocate(GreedyInputs(0, 0, 0, 0, BRUTE_FORCE_MAX_N + 1, CHI1))


def test_leftovers_serve_residual_queues():
    # no shortfall anywhere; spare resources go to slice 2, then slice 1
    inp = GreedyInputs(q1=4, q2=3, xi2=0, e_pkts=2, n=15, chi1=CHI1)
    assert greedy_allocate(inp).as_tuple() == (4, 3, 2)
    inp = GreedyInputs(q1=10, q2=10, xi2=1, e_pkts=0, n=6, chi1=CHI1)
    assert greedy_allocate(inp).as_tuple() == (0, 6, 0)


def test_input_validation():
    with pytest.raises(ValueError):
        GreedyInputs(-1, 0, 0, 0, 1, 0)
    with pytest.raises(ValueError):
        GreedyInputs(0, 1, 2, 0, 1, 0)


@st.composite
def inputs(draw, max_n=6, capacities=(1, 2, 3, 10, 1500)):
    n = draw(st.integers(0, max_n))
    q2 = draw(st.integers(0, 2 * max_n))
    return GreedyInputs(
        q1=draw(st.integers(0, 3 * max_n)),
        q2=q2,
        xi2=draw(st.integers(0, q2)),
        e_pkts=draw(st.integers(0, 2 * max_n)),
        n=n,
        chi1=draw(st.integers(0, 2 * max_n)),
        learning_capacity=draw(st.sampled_from(capacities)),
    )


def exhaustive_best(inp):
    """Independent maximum of the objective over every vector."""
    return max(
        objective(inp, Allocation(a, b, c))
        for a, b in itertools.product(range(inp.n + 1), repeat=2)
        for c in range(inp.n + 1 - a - b)
    )


@settings(max_examples=300, deadline=None)
@given(inp=inputs())
def test_greedy_is_optimal(inp):
    z = greedy_allocate(inp)
    assert objective(inp, z) == exhaustive_best(inp)
    assert z == brute_force_allocate(inp)


@settings(max_examples=300, deadline=None)
@given(inp=inputs(max_n=15))
def test_output_validity(inp):
    z = greedy_allocate(inp)
    assert min(z.as_tuple()) >= 0
    assert z.z1 + z.z2 + z.z_learn + z.idle(inp.n) == inp.n
    assert z.idle(inp.n) >= 0
    assert z.z_learn <= inp.e_pkts
    assert z.z2 <= max(inp.q2, 0) and z.z1 <= max(inp.q1, 0)


@settings(max_examples=300, deadline=None)
@given(inp=inputs(max_n=15, capacities=(2, 3, 10, 1500)))
def test_priority(inp):
    assume(inp.demand1 + inp.demand2 <= inp.n)
    r1, r2, _ = shortfall_terms(inp, greedy_allocate(inp))
    assert r1 == 0 and r2 == 0


@settings(max_examples=200, deadline=None)
@given(inp=inputs(max_n=15), extra=st.integers(1, 20))
def test_more_fragments_never_less_learning(inp, extra):
    more = GreedyInputs(inp.q1, inp.q2, inp.xi2, inp.e_pkts + extra, inp.n, inp.chi1,
                        inp.learning_capacity)
    assert greedy_allocate(more).z_learn >= greedy_allocate(inp).z_learn


def test_table_scale_instance():
    inp = GreedyInputs(q1=1410, q2=30, xi2=3, e_pkts=4500, n=15, chi1=CHI1)
    assert greedy_allocate(inp).as_tuple() == (10, 3, 2)
