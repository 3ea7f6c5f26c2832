"""Resource split used in learning slots.

Every resource goes to the candidate with the largest marginal gain in the
objective ``(R1 + R2) / M + S / E``, where each term is a shortfall
penalty: ``min(0, granted - demand)``.  Demands are the slice-1 backlog
above the pressure threshold, the urgent slice-2 packets and the pending
learning fragments, each capped at N.  Once every shortfall is zero, spare
resources serve whatever is still queued (slice 2 first) and the rest idle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class GreedyInputs:
    q1: int
    q2: int
    xi2: int
    e_pkts: int
    n: int
    chi1: int
    learning_capacity: int = 1500
    n_slices: int = 2

    def __post_init__(self) -> None:
        if min(self.q1, self.q2, self.xi2, self.e_pkts, self.n, self.chi1) < 0:
            raise ValueError("greedy inputs must be non-negative")
        if self.xi2 > self.q2:
            raise ValueError("urgent count exceeds the slice-2 queue length")

    @property
    def demand1(self) -> int:
        return min(max(self.q1 - self.chi1, 0), self.n)

    @property
    def demand2(self) -> int:
        return min(self.xi2, self.n)

    @property
    def demand_learn(self) -> int:
        return min(self.e_pkts, self.n)


@dataclass(frozen=True)
class Allocation:
    z1: int
    z2: int
    z_learn: int

    def idle(self, n: int) -> int:
        return n - self.z1 - self.z2 - self.z_learn

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.z1, self.z2, self.z_learn)


def shortfall_terms(inp: GreedyInputs, z: Allocation) -> tuple[int, int, int]:
    """(R1, R2, S): non-positive shortfalls of slice 1, slice 2 and learning."""
    return (
        min(0, z.z1 - inp.demand1),
        min(0, z.z2 - inp.demand2),
        min(0, z.z_learn - inp.demand_learn),
    )


def objective(inp: GreedyInputs, z: Allocation) -> Fraction:
    r1, r2, s = shortfall_terms(inp, z)
    return Fraction(r1 + r2, inp.n_slices) + Fraction(s, inp.learning_capacity)


def _finish(inp: GreedyInputs, z1: int, z2: int, zl: int) -> Allocation:
    spare = inp.n - z1 - z2 - zl
    extra2 = min(spare, inp.q2 - z2)
    spare -= extra2
    extra1 = min(spare, max(inp.q1 - z1, 0))
    return Allocation(z1 + extra1, z2 + extra2, zl)


def greedy_allocate(inp: GreedyInputs) -> Allocation:
    """Marginal-gain allocation with the slice-2 > slice-1 > learning tie order."""
    # per-resource gains are 1/M for a slice and 1/E for learning
    if inp.learning_capacity >= inp.n_slices:
        order = ("z2", "z1", "zl")
    else:
        order = ("zl", "z2", "z1")
    demand = {"z1": inp.demand1, "z2": inp.demand2, "zl": inp.demand_learn}
    granted = {}
    left = inp.n
    for name in order:
        granted[name] = min(demand[name], left)
        left -= granted[name]
    return _finish(inp, granted["z1"], granted["z2"], granted["zl"])


BRUTE_FORCE_MAX_N = 12


def _rank(inp: GreedyInputs, z: Allocation) -> tuple:
    served2 = min(z.z2, inp.q2)
    served1 = min(z.z1, inp.q1)
    return (
        objective(inp, z),
        min(z.z2, inp.demand2),
        served2 + served1,
        served2,
        -(z.z1 + z.z2 + z.z_learn),
    )


def brute_force_allocate(inp: GreedyInputs) -> Allocation:
    """Exhaustive search over every vector with z1 + z2 + z_learn <= N.

    Ties on the objective are broken by, in order: more urgent slice-2
    packets covered, more packets served, more slice-2 packets served,
    fewer resources handed out.
    """
    if inp.n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to N <= {BRUTE_FORCE_MAX_N}")
    n = inp.n
    best: Allocation | None = None
    best_rank = None
    for z1, z2 in itertools.product(range(n + 1), repeat=2):
        for zl in range(n + 1 - z1 - z2):
            z = Allocation(z1, z2, zl)
            rank = _rank(inp, z)
            if best_rank is None or rank > best_rank:
                best, best_rank = z, rank
    assert best is not None
    return best
