"""Gilbert-Elliott on/off user activity and the aggregate active-user chain.

``O[i][j]`` is the probability that a user in state ``i`` moves to state
``j`` (0 = silent, 1 = transmitting).  That orientation is the one that
reproduces the expected-traffic values 2.88 MB/s and 4.35 MB/s of the
default scenario.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .core import Matrix2, SimConfig


@dataclass(frozen=True)
class TrafficModel:
    users: int
    rate: float
    activity: Matrix2
    packets_per_user: int = 1

    def __post_init__(self) -> None:
        if self.users < 0:
            raise ValueError("users must be >= 0")
        if self.rate <= 0:
            raise ValueError("rate must be > 0")
        for row in self.activity:
            if abs(row[0] + row[1] - 1.0) > 1e-12 or min(row) < 0.0:
                raise ValueError(f"activity rows must be probability vectors, got {row}")

    @property
    def p_on(self) -> float:
        """Silent -> active transition probability."""
        return self.activity[0][1]

    @property
    def p_off(self) -> float:
        """Active -> silent transition probability."""
        return self.activity[1][0]

    def stationary_active(self) -> float:
        denom = self.p_on + self.p_off
        if denom == 0.0:
            raise ValueError("degenerate activity chain: no stationary distribution")
        return self.p_on / denom


def slice_models(cfg: SimConfig) -> tuple[TrafficModel, TrafficModel]:
    ppu = cfg.packets_per_user
    return tuple(
        TrafficModel(cfg.users[m], cfg.user_rate[m], cfg.activity[m], ppu[m]) for m in range(2)
    )  # type: ignore[return-value]


@dataclass
class TrafficState:
    active: np.ndarray  # bool, one entry per user

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.active))


def initial_state(model: TrafficModel, rng: np.random.Generator) -> TrafficState:
    """Draw every user's activity from the stationary distribution."""
    try:
        p = model.stationary_active()
    except ValueError:
        p = 0.0
    return TrafficState(rng.random(model.users) < p)


def step(
    state: TrafficState, model: TrafficModel, rng: np.random.Generator
) -> tuple[TrafficState, int]:
    """Advance every user one slot; arrivals come from the new activity."""
    if state.active.shape != (model.users,):
        raise ValueError("state length does not match the number of users")
    u = rng.random(model.users)
    stay_on = model.activity[1][1]
    active = np.where(state.active, u < stay_on, u < model.p_on)
    return TrafficState(active), int(np.count_nonzero(active)) * model.packets_per_user


def aggregate_transition_prob(u: int, v: int, model: TrafficModel) -> float:
    """P(v active users next slot | u active now) for independent users."""
    n = model.users
    if not (0 <= u <= n and 0 <= v <= n):
        raise ValueError(f"active counts must lie in [0, {n}], got u={u}, v={v}")
    (o00, o01), (o10, o11) = model.activity
    total = 0.0
    # w = users that stay active; v - w = silent users that switch on
    for w in range(max(0, u + v - n), min(u, v) + 1):
        total += (
            o11**w * o10 ** (u - w) * comb(u, w)
            * comb(n - u, v - w) * o01 ** (v - w) * o00 ** (n - u - v + w)
        )
    return total


def aggregate_transition_matrix(model: TrafficModel) -> np.ndarray:
    n = model.users
    return np.array(
        [[aggregate_transition_prob(u, v, model) for v in range(n + 1)] for u in range(n + 1)]
    )


def expected_traffic(model: TrafficModel) -> float:
    """Long-run offered load of one slice in bytes/s."""
    return model.stationary_active() * model.users * model.rate


def capacity(cfg: SimConfig) -> float:
    """Link capacity N * L / tau in bytes/s."""
    return cfg.n_resources * cfg.packet_size / cfg.slot_duration
