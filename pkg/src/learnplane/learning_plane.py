"""Learning-slot schedule and the uplink queue carrying experience samples."""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class RhoSchedule:
    rho_0: float = 0.2
    rho_f: float = 0.01
    sigma: float = 8e-4
    pace: int = 1000

    def __post_init__(self) -> None:
        if not 0.0 <= self.rho_f <= self.rho_0 <= 1.0:
            raise ValueError("need 0 <= rho_f <= rho_0 <= 1")
        if self.sigma <= 0 or self.pace < 1:
            raise ValueError("sigma must be > 0 and pace >= 1")

    def floor_slot(self) -> int:
        """First slot at which the schedule sits at rho_f."""
        blocks = math.ceil((self.rho_0 - self.rho_f) / self.sigma - 1e-9)
        return self.pace * max(blocks, 0)


def rho(t: int, sched: RhoSchedule) -> float:
    return max(sched.rho_f, sched.rho_0 - (t // sched.pace) * sched.sigma)


class SlotType(enum.Enum):
    DRL = "drl"
    LEARNING = "learning"


def draw_slot_type(t: int, sched: RhoSchedule, rng: np.random.Generator) -> SlotType:
    return SlotType.LEARNING if rng.random() < rho(t, sched) else SlotType.DRL


class ExperienceSample(NamedTuple):
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray


class LearningQueue:
    """FIFO of samples waiting for uplink, each split into ``fragments`` packets.

    Fragments leave strictly head first, so a partially sent sample is
    always at the head.
    """

    def __init__(self, capacity: int, fragments: int) -> None:
        self.capacity = capacity
        self.fragments = fragments
        self._items: deque[list] = deque()  # [sample, fragments left]
        self.e_pkts = 0
        self.offered = 0
        self.early_rejected = 0
        self.delivered = 0
        self.fragments_sent = 0

    def __len__(self) -> int:
        return len(self._items)

    @property
    def pressure(self) -> float:
        return len(self._items) / self.capacity

    def remaining(self) -> list[int]:
        return [item[1] for item in self._items]

    def push(self, sample: ExperienceSample, fragments_left: int | None = None) -> None:
        """Append without the pressure test (tests and state restoration)."""
        left = self.fragments if fragments_left is None else fragments_left
        self._items.append([sample, left])
        self.e_pkts += left

    def offer(self, sample: ExperienceSample, rng: np.random.Generator) -> bool:
        """Admit with probability 1 - e/E; a full queue always rejects."""
        self.offered += 1
        if rng.random() < len(self._items) / self.capacity:
            self.early_rejected += 1
            return False
        self.push(sample)
        return True

    def transmit(self, k: int) -> list[ExperienceSample]:
        if k < 0:
            raise ValueError("k must be >= 0")
        items = self._items
        done: list[ExperienceSample] = []
        sent = 0
        while k > 0 and items:
            head = items[0]
            step = min(k, head[1])
            head[1] -= step
            k -= step
            sent += step
            if head[1] == 0:
                done.append(items.popleft()[0])
        self.e_pkts -= sent
        self.fragments_sent += sent
        self.delivered += len(done)
        return done


def offer_sample(queue: LearningQueue, sample: ExperienceSample, rng: np.random.Generator) -> bool:
    return queue.offer(sample, rng)


def transmit(queue: LearningQueue, k: int) -> list[ExperienceSample]:
    return queue.transmit(k)
