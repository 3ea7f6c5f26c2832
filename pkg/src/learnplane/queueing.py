"""Bounded FIFO slice queues with rejection, deadline expiry and QoS.

Packets arriving in the same slot are indistinguishable, so a queue stores
``[created_at, count]`` runs instead of one object per packet.  The head
run is always the oldest.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from itertools import islice
from typing import Iterable, Iterator, Sequence

INF = math.inf


@dataclass(frozen=True)
class Packet:
    slice_id: int
    created_at: int

    def age(self, t: int) -> int:
        return t - self.created_at


class SliceQueue:
    """FIFO of packets for one slice.

    ``deadline=None`` gives the reject-only policy; an integer enables
    expiry of packets whose age exceeds it.
    """

    def __init__(self, slice_id: int, capacity: int, deadline: int | None = None) -> None:
        self.slice_id = slice_id
        self.capacity = capacity
        self.deadline = deadline
        self._runs: deque[list[int]] = deque()
        self._len = 0
        self.accepted = 0
        self.rejected = 0
        self.deadline_dropped = 0
        self.served = 0

    def __len__(self) -> int:
        return self._len

    def runs(self) -> Iterator[tuple[int, int]]:
        """(created_at, count) pairs from head to tail."""
        for created, count in self._runs:
            yield created, count

    def ages(self, t: int) -> list[int]:
        return [t - created for created, count in self._runs for _ in range(count)]

    def packets(self) -> list[Packet]:
        return [Packet(self.slice_id, c) for c, n in self._runs for _ in range(n)]

    def enqueue(self, k_new: int, t: int) -> tuple[int, int]:
        if k_new < 0:
            raise ValueError("k_new must be >= 0")
        runs = self._runs
        if runs and runs[-1][0] > t:
            raise ValueError("arrival slot precedes the tail packet")
        accepted = min(k_new, self.capacity - self._len)
        rejected = k_new - accepted
        if accepted:
            if runs and runs[-1][0] == t:
                runs[-1][1] += accepted
            else:
                runs.append([t, accepted])
            self._len += accepted
        self.accepted += accepted
        self.rejected += rejected
        return accepted, rejected

    def expire(self, t: int) -> int:
        """Drop every packet older than the deadline; returns the count."""
        if self.deadline is None:
            raise ValueError("expire() called on a queue without a deadline")
        oldest_kept = t - self.deadline
        runs = self._runs
        dropped = 0
        while runs and runs[0][0] < oldest_kept:
            dropped += runs.popleft()[1]
        self._len -= dropped
        self.deadline_dropped += dropped
        return dropped

    def serve(self, k: int, t: int) -> list[int]:
        """Remove up to ``k`` head packets and return their latencies."""
        if k < 0:
            raise ValueError("k must be >= 0")
        runs = self._runs
        out: list[int] = []
        while k > 0 and runs:
            head = runs[0]
            take = head[1] if head[1] <= k else k
            out.extend([t - head[0]] * take)
            k -= take
            if take == head[1]:
                runs.popleft()
            else:
                head[1] -= take
        self._len -= len(out)
        self.served += len(out)
        return out

    def urgent_count(self, t: int) -> int:
        """Packets that expire unless served this slot (age == deadline)."""
        if self.deadline is None:
            raise ValueError("urgent_count() needs a deadline policy")
        runs = self._runs
        if runs and runs[0][0] == t - self.deadline:
            return runs[0][1]
        return 0

    def count_created_at(self, created_at: int) -> int:
        for c, n in self._runs:
            if c == created_at:
                return n
            if c > created_at:
                break
        return 0


def qos(slice_id: int, latency: float, deadline: int) -> int:
    """Step QoS: slice 1 only needs delivery, slice 2 needs latency <= deadline."""
    if latency == INF:
        return 0
    if slice_id == 1:
        return 1
    return 1 if latency <= deadline else 0


def slot_reward(served: Sequence[Iterable[float]], deadline: int) -> float:
    """Sum of QoS over the packets served in one slot, slice by slice."""
    return float(
        sum(qos(m + 1, lat, deadline) for m, lats in enumerate(served) for lat in lats)
    )


def counterfactual_reward(
    q1: SliceQueue, q2: SliceQueue, t: int, n: int, deadline: int
) -> float:
    """Reward had all ``n`` resources gone to the queues this slot.

    Urgent slice-2 packets go first, then the oldest packets across both
    queues with slice 2 winning ties.  The queues are only read.
    """
    runs1 = [[c, k] for c, k in islice(q1.runs(), n)]
    runs2 = [[c, k] for c, k in islice(q2.runs(), n)]
    i = j = 0
    reward = 0
    left = n
    # slice-2 head is the oldest slice-2 run, hence holds every urgent packet
    while left > 0 and (i < len(runs1) or j < len(runs2)):
        take_two = j < len(runs2) and (
            i >= len(runs1) or runs2[j][0] <= runs1[i][0] or runs2[j][0] == t - deadline
        )
        run, sid = (runs2[j], 2) if take_two else (runs1[i], 1)
        take = min(run[1], left)
        reward += take * qos(sid, t - run[0], deadline)
        left -= take
        run[1] -= take
        if run[1] == 0:
            if take_two:
                j += 1
            else:
                i += 1
    return float(reward)
