"""Slot-by-slot simulation of the two slices, the learning plane and the agent.

Each slot runs, in order: traffic generation, slice-2 expiry, admission of
arrivals, slot typing, allocation, service, learning-plane transport,
experience generation (DRL slots only), cloud-side training, metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import traffic
from .allocator import GreedyInputs, greedy_allocate
from .core import SimConfig, Stream, substream
from .dqn import DQNAgent, SliceStats, observe
from .learning_plane import (
    ExperienceSample,
    LearningQueue,
    RhoSchedule,
    SlotType,
    draw_slot_type,
    rho,
)
from .queueing import SliceQueue, counterfactual_reward, slot_reward

DYNAMIC = "dynamic"
OUT_OF_BAND = "oob"
STATIC = "static"


@dataclass(frozen=True)
class Mode:
    kind: str
    k: int = 0

    @classmethod
    def parse(cls, text: str) -> "Mode":
        text = text.strip().lower()
        if text in (DYNAMIC, OUT_OF_BAND):
            return cls(text)
        if text.startswith(STATIC + ":"):
            try:
                k = int(text.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"bad static reservation in mode {text!r}") from None
            return cls(STATIC, k)
        raise ValueError(f"unknown mode {text!r}; expected dynamic, oob or static:<k>")

    def __str__(self) -> str:
        return f"{STATIC}:{self.k}" if self.kind == STATIC else self.kind

    def data_resources(self, n: int) -> int:
        if self.kind == STATIC:
            if not 1 <= self.k <= n - 1:
                raise ValueError(f"static reservation must lie in [1, {n - 1}], got {self.k}")
            return n - self.k
        return n


@dataclass
class SlotOutcome:
    t: int
    slot_type: SlotType
    allocation: tuple[int, int, int]
    arrivals: tuple[int, int]
    served: tuple[int, int]
    rejected: tuple[int, int]
    dropped: int
    latencies: tuple[list[int], list[int]]
    reward: float
    fragments_sent: int
    samples_delivered: int
    sample_offered: bool
    reward_loss: Optional[float] = None


COLUMNS = (
    "second",
    "reward_per_s",
    "samples_delivered_per_s",
    "s1_rejected_per_s",
    "s2_lost_per_s",
    "s2_mean_latency_ms",
    "learnslot_loss_mean",
    "epsilon",
    "rho",
)


@dataclass
class MetricsSeries:
    """Per-second aggregates plus whole-run bookkeeping."""

    mode: str = ""
    seed: int = 0
    rows: list[tuple] = field(default_factory=list)
    learning_losses: np.ndarray = field(default_factory=lambda: np.zeros(0))
    totals: dict[str, int] = field(default_factory=dict)
    arrivals: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        i = COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def conservation_errors(self) -> list[str]:
        """Violated accounting identities; empty when everything balances."""
        t = self.totals
        errors = []
        for m in (1, 2):
            lhs = t[f"arrivals_{m}"]
            rhs = t[f"served_{m}"] + t[f"rejected_{m}"] + t[f"dropped_{m}"] + t[f"queued_{m}"]
            if lhs != rhs:
                errors.append(f"slice {m}: arrivals {lhs} != served+rejected+dropped+queued {rhs}")
        lhs = t["samples_offered"]
        rhs = t["samples_early_rejected"] + t["samples_delivered"] + t["samples_pending"]
        if lhs != rhs:
            errors.append(f"samples: offered {lhs} != rejected+delivered+pending {rhs}")
        accepted = t["samples_offered"] - t["samples_early_rejected"]
        if t["mode"] != OUT_OF_BAND and (
            accepted * t["fragments_per_sample"] != t["fragments_sent"] + t["fragments_pending"]
        ):
            errors.append("fragments: accepted*l != sent + pending")
        if t["samples_trained_on"] > t["samples_delivered"]:
            errors.append("replay holds more samples than were delivered")
        return errors


def reward_loss(q1: SliceQueue, q2: SliceQueue, t: int, cfg: SimConfig, achieved: float) -> float:
    """Shortfall of ``achieved`` against serving only the queues, over N.

    ``q1``/``q2`` must be the queues as they stood before this slot's
    service.
    """
    ref = counterfactual_reward(q1, q2, t, cfg.n_resources, cfg.deadline)
    return (ref - achieved) / cfg.n_resources


class Simulation:
    def __init__(self, cfg: SimConfig, mode: Mode | str, seed: int, record_arrivals: bool = False) -> None:
        if isinstance(mode, str):
            mode = Mode.parse(mode)
        self.cfg = cfg
        self.mode = mode
        self.seed = seed
        self.n_data = mode.data_resources(cfg.n_resources)
        self.t = 0

        self.rng_traffic = substream(seed, Stream.TRAFFIC)
        self.rng_slot = substream(seed, Stream.SLOT_TYPE)
        self.rng_reject = substream(seed, Stream.REJECTION)
        self.rng_explore = substream(seed, Stream.EXPLORATION)

        self.models = traffic.slice_models(cfg)
        self.traffic = [traffic.initial_state(m, self.rng_traffic) for m in self.models]
        self.q1 = SliceQueue(1, cfg.queue_capacity)
        self.q2 = SliceQueue(2, cfg.queue_capacity, cfg.deadline)
        self.lq = LearningQueue(cfg.learning_queue_capacity, cfg.fragments_per_sample)
        self.schedule = RhoSchedule(cfg.rho_0, cfg.rho_f, cfg.rho_decay, cfg.rho_pace)
        self.agent = DQNAgent(
            cfg, self.n_data, substream(seed, Stream.WEIGHT_INIT), substream(seed, Stream.REPLAY)
        )

        self.a = (self.n_data // 2, self.n_data - self.n_data // 2)
        self.obs = observe(cfg, (0, 0), (SliceStats(), SliceStats()), self.a, 0, self.n_data)

        self.arrivals = [0, 0]
        self.oob_samples = 0
        self._arrival_log: list[tuple[int, int]] | None = [] if record_arrivals else None
        self.slots_per_block = max(1, round(1.0 / cfg.slot_duration))
        self._losses: list[float] = []
        self._rows: list[tuple] = []
        self._reset_block()

    # -- slot ----------------------------------------------------------------

    def step(self) -> SlotOutcome:
        cfg = self.cfg
        t = self.t
        n = cfg.n_resources
        q1, q2 = self.q1, self.q2

        self.traffic[0], k1 = traffic.step(self.traffic[0], self.models[0], self.rng_traffic)
        self.traffic[1], k2 = traffic.step(self.traffic[1], self.models[1], self.rng_traffic)
        self.arrivals[0] += k1
        self.arrivals[1] += k2
        if self._arrival_log is not None:
            self._arrival_log.append((k1, k2))

        dropped2 = q2.expire(t)
        _, rej1 = q1.enqueue(k1, t)
        _, rej2 = q2.enqueue(k2, t)

        learning = (
            self.mode.kind == DYNAMIC
            and draw_slot_type(t, self.schedule, self.rng_slot) is SlotType.LEARNING
        )
        action = -1
        if learning:
            inp = GreedyInputs(
                len(q1), len(q2), q2.urgent_count(t), self.lq.e_pkts, n,
                cfg.pressure_threshold, cfg.learning_queue_capacity,
            )
            z1, z2, z_learn = greedy_allocate(inp).as_tuple()
            reference = counterfactual_reward(q1, q2, t, n, cfg.deadline)
        else:
            action, self.a = self.agent.act(self.obs, self.a, self.rng_explore)
            z1, z2 = self.a
            z_learn = 0

        lat1 = q1.serve(z1, t)
        lat2 = q2.serve(z2, t)
        reward = slot_reward((lat1, lat2), cfg.deadline)
        loss = (reference - reward) / n if learning else None

        sent_before = self.lq.fragments_sent
        if self.mode.kind == DYNAMIC:
            delivered = self.lq.transmit(z_learn) if learning else []
        elif self.mode.kind == STATIC:
            delivered = self.lq.transmit(self.mode.k)
        else:
            delivered = []
        fragments = self.lq.fragments_sent - sent_before
        assert len(lat1) + len(lat2) + fragments <= n

        stats = (SliceStats.from_latencies(lat1, rej1), SliceStats.from_latencies(lat2, rej2 + dropped2))
        urgent_next = q2.count_created_at(t + 1 - cfg.deadline)
        new_obs = observe(cfg, (len(q1), len(q2)), stats, self.a, urgent_next, self.n_data)

        if not learning:
            sample = ExperienceSample(self.obs, action, reward / n, new_obs)
            if self.mode.kind == OUT_OF_BAND:
                delivered = [sample]
                self.oob_samples += 1
            else:
                self.lq.offer(sample, self.rng_reject)
        self.obs = new_obs

        self.agent.ingest(delivered)
        self.agent.train_tick()

        out = SlotOutcome(
            t=t,
            slot_type=SlotType.LEARNING if learning else SlotType.DRL,
            allocation=(z1, z2, z_learn),
            arrivals=(k1, k2),
            served=(len(lat1), len(lat2)),
            rejected=(rej1, rej2),
            dropped=dropped2,
            latencies=(lat1, lat2),
            reward=reward,
            fragments_sent=fragments,
            samples_delivered=len(delivered),
            sample_offered=not learning,
            reward_loss=loss,
        )
        self._record(out)
        self.t += 1
        return out

    # -- metrics -------------------------------------------------------------

    def _reset_block(self) -> None:
        self._b_reward = 0.0
        self._b_delivered = 0
        self._b_rej1 = 0
        self._b_lost2 = 0
        self._b_lat2 = 0
        self._b_n2 = 0
        self._b_loss = 0.0
        self._b_nloss = 0

    def _record(self, out: SlotOutcome) -> None:
        self._b_reward += out.reward
        self._b_delivered += out.samples_delivered
        self._b_rej1 += out.rejected[0]
        self._b_lost2 += out.rejected[1] + out.dropped
        lat2 = out.latencies[1]
        if lat2:
            self._b_lat2 += sum(lat2)
            self._b_n2 += len(lat2)
        if out.reward_loss is not None:
            self._b_loss += out.reward_loss
            self._b_nloss += 1
            self._losses.append(out.reward_loss)
        if (out.t + 1) % self.slots_per_block == 0:
            ms_per_slot = self.cfg.slot_duration * 1000.0
            rho_now = rho(out.t, self.schedule) if self.mode.kind == DYNAMIC else 0.0
            self._rows.append((
                (out.t + 1) // self.slots_per_block,
                self._b_reward,
                float(self._b_delivered),
                float(self._b_rej1),
                float(self._b_lost2),
                self._b_lat2 / self._b_n2 * ms_per_slot if self._b_n2 else math.nan,
                self._b_loss / self._b_nloss if self._b_nloss else math.nan,
                self.agent.epsilon,
                rho_now,
            ))
            self._reset_block()

    def totals(self) -> dict[str, int]:
        lq = self.lq
        oob = self.mode.kind == OUT_OF_BAND
        return {
            "mode": str(self.mode),
            "slots": self.t,
            "arrivals_1": self.arrivals[0],
            "arrivals_2": self.arrivals[1],
            "served_1": self.q1.served,
            "served_2": self.q2.served,
            "rejected_1": self.q1.rejected,
            "rejected_2": self.q2.rejected,
            "dropped_1": 0,
            "dropped_2": self.q2.deadline_dropped,
            "queued_1": len(self.q1),
            "queued_2": len(self.q2),
            "samples_offered": self.oob_samples if oob else lq.offered,
            "samples_early_rejected": 0 if oob else lq.early_rejected,
            "samples_delivered": self.oob_samples if oob else lq.delivered,
            "samples_pending": 0 if oob else len(lq),
            "fragments_per_sample": lq.fragments,
            "fragments_sent": lq.fragments_sent,
            "fragments_pending": lq.e_pkts,
            "samples_trained_on": self.agent.replay.added,
            "train_steps": self.agent.train_steps,
        }

    def metrics(self) -> MetricsSeries:
        return MetricsSeries(
            mode=str(self.mode),
            seed=self.seed,
            rows=list(self._rows),
            learning_losses=np.array(self._losses, dtype=float),
            totals=self.totals(),
            arrivals=None if self._arrival_log is None else np.array(self._arrival_log, dtype=np.int64),
        )


def run(cfg: SimConfig, mode: Mode | str, seed: int, duration_slots: int,
        record_arrivals: bool = False) -> MetricsSeries:
    sim = Simulation(cfg, mode, seed, record_arrivals=record_arrivals)
    if duration_slots % sim.slots_per_block:
        raise ValueError(f"duration must be a multiple of {sim.slots_per_block} slots")
    for _ in range(duration_slots):
        sim.step()
    return sim.metrics()
