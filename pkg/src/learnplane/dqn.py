"""Deep Q-network agent: observations, delta actions, replay and TD training.

The network is 13 -> 64 -> 32 -> 3 with ReLU hidden layers.  Its three
outputs score the allocation moves (+1, -1), (0, 0) and (-1, +1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .core import SimConfig
from .learning_plane import ExperienceSample

OBS_SIZE = 13
N_ACTIONS = 3
DELTAS = ((1, -1), (0, 0), (-1, 1))

OBS_FIELDS = (
    "q1", "tmin1", "tmax1", "tavg1", "d1", "a1",
    "q2", "tmin2", "tmax2", "tavg2", "d2", "a2",
    "xi2",
)


@dataclass
class SliceStats:
    """What one slice did in a slot: served latencies and lost packets."""

    served: int = 0
    lat_min: float = 0.0
    lat_max: float = 0.0
    lat_sum: float = 0.0
    lost: int = 0

    @classmethod
    def from_latencies(cls, latencies: Sequence[int], lost: int) -> "SliceStats":
        if not latencies:
            return cls(lost=lost)
        return cls(len(latencies), min(latencies), max(latencies), float(sum(latencies)), lost)

    @property
    def lat_avg(self) -> float:
        return self.lat_sum / self.served if self.served else 0.0


def observe(
    cfg: SimConfig,
    queue_lengths: tuple[int, int],
    stats: tuple[SliceStats, SliceStats],
    allocation: tuple[int, int],
    urgent: int,
    n_data: int,
) -> np.ndarray:
    """Normalised 13-entry state, ordered as ``OBS_FIELDS``.

    Slots with nothing served report 0 for that slice's latency entries.
    """
    lat_scale = (float(cfg.latency_clip_1), float(cfg.deadline or 1))
    ppu = cfg.packets_per_user
    obs = np.empty(OBS_SIZE)
    for m in range(2):
        s = stats[m]
        scale = lat_scale[m]
        base = 6 * m
        obs[base] = queue_lengths[m] / cfg.queue_capacity
        if s.served:
            obs[base + 1] = min(s.lat_min, scale) / scale
            obs[base + 2] = min(s.lat_max, scale) / scale
            obs[base + 3] = min(s.lat_avg, scale) / scale
        else:
            obs[base + 1] = obs[base + 2] = obs[base + 3] = 0.0
        obs[base + 4] = min(s.lost / max(cfg.users[m] * ppu[m], 1), 1.0)
        obs[base + 5] = allocation[m] / n_data
    obs[12] = min(urgent / cfg.queue_capacity, 1.0)
    return obs


def select_action(values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; the lowest index wins ties among maxima."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return int(np.argmax(values))


def apply_delta(a: tuple[int, int], action: int, n_data: int) -> tuple[int, int]:
    """Move one resource between slices; moves leaving [0, n_data] become no-ops."""
    d1, d2 = DELTAS[action]
    a1, a2 = a[0] + d1, a[1] + d2
    if 0 <= a1 <= n_data and 0 <= a2 <= n_data:
        return a1, a2
    return a


def epsilon_at(decisions: int, cfg: SimConfig) -> float:
    frac = min(decisions / cfg.eps_decay_slots, 1.0)
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac


# ---------------------------------------------------------------------------
# network


class QNetwork:
    """Value network over one flat parameter vector (see ``kernels``)."""

    def __init__(self, params: np.ndarray | None = None) -> None:
        if params is None:
            params = np.zeros(kernels.N_PARAMS)
        params = np.ascontiguousarray(params, dtype=np.float64)
        if params.shape != (kernels.N_PARAMS,):
            raise ValueError(f"expected {kernels.N_PARAMS} parameters, got {params.shape}")
        self.params = params

    @classmethod
    def initialized(cls, rng: np.random.Generator) -> "QNetwork":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases."""
        net = cls()
        for w, b in kernels.unpack(net.params):
            bound = 1.0 / np.sqrt(w.shape[1])
            w[...] = rng.uniform(-bound, bound, size=w.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)
        return net

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return kernels.unpack(self.params)

    def copy(self) -> "QNetwork":
        return QNetwork(self.params.copy())

    def __call__(self, obs: np.ndarray) -> np.ndarray:
        return forward(self, obs)


def forward(net: QNetwork, obs: np.ndarray) -> np.ndarray:
    obs = np.ascontiguousarray(obs, dtype=np.float64)
    if obs.ndim == 2:
        return kernels.forward_batch(net.params, obs)
    return kernels.forward(net.params, obs)


def sync_target(online: QNetwork, target: QNetwork) -> None:
    target.params[...] = online.params


CHECKPOINT_HEADER = "learnplane-qnetwork 1"


def save_checkpoint(net: QNetwork, path: str | Path) -> None:
    """Text dump: header, layer sizes, then one hex float per parameter."""
    lines = [CHECKPOINT_HEADER, "layers " + " ".join(map(str, kernels.LAYER_SIZES))]
    lines.extend(float(x).hex() for x in net.params)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_checkpoint(path: str | Path) -> QNetwork:
    lines = Path(path).read_text(encoding="ascii").split()
    if " ".join(lines[:2]) != CHECKPOINT_HEADER:
        raise ValueError(f"{path}: not a q-network checkpoint")
    sizes = tuple(int(x) for x in lines[3:3 + len(kernels.LAYER_SIZES)])
    if lines[2] != "layers" or sizes != tuple(kernels.LAYER_SIZES):
        raise ValueError(f"{path}: layer sizes {sizes} do not match {kernels.LAYER_SIZES}")
    values = lines[3 + len(sizes):]
    return QNetwork(np.array([float.fromhex(v) for v in values]))


# ---------------------------------------------------------------------------
# training


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = field(default_factory=lambda: np.zeros(kernels.N_PARAMS))
    v: np.ndarray = field(default_factory=lambda: np.zeros(kernels.N_PARAMS))
    grad: np.ndarray = field(default_factory=lambda: np.zeros(kernels.N_PARAMS))

    @classmethod
    def from_config(cls, cfg: SimConfig) -> "AdamState":
        return cls(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)


class Batch(NamedTuple):
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray

    @classmethod
    def from_samples(cls, samples: Sequence[ExperienceSample]) -> "Batch":
        return cls(
            np.array([s.obs for s in samples], dtype=np.float64),
            np.array([s.action for s in samples], dtype=np.int64),
            np.array([s.reward for s in samples], dtype=np.float64),
            np.array([s.next_obs for s in samples], dtype=np.float64),
        )


def td_targets(target: QNetwork, batch: Batch, gamma: float) -> np.ndarray:
    """r + gamma * max_a' Q_target(s', a'); the task never terminates."""
    return batch.rewards + gamma * forward(target, batch.next_obs).max(axis=1)


def train_step(
    online: QNetwork,
    target: QNetwork,
    batch: Batch,
    gamma: float,
    opt: AdamState,
    idx: np.ndarray | None = None,
) -> float:
    """One Adam step on the mean squared TD error; returns the pre-step loss.

    ``idx`` selects rows of ``batch`` (as with a replay store); by default
    every row is used once.
    """
    if idx is None:
        if len(batch.actions) == 0:
            raise ValueError("empty batch")
        idx = np.arange(len(batch.actions), dtype=np.int64)
    opt.step += 1
    return kernels.train_step(
        online.params, target.params, opt.m, opt.v, opt.step,
        batch.obs, batch.actions, batch.rewards, batch.next_obs, idx,
        gamma, opt.lr, opt.beta1, opt.beta2, opt.eps, opt.grad,
    )


class ReplayBuffer:
    """Fixed-capacity circular store with uniform sampling."""

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self.obs = np.zeros((capacity, OBS_SIZE))
        self.next_obs = np.zeros((capacity, OBS_SIZE))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.size = 0
        self.added = 0
        self._pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, s: ExperienceSample) -> None:
        i = self._pos
        self.obs[i] = s.obs
        self.next_obs[i] = s.next_obs
        self.actions[i] = s.action
        self.rewards[i] = s.reward
        self._pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.added += 1

    def as_batch(self) -> Batch:
        return Batch(self.obs, self.actions, self.rewards, self.next_obs)

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        return rng.integers(0, self.size, size=n, dtype=np.int64)


class DQNAgent:
    """Device-side policy plus cloud-side learner.

    The device acts with the online network; weight pushes from the cloud
    are treated as instantaneous.
    """

    def __init__(self, cfg: SimConfig, n_data: int, init_rng: np.random.Generator,
                 replay_rng: np.random.Generator) -> None:
        self.cfg = cfg
        self.n_data = n_data
        self.online = QNetwork.initialized(init_rng)
        self.target = self.online.copy()
        self.opt = AdamState.from_config(cfg)
        self.replay = ReplayBuffer(cfg.replay_capacity)
        self.replay_rng = replay_rng
        self.decisions = 0
        self.train_steps = 0
        self.last_loss = float("nan")

    @property
    def epsilon(self) -> float:
        return epsilon_at(self.decisions, self.cfg)

    def act(self, obs: np.ndarray, a: tuple[int, int], rng: np.random.Generator) -> tuple[int, tuple[int, int]]:
        eps = self.epsilon
        self.decisions += 1
        action = select_action(kernels.forward(self.online.params, obs), eps, rng)
        return action, apply_delta(a, action, self.n_data)

    def ingest(self, samples: Sequence[ExperienceSample]) -> None:
        for s in samples:
            self.replay.add(s)

    def train_tick(self) -> float | None:
        """One minibatch once enough samples have arrived at the cloud."""
        if self.replay.added < self.cfg.train_start:
            return None
        idx = self.replay.sample_indices(self.cfg.batch_size, self.replay_rng)
        loss = train_step(self.online, self.target, self.replay.as_batch(), self.cfg.gamma,
                          self.opt, idx)
        self.train_steps += 1
        if self.train_steps % self.cfg.target_sync == 0:
            sync_target(self.online, self.target)
        self.last_loss = loss
        return loss
