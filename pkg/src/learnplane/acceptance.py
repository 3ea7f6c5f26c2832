"""Acceptance checks A1-A8, shared by the test suite and ``learnplane --check``.

Each check returns a ``CheckResult``; ``run_acceptance`` prints one
PASS/FAIL line per criterion.
"""

from __future__ import annotations

import filecmp
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from . import kernels, traffic
from .allocator import GreedyInputs, brute_force_allocate, greedy_allocate, objective, shortfall_terms
from .core import SimConfig, default_config
from .dqn import N_ACTIONS, QNetwork, AdamState, Batch, apply_delta, forward, train_step
from .harness import run_many, tail_mean, write_csv
from .learning_plane import RhoSchedule, rho
from .simulator import DYNAMIC, OUT_OF_BAND, MetricsSeries, run

A5_SEEDS = (1, 2, 3)
A5_DURATION_S = 600
A5_MODES = ("dynamic", "oob", "static:2")
TAIL_S = 100


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{self.name}: {'PASS' if self.passed else 'FAIL'} ({self.detail})"


# -- A1 ----------------------------------------------------------------------


def check_a1(cfg: SimConfig | None = None) -> CheckResult:
    cfg = cfg or default_config()
    m1, m2 = traffic.slice_models(cfg)
    e1 = traffic.expected_traffic(m1) / 1e6
    e2 = traffic.expected_traffic(m2) / 1e6
    c = traffic.capacity(cfg) / 1e6
    ok = abs(e1 - 2.88) <= 0.01 and abs(e2 - 4.35) <= 0.01 and math.isclose(c, 7.68, rel_tol=1e-12)
    return CheckResult("A1", ok, f"slice1={e1:.4f} MB/s slice2={e2:.4f} MB/s capacity={c:.4f} MB/s")


# -- A2 ----------------------------------------------------------------------


def random_activity(rng: np.random.Generator) -> tuple:
    a, b = rng.random(2)
    return ((1.0 - a, a), (b, 1.0 - b))


def transition_counts(model: traffic.TrafficModel, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Per-user simulation of the activity chains; counts of (u -> v) moves."""
    n = model.users
    (_, o01), (_, o11) = model.activity
    active = rng.random(n) < model.stationary_active()
    counts = np.zeros((n + 1, n + 1), dtype=np.int64)
    chunk = 50_000
    done = 0
    prev = int(active.sum())
    while done < steps:
        k = min(chunk, steps - done)
        u = rng.random((k, n))
        seq = np.empty(k + 1, dtype=np.int64)
        seq[0] = prev
        for i in range(k):
            active = np.where(active, u[i] < o11, u[i] < o01)
            seq[i + 1] = active.sum()
        np.add.at(counts, (seq[:-1], seq[1:]), 1)
        prev = int(seq[-1])
        done += k
    return counts


THREE_SIGMA_LEVEL = 2.0 * stats.norm.sf(3.0)


def binomial_outliers(counts: np.ndarray, p: np.ndarray) -> int:
    """Cells whose count lies outside the 3-sigma band of Binomial(row visits, p).

    The band is taken as the exact two-sided binomial tail at the normal
    3-sigma level, which stays valid for cells with tiny expected counts.
    """
    visits = np.broadcast_to(counts.sum(axis=1, keepdims=True), counts.shape)
    lower = stats.binom.cdf(counts, visits, p)
    upper = stats.binom.sf(counts - 1, visits, p)
    two_sided = np.minimum(1.0, 2.0 * np.minimum(lower, upper))
    return int(np.count_nonzero(two_sided < THREE_SIGMA_LEVEL))


def outlier_allowance(n_cells: int) -> int:
    """Out-of-band cells that chance alone explains at the same 3-sigma confidence."""
    return int(stats.binom.ppf(1.0 - THREE_SIGMA_LEVEL, n_cells, THREE_SIGMA_LEVEL))


def check_a2(mc_steps: int = 10**6, n_matrices: int = 100, seed: int = 2024) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_row = 0.0
    for _ in range(n_matrices):
        model = traffic.TrafficModel(int(rng.integers(0, 21)), 1.0, random_activity(rng))
        p = traffic.aggregate_transition_matrix(model)
        worst_row = max(worst_row, float(np.max(np.abs(p.sum(axis=1) - 1.0))))
    rows_ok = worst_row <= 1e-9

    cfg = default_config()
    model = traffic.slice_models(cfg)[0]
    counts = transition_counts(model, mc_steps, rng)
    p = traffic.aggregate_transition_matrix(model)
    bad = binomial_outliers(counts, p)
    tested = int(np.count_nonzero((counts.sum(axis=1, keepdims=True) > 0) & (p > 0) & (p < 1)))
    allowed = outlier_allowance(tested)
    ok = rows_ok and bad <= allowed
    return CheckResult(
        "A2", ok,
        f"max |row sum - 1| = {worst_row:.2e}; {bad} of {tested} (u,v) cells outside their 3 sigma "
        f"band over {mc_steps} steps, chance allows {allowed}",
    )


# -- A3 ----------------------------------------------------------------------


def random_greedy_inputs(rng: np.random.Generator, max_n: int = 6) -> GreedyInputs:
    n = int(rng.integers(0, max_n + 1))
    q2 = int(rng.integers(0, 2 * max_n + 1))
    return GreedyInputs(
        q1=int(rng.integers(0, 3 * max_n + 1)),
        q2=q2,
        xi2=int(rng.integers(0, q2 + 1)),
        e_pkts=int(rng.integers(0, 2 * max_n + 1)),
        n=n,
        chi1=int(rng.integers(0, 2 * max_n + 1)),
        learning_capacity=int(rng.choice([2, 3, 10, 1500])),
    )


def check_a3(n_instances: int = 10**4, seed: int = 7) -> CheckResult:
    rng = np.random.default_rng(seed)
    obj_bad = vec_bad = starved = 0
    for _ in range(n_instances):
        inp = random_greedy_inputs(rng)
        g = greedy_allocate(inp)
        b = brute_force_allocate(inp)
        if objective(inp, g) != objective(inp, b):
            obj_bad += 1
        if g != b:
            vec_bad += 1
        r1, r2, _ = shortfall_terms(inp, g)
        if inp.demand1 + inp.demand2 <= inp.n and (r1 or r2):
            starved += 1
    ok = obj_bad == vec_bad == starved == 0
    return CheckResult(
        "A3", ok,
        f"{n_instances} instances: objective mismatches {obj_bad}, vector mismatches {vec_bad}, "
        f"starved slice demand {starved}",
    )


# -- A4 ----------------------------------------------------------------------


def delivered_windows(series: MetricsSeries, start_s: int, window: int = TAIL_S) -> np.ndarray:
    d = series.column("samples_delivered_per_s")[start_s:]
    if len(d) < window:
        return np.zeros(0)
    return np.convolve(d, np.ones(window) / window, mode="valid")


def check_a4(cfg: SimConfig, dynamic_runs: Sequence[MetricsSeries]) -> CheckResult:
    sched = RhoSchedule(cfg.rho_0, cfg.rho_f, cfg.rho_decay, cfg.rho_pace)
    floor = sched.floor_slot()
    rho_ok = floor == 238_000 and rho(floor, sched) == cfg.rho_f and rho(floor - 1, sched) > cfg.rho_f
    slots_per_s = max(1, round(1.0 / cfg.slot_duration))
    start = -(-floor // slots_per_s)
    lo, hi = math.inf, -math.inf
    for series in dynamic_runs:
        w = delivered_windows(series, start)
        if len(w) == 0:
            return CheckResult("A4", False, f"run of {len(series)} s has no post-floor 100 s window")
        lo, hi = min(lo, float(w.min())), max(hi, float(w.max()))
    ok = rho_ok and bool(dynamic_runs) and 25.0 <= lo and hi <= 50.0
    return CheckResult(
        "A4", ok,
        f"rho floor at slot {floor} (rho={rho(floor, sched)}); 100 s windows of delivered "
        f"samples/s after second {start} span [{lo:.2f}, {hi:.2f}]",
    )


# -- A5 ----------------------------------------------------------------------


def collect_runs(cfg: SimConfig, seeds: Sequence[int] = A5_SEEDS, duration_s: int = A5_DURATION_S,
                 modes: Sequence[str] = A5_MODES, jobs: int = 1) -> dict[tuple[str, int], MetricsSeries]:
    runs = run_many(cfg, modes, seeds, duration_s, jobs)
    return {(r.mode, r.seed): r for r in runs}


def check_a5(runs: dict[tuple[str, int], MetricsSeries], seeds: Sequence[int] = A5_SEEDS) -> CheckResult:
    def tails(mode: str, column: str) -> list[float]:
        return [tail_mean(runs[(mode, s)], column, TAIL_S) for s in seeds]

    dyn = tails(DYNAMIC, "reward_per_s")
    oob = tails(OUT_OF_BAND, "reward_per_s")
    sta = tails("static:2", "reward_per_s")
    ratio = float(np.mean(dyn) / np.mean(oob))
    wins = sum(d >= s for d, s in zip(dyn, sta))
    lat_dyn = float(np.mean(tails(DYNAMIC, "s2_mean_latency_ms")))
    lat_sta = float(np.mean(tails("static:2", "s2_mean_latency_ms")))
    ok_i = ratio >= 0.95
    ok_ii = wins >= 2
    ok_iii = lat_dyn <= 10.0 and lat_sta >= 40.0
    detail = (
        f"(i) dynamic/oob tail reward {ratio:.4f} [{'ok' if ok_i else 'low'}]; "
        f"(ii) dynamic >= static:2 in {wins}/{len(seeds)} seeds [{'ok' if ok_ii else 'low'}]; "
        f"(iii) slice-2 latency dynamic {lat_dyn:.2f} ms, static:2 {lat_sta:.2f} ms "
        f"[{'ok' if ok_iii else 'out of range'}]"
    )
    return CheckResult("A5", ok_i and ok_ii and ok_iii, detail)


# -- A6 ----------------------------------------------------------------------


def check_a6(dynamic_runs: Sequence[MetricsSeries]) -> CheckResult:
    parts = []
    ok = bool(dynamic_runs)
    for series in dynamic_runs:
        losses = series.learning_losses
        if len(losses) == 0:
            ok = False
            parts.append(f"seed {series.seed}: no learning slots")
            continue
        zero = float(np.mean(losses == 0.0))
        small = float(np.mean(losses <= 0.1))
        ok = ok and zero >= 0.30 and small >= 0.70
        parts.append(f"seed {series.seed}: loss=0 in {zero:.1%}, <=0.1 in {small:.1%} of {len(losses)}")
    return CheckResult("A6", ok, "; ".join(parts))


# -- A7 ----------------------------------------------------------------------


def gradient_check(probes: int = 100, seed: int = 11, h: float = 1e-5, batch: int = 8) -> float:
    """Largest relative error between analytic and central-difference gradients."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probes):
        params = QNetwork.initialized(rng).params
        x = rng.normal(size=(batch, 13))
        actions = rng.integers(0, N_ACTIONS, size=batch).astype(np.int64)
        targets = rng.normal(size=batch)
        grad = np.zeros_like(params)
        kernels.loss_grad(params, x, actions, targets, grad)
        k = int(rng.integers(params.size))
        plus, minus = params.copy(), params.copy()
        plus[k] += h
        minus[k] -= h
        scratch = np.zeros_like(params)
        fd = (kernels.loss_grad(plus, x, actions, targets, scratch)
              - kernels.loss_grad(minus, x, actions, targets, scratch)) / (2 * h)
        denom = max(abs(fd), abs(grad[k]), 1e-6)
        worst = max(worst, abs(fd - grad[k]) / denom)
    return worst


def td_fixed_point_error(seed: int = 5, gamma: float = 0.95, steps: int = 3000) -> float:
    """|Q(s,a) - (r + gamma max Q_target(s'))| after repeated updates on one transition."""
    rng = np.random.default_rng(seed)
    online = QNetwork.initialized(rng)
    target = QNetwork.initialized(rng)
    s, s2 = rng.random(13), rng.random(13)
    a, r = 1, 0.7
    batch = Batch(s[None, :].copy(), np.array([a], dtype=np.int64), np.array([r]), s2[None, :].copy())
    opt = AdamState()
    for _ in range(steps):
        train_step(online, target, batch, gamma, opt)
    y = r + gamma * float(forward(target, s2).max())
    return abs(float(forward(online, s)[a]) - y)


def random_walk_violations(walks: int = 1000, steps: int = 1000, seed: int = 3) -> int:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(walks):
        n = int(rng.integers(1, 16))
        a1 = int(rng.integers(0, n + 1))
        a = (a1, n - a1)
        for act in rng.integers(0, N_ACTIONS, size=steps):
            a = apply_delta(a, int(act), n)
            if not (0 <= a[0] <= n and 0 <= a[1] <= n and a[0] + a[1] == n):
                bad += 1
    return bad


def check_a7() -> CheckResult:
    grad_err = gradient_check()
    td_err = td_fixed_point_error()
    walk_bad = random_walk_violations()
    ok = grad_err < 1e-4 and td_err < 1e-3 and walk_bad == 0
    return CheckResult(
        "A7", ok,
        f"max gradient relative error {grad_err:.2e}; TD fixed-point error {td_err:.2e}; "
        f"{walk_bad} invalid allocations in 10^6 random-walk steps",
    )


# -- A8 ----------------------------------------------------------------------


def determinism_check(cfg: SimConfig, duration_s: int = 5, seed: int = 1,
                      modes: Iterable[str] = A5_MODES) -> list[str]:
    """Modes whose two identical runs produced different CSV bytes."""
    slots = duration_s * max(1, round(1.0 / cfg.slot_duration))
    differing = []
    with tempfile.TemporaryDirectory() as tmp:
        for mode in modes:
            paths = []
            for rep in range(2):
                path = Path(tmp) / f"{mode.replace(':', '-')}_{rep}.csv"
                write_csv(run(cfg, mode, seed, slots), path)
                paths.append(path)
            if not filecmp.cmp(paths[0], paths[1], shallow=False):
                differing.append(mode)
    return differing


def check_a8(cfg: SimConfig, runs: Iterable[MetricsSeries], duration_s: int = 5) -> CheckResult:
    differing = determinism_check(cfg, duration_s)
    broken = []
    count = 0
    for series in runs:
        count += 1
        errors = series.conservation_errors()
        if errors:
            broken.append(f"{series.mode}/{series.seed}: {errors[0]}")
    ok = not differing and not broken and count > 0
    detail = (
        f"non-identical repeats: {differing or 'none'}; conservation checked on {count} runs, "
        f"violations: {broken or 'none'}"
    )
    return CheckResult("A8", ok, detail)


# -- driver ------------------------------------------------------------------


def run_acceptance(cfg: SimConfig | None = None, seeds: Optional[Sequence[int]] = None,
                   duration_s: Optional[int] = None, jobs: int = 1, echo=print) -> bool:
    cfg = cfg or default_config()
    seeds = tuple(seeds or A5_SEEDS)
    duration_s = duration_s or A5_DURATION_S
    results = [check_a1(cfg), check_a2(), check_a3()]
    for r in results:
        echo(r.line())
    runs = collect_runs(cfg, seeds, duration_s, jobs=jobs)
    dynamic = [runs[(DYNAMIC, s)] for s in seeds]
    for check in (
        lambda: check_a4(cfg, dynamic),
        lambda: check_a5(runs, seeds),
        lambda: check_a6(dynamic),
        check_a7,
        lambda: check_a8(cfg, runs.values()),
    ):
        results.append(check())
        echo(results[-1].line())
    passed = sum(r.passed for r in results)
    echo(f"{passed}/{len(results)} criteria passed")
    return passed == len(results)
