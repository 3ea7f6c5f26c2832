"""Command-line driver: mode/seed sweeps, per-run CSVs and a summary table."""

from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import ConfigError, SimConfig, default_config, load_config
from .simulator import COLUMNS, OUT_OF_BAND, MetricsSeries, Mode, run

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_CHECK_FAILED = 3

THRESHOLD_FRACTION = 0.95
TRAILING_WINDOW_S = 30


class UsageError(Exception):
    pass


@dataclass
class RunSpec:
    config_path: Optional[Path]
    modes: list[Mode]
    seeds: list[int]
    duration_s: int
    out_dir: Path
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise UsageError("duration must be positive")
        if not self.seeds:
            raise UsageError("at least one seed is required")
        if not self.modes:
            raise UsageError("at least one mode is required")


def parse_seeds(text: str) -> list[int]:
    """``"1,2,5-7"`` -> ``[1, 2, 5, 6, 7]``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part[1:]:
                lo, hi = part.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise UsageError(f"bad seed list {text!r}") from None
    if not seeds:
        raise UsageError(f"bad seed list {text!r}")
    return seeds


# -- CSV ---------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(series: MetricsSeries, path: str | Path) -> None:
    """Header plus one row per simulated second; floats use ``repr``."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in series.rows:
            w.writerow([_fmt(x) for x in row])


def read_csv(path: str | Path, mode: str = "", seed: int = 0) -> MetricsSeries:
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = [(int(r[0]), *(float(x) for x in r[1:])) for r in reader]
    return MetricsSeries(mode=mode, seed=seed, rows=rows)


def run_csv_name(mode: Mode | str, seed: int) -> str:
    return f"{str(mode).replace(':', '-')}_seed{seed}.csv"


# -- summary -----------------------------------------------------------------


def _tail(values: np.ndarray, window: Optional[int]) -> np.ndarray:
    return values if window is None else values[-window:]


def _nanmean(values: np.ndarray) -> float:
    values = values[~np.isnan(values)]
    return float(values.mean()) if len(values) else math.nan


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.array([v for v in values if not math.isnan(v)], dtype=float)
    if len(arr) == 0:
        return math.nan, math.nan
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return float(arr.mean()), std


def tail_mean(series: MetricsSeries, column: str, window: Optional[int] = 100) -> float:
    return _nanmean(_tail(series.column(column), window))


def time_to_threshold(series: MetricsSeries, threshold: float, trailing: int = TRAILING_WINDOW_S) -> float:
    """First second whose trailing mean reward reaches ``threshold``; nan if never."""
    reward = series.column("reward_per_s")
    if len(reward) < trailing or math.isnan(threshold):
        return math.nan
    means = np.convolve(reward, np.ones(trailing) / trailing, mode="valid")
    hits = np.nonzero(means >= threshold)[0]
    return float(hits[0] + trailing) if len(hits) else math.nan


SUMMARY_METRICS = (
    ("reward", "reward_per_s"),
    ("samples_delivered", "samples_delivered_per_s"),
    ("s1_rejected", "s1_rejected_per_s"),
    ("s2_lost", "s2_lost_per_s"),
    ("s2_latency_ms", "s2_mean_latency_ms"),
    ("learnslot_loss", "learnslot_loss_mean"),
)


@dataclass
class ModeSummary:
    mode: str
    n_runs: int
    stats: dict[str, tuple[float, float]] = field(default_factory=dict)
    time_to_threshold: tuple[float, float] = (math.nan, math.nan)
    reward_ratio_to_oob: float = math.nan

    def as_row(self) -> dict[str, object]:
        row: dict[str, object] = {"mode": self.mode, "n_runs": self.n_runs}
        for name, (mean, std) in self.stats.items():
            row[f"{name}_mean"] = mean
            row[f"{name}_std"] = std
        row["time_to_threshold_s_mean"], row["time_to_threshold_s_std"] = self.time_to_threshold
        row["reward_ratio_to_oob"] = self.reward_ratio_to_oob
        return row


def summarize(runs: Sequence[MetricsSeries], window: Optional[int] = 100) -> list[ModeSummary]:
    """Per-mode tail statistics across seeds.

    ``window`` is the tail length in seconds; ``None`` uses every row.
    Time-to-threshold and the reward ratio are measured against the
    out-of-band tail mean and are nan when no out-of-band run is present.
    """
    if not runs:
        return []
    lengths = {len(r) for r in runs}
    if len(lengths) > 1:
        raise ValueError(f"runs have different durations: {sorted(lengths)}")

    by_mode: dict[str, list[MetricsSeries]] = {}
    for r in runs:
        by_mode.setdefault(r.mode, []).append(r)

    oob = by_mode.get(OUT_OF_BAND, [])
    oob_tail = _mean_std([tail_mean(r, "reward_per_s", window) for r in oob])[0] if oob else math.nan
    threshold = THRESHOLD_FRACTION * oob_tail

    out = []
    for mode, group in by_mode.items():
        s = ModeSummary(mode, len(group))
        for name, column in SUMMARY_METRICS:
            s.stats[name] = _mean_std([tail_mean(r, column, window) for r in group])
        s.time_to_threshold = _mean_std([time_to_threshold(r, threshold) for r in group])
        s.reward_ratio_to_oob = s.stats["reward"][0] / oob_tail if oob else math.nan
        out.append(s)
    return out


def write_summary(summary: Sequence[ModeSummary], path: str | Path) -> None:
    rows = [s.as_row() for s in summary]
    with open(path, "w", newline="", encoding="ascii") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: v if isinstance(v, str) else _fmt(v) for k, v in row.items()})


# -- execution ---------------------------------------------------------------


def _run_job(job: tuple[SimConfig, str, int, int]) -> MetricsSeries:
    cfg, mode, seed, slots = job
    return run(cfg, mode, seed, slots)


def run_many(cfg: SimConfig, modes: Sequence[Mode | str], seeds: Sequence[int], duration_s: int,
             jobs: int = 1) -> list[MetricsSeries]:
    """Every (mode, seed) pair, in that order; ``jobs > 1`` uses worker processes."""
    slots_per_s = max(1, round(1.0 / cfg.slot_duration))
    work = [(cfg, str(m), s, duration_s * slots_per_s) for m in modes for s in seeds]
    if jobs <= 1 or len(work) == 1:
        return [_run_job(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_job, work))


def execute(spec: RunSpec, cfg: SimConfig) -> list[MetricsSeries]:
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    runs = run_many(cfg, spec.modes, spec.seeds, spec.duration_s, spec.jobs)
    for series in runs:
        errors = series.conservation_errors()
        if errors:
            raise RuntimeError(f"{series.mode} seed {series.seed}: " + "; ".join(errors))
        write_csv(series, spec.out_dir / run_csv_name(series.mode, series.seed))
    write_summary(summarize(runs), spec.out_dir / "summary.csv")
    return runs


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="learnplane", description="Run slicing experiments with an in-band learning plane.")
    p.add_argument("--config", type=Path, help="key = value config file (defaults apply otherwise)")
    p.add_argument("--mode", action="append", default=None,
                   help="dynamic | oob | static:<k>; repeatable")
    p.add_argument("--seed", default=None, help="comma list or ranges, e.g. 1,2,5-7")
    p.add_argument("--duration-s", type=int, default=None, help="simulated seconds per run")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory (default: results)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: number of seeds)")
    p.add_argument("--check", action="store_true", help="run the acceptance suite")
    return p


def cli_main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config) if args.config else default_config()
        if args.check:
            from .acceptance import run_acceptance

            seeds = parse_seeds(args.seed) if args.seed else None
            ok = run_acceptance(cfg, seeds=seeds, duration_s=args.duration_s, jobs=args.jobs or 1)
            return EXIT_OK if ok else EXIT_CHECK_FAILED
        modes = [Mode.parse(m) for m in (args.mode or ["dynamic"])]
        for m in modes:
            m.data_resources(cfg.n_resources)
        seeds = parse_seeds(args.seed) if args.seed else [1]
        spec = RunSpec(args.config, modes, seeds,
                       args.duration_s if args.duration_s is not None else 600,
                       args.out, args.jobs or len(seeds))
    except (UsageError, ValueError) as exc:
        kind = "config error" if isinstance(exc, ConfigError) else "usage error"
        print(f"learnplane: {kind}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"learnplane: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        execute(spec, cfg)
    except Exception as exc:  # noqa: BLE001 - any failure maps to the runtime exit code
        print(f"learnplane: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(spec.modes) * len(spec.seeds)} run(s) and summary.csv to {spec.out_dir}")
    return EXIT_OK


def main() -> None:
    sys.exit(cli_main())
