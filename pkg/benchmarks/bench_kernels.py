"""Compare the compiled and NumPy kernel backends.

Times the per-slot hot paths (single forward pass, one minibatch train step)
and a short end-to-end simulation under each backend.

    python3 benchmarks/bench_kernels.py [--slots 5000]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from learnplane.kernels import N_PARAMS, available_backends

SIM_SNIPPET = """
import time
from learnplane.core import default_config
from learnplane.kernels import BACKEND
from learnplane.simulator import Simulation
sim = Simulation(default_config(), "dynamic", 1)
start = time.perf_counter()
for _ in range({slots}):
    sim.step()
print(BACKEND, (time.perf_counter() - start) / {slots})
"""


def kernel_inputs(seed: int = 0, batch: int = 32):
    rng = np.random.default_rng(seed)
    params = rng.uniform(-0.3, 0.3, N_PARAMS)
    target = params + rng.normal(0, 0.01, N_PARAMS)
    obs = rng.random((1000, 13))
    nxt = rng.random((1000, 13))
    actions = rng.integers(0, 3, 1000)
    rewards = rng.random(1000)
    idx = rng.integers(0, 1000, batch)
    return params, target, obs, actions, rewards, nxt, idx


def best_of(fn, number: int) -> float:
    return min(timeit.repeat(fn, number=number, repeat=3)) / number


def time_kernels(module, number: int) -> dict[str, float]:
    params, target, obs, actions, rewards, nxt, idx = kernel_inputs()
    m, v, g = np.zeros(N_PARAMS), np.zeros(N_PARAMS), np.zeros(N_PARAMS)
    x = obs[0].copy()

    def train():
        module.train_step(params, target, m, v, 1, obs, actions, rewards, nxt, idx,
                          0.95, 1e-3, 0.9, 0.999, 1e-8, g)

    return {
        "forward": best_of(lambda: module.forward(params, x), number),
        "train_step": best_of(train, number),
    }


def time_simulation(backend: str, slots: int) -> float:
    env = dict(os.environ)
    if backend == "python":
        env["LEARNPLANE_KERNELS"] = "python"
    else:
        env.pop("LEARNPLANE_KERNELS", None)
    out = subprocess.run([sys.executable, "-c", SIM_SNIPPET.format(slots=slots)],
                         env=env, capture_output=True, text=True, check=True).stdout.split()
    if out[0] != backend:
        raise RuntimeError(f"asked for {backend}, simulation ran on {out[0]}")
    return float(out[1])


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--number", type=int, default=2000, help="kernel calls per timing")
    parser.add_argument("--slots", type=int, default=5000, help="simulated slots per backend")
    args = parser.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built, timing the NumPy backend only")
    results = {}
    for name, module in backends.items():
        row = time_kernels(module, args.number)
        row["slot"] = time_simulation(name, args.slots)
        results[name] = row

    print(f"{'kernel':<12}" + "".join(f"{name:>14}" for name in results) + f"{'speedup':>10}")
    for key in ("forward", "train_step", "slot"):
        cells = "".join(f"{results[name][key] * 1e6:>11.1f} us" for name in results)
        speedup = ""
        if "cython" in results:
            speedup = f"{results['python'][key] / results['cython'][key]:>9.2f}x"
        print(f"{key:<12}{cells}{speedup}")


if __name__ == "__main__":
    main()
