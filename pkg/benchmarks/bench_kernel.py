"""Time one Tileworld episode on every available backend.

    python3 benchmarks/bench_kernel.py [--episodes 300] [--map env_a] [--reference]

Each backend runs the same random groups on the same map; results are
checked for equality before timings are reported.
"""

import argparse
import time

import numpy as np

from sbgnp import kernel
from sbgnp.cli import MAPS_DIR
from sbgnp.core import random_individual
from sbgnp.tileworld import Graphs, load_map, run_episode, tileworld_library


def bench(backend, groups, grid, steps, repeat):
    timings, results = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = [run_episode(g, Graphs.PER_AGENT, grid, steps, backend) for g in groups]
        timings.append((time.perf_counter() - t0) / len(groups))
        results = out
    return min(timings), results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=300)
    ap.add_argument("--map", default="env_a")
    ap.add_argument("--steps", type=int, default=60)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--reference", action="store_true",
                    help="also time the step-by-step reference path (slow)")
    args = ap.parse_args()

    grid = load_map(MAPS_DIR / f"{args.map}.map")
    lib = tileworld_library(3)
    rng = np.random.default_rng(0)
    groups = [[random_individual(lib, rng) for _ in grid.agents] for _ in range(args.episodes)]

    backends = kernel.available() + (["reference"] if args.reference else [])
    baseline = None
    rows = []
    for name in backends:
        n = args.episodes if name != "reference" else min(args.episodes, 50)
        per_episode, results = bench(name, groups[:n], grid, args.steps, args.repeat)
        if baseline is None:
            baseline = results
        assert results == baseline[:n], f"{name} disagrees with {backends[0]}"
        rows.append((name, per_episode))

    fastest = min(t for _, t in rows)
    print(f"map={args.map} episodes={args.episodes} steps={args.steps} default={kernel.BACKEND}")
    for name, t in rows:
        print(f"{name:>10}: {t * 1e6:10.1f} us/episode  x{t / fastest:6.1f}")


if __name__ == "__main__":
    main()
