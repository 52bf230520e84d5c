#!/usr/bin/env python3
"""Benchmark the additive-heuristic fixpoint kernels.

Compares the numba Gauss-Seidel kernel against the numpy Jacobi fallback
(and the uncompiled Python loop as a floor) on ground tasks from all three
domains plus a synthetic chain task, after asserting that every kernel
returns the same value on every probed state.

Run:  python3 benchmarks/bench_hadd.py [--repeats N] [--max-states N]

The numpy path is what you get with TAMPLEARN_DISABLE_NUMBA=1.
"""

from __future__ import annotations

import argparse
import statistics
import time
from collections import deque

import numpy as np

from tamplearn.envs import get_domain
from tamplearn.planning.grounding import GroundTask, ground_operators
from tamplearn.planning.kernels import HAS_NUMBA, _hadd_numpy, _hadd_python

if HAS_NUMBA:
    from tamplearn.planning.kernels import _hadd_numba


def domain_task(name: str) -> GroundTask:
    domain = get_domain(name)
    rng = np.random.default_rng(0)
    problem = domain.generate_problem(domain.eval_size_params, rng)
    ground = ground_operators(domain.oracle_operators(), problem.objects)
    return GroundTask(domain.parse(problem.x0), problem.goal, ground)


def chain_task(n: int) -> tuple[np.ndarray, ...]:
    """a0 -> a1 -> ... -> an, one unit-cost operator per edge."""
    init = np.zeros(n + 1, dtype=np.uint8)
    init[0] = 1
    pre_idx = np.arange(n, dtype=np.int32)
    pre_off = np.arange(n + 1, dtype=np.int32)
    add_idx = np.arange(1, n + 1, dtype=np.int32)
    add_off = np.arange(n + 1, dtype=np.int32)
    goal_idx = np.asarray([n], dtype=np.int32)
    return init, pre_idx, pre_off, add_idx, add_off, goal_idx


def reachable_states(task: GroundTask, cap: int) -> list[int]:
    """Breadth-first sample of states the search would evaluate."""
    seen = {task.init_mask}
    queue = deque([task.init_mask])
    while queue and len(seen) < cap:
        bits = queue.popleft()
        for op in task.applicable(bits):
            nxt = task.successor(bits, op)
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return sorted(seen)


def time_kernel(fn, calls: list[tuple], repeats: int) -> float:
    """Median per-call microseconds over ``repeats`` passes."""
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        for args in calls:
            fn(*args)
        times.append((time.perf_counter() - start) / len(calls))
    return statistics.median(times) * 1e6


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--max-states", type=int, default=200)
    parser.add_argument("--chain", type=int, default=2000, help="synthetic chain length")
    args = parser.parse_args()

    kernels = [("numpy", _hadd_numpy), ("python", _hadd_python)]
    if HAS_NUMBA:
        kernels.insert(0, ("numba", _hadd_numba))
    else:
        print("numba unavailable or disabled; benchmarking the fallback only")

    cases = []
    for name in ("cover", "blocks", "painting"):
        task = domain_task(name)
        states = reachable_states(task, args.max_states)
        calls = [
            (task.truth_array(bits), task.pre_idx, task.pre_off,
             task.add_idx, task.add_off, task.goal_idx)
            for bits in states
        ]
        cases.append((f"{name} ({len(task.atoms)} atoms, {len(task.operators)} ops, "
                      f"{len(calls)} states)", calls))
    cases.append((f"chain n={args.chain}", [chain_task(args.chain)]))

    for label, calls in cases:
        # Agreement check before timing.
        for call_args in calls:
            values = {kname: fn(*call_args) for kname, fn in kernels}
            assert len(set(values.values())) == 1, (label, values)
        timings = {kname: time_kernel(fn, calls, args.repeats) for kname, fn in kernels}
        base = timings.get("numba", timings["numpy"])
        parts = [f"{kname} {micros:9.1f} us/call" for kname, micros in timings.items()]
        if "numba" in timings:
            parts.append(f"numpy/numba x{timings['numpy'] / base:.1f}")
        print(f"{label:55s} " + "  ".join(parts))


if __name__ == "__main__":
    main()
