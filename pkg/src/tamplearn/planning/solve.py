"""Bilevel solver: skeleton search + continuous refinement.

``solve`` pulls skeletons from the best-first stream and tries to refine
each one; the first skeleton whose refinement succeeds yields the plan,
which is verified by replaying it through the simulator. ``solve_no_operators``
is the operator-free baseline: it enumerates controller template sequences
in length-lexicographic order and samples continuous parameters with goal
achievement as the only acceptance check.

Budgets are counted in hardware-independent units (search nodes expanded,
sampler calls); the wall-clock timeout is a secondary guard.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Optional, Sequence

import numpy as np

from ..envs.base import Domain, LowLevelState, Problem
from ..errors import SearchExhausted
from ..operators import Action, ActionTemplate, DeterministicOperator
from .grounding import GroundTask, ground_operators
from .refine import SamplerBudget, refine
from .search import make_heuristic, skeleton_search


@dataclass
class PlannerConfig:
    heuristic: str = "hadd"  # "hadd" or "blind"
    n_samples: int = 10
    max_nodes: int = 100_000
    max_sampler_calls: int = 100_000
    max_skeletons: int = 1_000
    max_template_length: int = 8  # operator-free mode only
    wall_timeout: float = math.inf


@dataclass
class SolveStats:
    solved: bool = False
    plan_length: Optional[int] = None
    skeletons_tried: int = 0
    nodes_expanded: int = 0
    sampler_calls: int = 0
    wall_time: float = 0.0
    failure: Optional[str] = None


def solve(
    problem: Problem,
    operators: Sequence[DeterministicOperator],
    domain: Domain,
    config: PlannerConfig,
    rng: np.random.Generator,
) -> tuple[Optional[list[Action]], SolveStats]:
    start = time.perf_counter()
    stats = SolveStats()
    init = domain.parse(problem.x0)
    ground = ground_operators(operators, problem.objects)
    task = GroundTask(init, problem.goal, ground)
    heuristic = make_heuristic(config.heuristic, task)

    def on_expand() -> None:
        stats.nodes_expanded += 1

    def on_call() -> None:
        stats.sampler_calls += 1

    stream = skeleton_search(task, heuristic, config.max_nodes, on_expand)
    try:
        for skeleton in stream:
            if stats.skeletons_tried >= config.max_skeletons:
                stats.failure = "skeleton_budget"
                break
            if time.perf_counter() - start > config.wall_timeout:
                stats.failure = "timeout"
                break
            stats.skeletons_tried += 1
            remaining = config.max_sampler_calls - stats.sampler_calls
            plan = refine(
                skeleton, problem.x0, domain, config.n_samples, rng, remaining, on_call
            )
            if plan is not None and _replays(domain, problem, plan):
                stats.solved = True
                stats.plan_length = len(plan)
                stats.wall_time = time.perf_counter() - start
                return plan, stats
        else:
            stats.failure = "skeletons_exhausted"
    except SearchExhausted:
        stats.failure = "search_exhausted"
    except SamplerBudget:
        stats.failure = "sampler_budget"
    stats.wall_time = time.perf_counter() - start
    return None, stats


def solve_no_operators(
    problem: Problem,
    domain: Domain,
    config: PlannerConfig,
    rng: np.random.Generator,
) -> tuple[Optional[list[Action]], SolveStats]:
    """Baseline without symbolic operators: enumerate controller sequences.

    Template sequences are tried in length-lexicographic order; within a
    sequence, continuous parameters are sampled depth-first with up to
    ``n_samples`` draws per step per visit, accepting only on final goal
    achievement.
    """
    start = time.perf_counter()
    stats = SolveStats()
    templates = _controller_templates(domain, problem)
    goal = problem.goal

    def dfs(steps: Sequence[ActionTemplate], i: int, x: LowLevelState) -> Optional[list[Action]]:
        if time.perf_counter() - start > config.wall_timeout:
            raise _Timeout()
        if i == len(steps):
            return [] if goal <= domain.parse(x) else None
        template = steps[i]
        tries = 1 if template.controller.continuous_dim == 0 else config.n_samples
        for _ in range(tries):
            if stats.sampler_calls >= config.max_sampler_calls:
                raise SamplerBudget()
            stats.sampler_calls += 1
            params = domain.sample_continuous(
                template.controller, x, template.discrete_args, rng
            )
            action = template.bind(params)
            rest = dfs(steps, i + 1, domain.simulate(x, action))
            if rest is not None:
                return [action] + rest
        return None

    try:
        for length in range(config.max_template_length + 1):
            for steps in product(templates, repeat=length):
                if time.perf_counter() - start > config.wall_timeout:
                    raise _Timeout()
                stats.skeletons_tried += 1
                plan = dfs(steps, 0, problem.x0)
                if plan is not None and _replays(domain, problem, plan):
                    stats.solved = True
                    stats.plan_length = len(plan)
                    stats.wall_time = time.perf_counter() - start
                    return plan, stats
        stats.failure = "search_exhausted"
    except SamplerBudget:
        stats.failure = "sampler_budget"
    except _Timeout:
        stats.failure = "timeout"
    stats.wall_time = time.perf_counter() - start
    return None, stats


class _Timeout(Exception):
    pass


def _controller_templates(domain: Domain, problem: Problem) -> list[ActionTemplate]:
    by_type: dict[str, list] = {}
    for obj in sorted(problem.objects, key=lambda o: o.name):
        by_type.setdefault(obj.type, []).append(obj)
    for objs in by_type.values():
        objs.sort(key=lambda o: o.name)
    out: list[ActionTemplate] = []
    for name in sorted(domain.controllers):
        spec = domain.controllers[name]
        pools = [by_type.get(t, []) for t in spec.discrete_params]
        for combo in product(*pools):
            if len(set(combo)) != len(combo):
                continue
            out.append(ActionTemplate(spec, tuple(combo)))
    return out


def _replays(domain: Domain, problem: Problem, plan: Iterable[Action]) -> bool:
    x = problem.x0
    for action in plan:
        x = domain.simulate(x, action)
    return problem.goal <= domain.parse(x)
