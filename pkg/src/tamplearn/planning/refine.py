"""Backtracking continuous refinement of a plan skeleton.

Depth-first over skeleton steps: each visit to a step draws up to
``n_samples`` continuous parameter vectors, simulates the bound action,
and accepts a sample only if the parse of the resulting low-level state
equals the step's expected symbolic state exactly. On acceptance it
recurses; when a step exhausts its samples the search backtracks.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from ..envs.base import Domain, LowLevelState
from ..operators import Action
from .search import Skeleton


class SamplerBudget(Exception):
    """Internal signal: the sampler-call budget ran out mid-refinement."""


def refine(
    skeleton: Skeleton,
    state: LowLevelState,
    domain: Domain,
    n_samples: int,
    rng: np.random.Generator,
    max_calls: int,
    on_call: Callable[[], None] | None = None,
) -> Optional[list[Action]]:
    """Continuous actions realizing the skeleton, or None if refinement fails.

    Raises :class:`SamplerBudget` once ``max_calls`` sampler draws have been
    spent; partial progress is discarded.
    """
    calls = 0

    def draw(controller, current, discrete):
        nonlocal calls
        if calls >= max_calls:
            raise SamplerBudget()
        calls += 1
        if on_call is not None:
            on_call()
        return domain.sample_continuous(controller, current, discrete, rng)

    def dfs(i: int, current: LowLevelState) -> Optional[list[Action]]:
        if i == len(skeleton.steps):
            return []
        step = skeleton.steps[i]
        template = step.template
        # A zero-dimensional controller yields one distinct action, so extra
        # draws would just repeat the same simulation.
        tries = 1 if template.controller.continuous_dim == 0 else n_samples
        for _ in range(tries):
            params = draw(template.controller, current, template.discrete_args)
            action = template.bind(params)
            nxt = domain.simulate(current, action)
            if domain.parse(nxt) != skeleton.expected[i]:
                continue
            rest = dfs(i + 1, nxt)
            if rest is not None:
                return [action] + rest
        return None

    return dfs(0, state)
