"""Best-first skeleton search over a ground task.

``skeleton_search`` is a resumable generator: it yields candidate plan
skeletons in non-decreasing f = g + h order and keeps its frontier alive
between yields, so the caller can pull the next-best skeleton after a
refinement failure. Ties break on lower h, then insertion order. Raises
:class:`SearchExhausted` when the frontier empties or the node budget is
spent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from heapq import heappop, heappush
from typing import Callable, Iterator

from ..errors import SearchExhausted
from ..symbols import Atom
from .grounding import GroundOperator, GroundTask
from .kernels import BIG, hadd_kernel

Heuristic = Callable[[int], float]


@dataclass(frozen=True)
class Skeleton:
    """Ground operator sequence with the symbolic state expected after each step."""

    steps: tuple[GroundOperator, ...]
    expected: tuple[frozenset[Atom], ...]

    def __len__(self) -> int:
        return len(self.steps)


def make_heuristic(name: str, task: GroundTask) -> Heuristic:
    if name == "blind":
        return lambda bits: 0.0
    if name == "hadd":

        def h(bits: int) -> float:
            value = hadd_kernel(
                task.truth_array(bits),
                task.pre_idx,
                task.pre_off,
                task.add_idx,
                task.add_off,
                task.goal_idx,
            )
            return math.inf if value >= BIG else value

        return h
    raise ValueError(f"unknown heuristic {name!r}")


def skeleton_search(
    task: GroundTask,
    heuristic: Heuristic,
    max_nodes: int,
    on_expand: Callable[[], None] | None = None,
) -> Iterator[Skeleton]:
    """Yield skeletons best-first; never yields the same final state twice."""
    h0 = heuristic(task.init_mask)
    frontier: list[tuple[float, float, int, int, tuple[int, ...]]] = []
    seq = 0
    if h0 < math.inf:
        heappush(frontier, (h0, h0, seq, task.init_mask, ()))
    closed: set[int] = set()
    expanded = 0
    while frontier:
        f, h, _, bits, path = heappop(frontier)
        if bits in closed:
            continue
        closed.add(bits)
        if task.satisfies_goal(bits):
            yield _build_skeleton(task, path)
        if expanded >= max_nodes:
            raise SearchExhausted(f"node budget {max_nodes} exhausted")
        expanded += 1
        if on_expand is not None:
            on_expand()
        g = float(len(path))
        for op_index in task.applicable(bits):
            succ = task.successor(bits, op_index)
            if succ in closed:
                continue
            h_succ = heuristic(succ)
            if h_succ == math.inf:
                continue
            seq += 1
            heappush(
                frontier,
                (g + 1.0 + h_succ, h_succ, seq, succ, path + (op_index,)),
            )
    raise SearchExhausted("frontier exhausted")


def _build_skeleton(task: GroundTask, path: tuple[int, ...]) -> Skeleton:
    steps, expected = [], []
    bits = task.init_mask
    for op_index in path:
        bits = task.successor(bits, op_index)
        steps.append(task.operators[op_index])
        expected.append(task.unmask(bits))
    return Skeleton(steps=tuple(steps), expected=tuple(expected))
