"""All-outcome determinization of probabilistic operators.

Each outcome whose probability clears ``p_min`` becomes its own
deterministic operator sharing the parent's controller, parameters, and
preconditions. Probabilities serve only to filter unlikely outcomes and are
discarded afterwards.
"""

from __future__ import annotations

from typing import Sequence

from .operators import DeterministicOperator, ProbabilisticOperator
from .symbols import EffectSet, atom_sort_key, sorted_atoms

DEFAULT_P_MIN = 0.001


def _effect_key(effects: EffectSet):
    return (
        tuple(atom_sort_key(a) for a in sorted_atoms(effects.add)),
        tuple(atom_sort_key(a) for a in sorted_atoms(effects.delete)),
    )


def determinize(
    ops: Sequence[ProbabilisticOperator], p_min: float = DEFAULT_P_MIN
) -> list[DeterministicOperator]:
    """One deterministic operator per outcome with probability >= p_min.

    Names append a per-controller running outcome index to the controller
    name, assigned in descending-probability order with ties broken by
    canonical effect order, so names are stable across runs.
    """
    if not 0.0 <= p_min <= 1.0:
        raise ValueError(f"p_min must lie in [0, 1], got {p_min}")
    counters: dict[str, int] = {}
    out: list[DeterministicOperator] = []
    for op in ops:
        kept = [(effects, p) for effects, p in op.outcomes if p >= p_min]
        kept.sort(key=lambda ep: (-ep[1], _effect_key(ep[0])))
        for effects, _ in kept:
            index = counters.get(op.controller.name, 0)
            counters[op.controller.name] = index + 1
            out.append(
                DeterministicOperator(
                    name=f"{op.controller.name}{index}",
                    controller=op.controller,
                    params=op.params,
                    preconditions=op.preconditions,
                    effects=effects,
                )
            )
    return out
