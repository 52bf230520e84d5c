"""Grounding deterministic operators over a problem's object set.

Produces every type-consistent binding of operator parameters to
*distinct* objects: an operator with two same-typed parameters over three
objects yields 6 groundings, not 9. Ground tasks intern atoms as integer
ids and represent states as Python int bitmasks; the flattened int32
arrays feed the heuristic kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Iterable, Sequence

import numpy as np

from ..operators import ActionTemplate, DeterministicOperator, operator_sort_key
from ..symbols import Atom, ObjectRef, apply_substitution, atom_sort_key


@dataclass(frozen=True)
class GroundOperator:
    """A deterministic operator bound to concrete objects."""

    name: str
    operator: DeterministicOperator
    objects: tuple[ObjectRef, ...]
    template: ActionTemplate
    preconditions: frozenset[Atom]
    add: frozenset[Atom]
    delete: frozenset[Atom]

    def __str__(self) -> str:
        return self.name


def ground_operators(
    operators: Iterable[DeterministicOperator],
    objects: Iterable[ObjectRef],
) -> list[GroundOperator]:
    """All distinct-object, type-consistent groundings, deterministically ordered."""
    pool = sorted(set(objects), key=lambda o: (o.type, o.name))
    by_type: dict[str, list[ObjectRef]] = {}
    for obj in pool:
        by_type.setdefault(obj.type, []).append(obj)
    out: list[GroundOperator] = []
    for op in sorted(operators, key=operator_sort_key):
        k = len(op.controller.discrete_params)
        for binding in _distinct_bindings(op, by_type):
            sub = dict(zip(op.params, binding))
            pre = apply_substitution(op.preconditions, sub)
            add = apply_substitution(op.effects.add, sub)
            delete = apply_substitution(op.effects.delete, sub)
            args = ",".join(o.name for o in binding)
            out.append(
                GroundOperator(
                    name=f"{op.name}({args})",
                    operator=op,
                    objects=tuple(binding),
                    template=ActionTemplate(op.controller, tuple(binding[:k])),
                    preconditions=pre,
                    add=add,
                    delete=delete,
                )
            )
    return out


def _distinct_bindings(
    op: DeterministicOperator, by_type: dict[str, list[ObjectRef]]
) -> Iterable[tuple[ObjectRef, ...]]:
    # Group parameter positions by type, then take ordered selections without
    # replacement within each type group; cross-type positions are independent.
    types = [v.type for v in op.params]
    if any(t not in by_type for t in types):
        return
    slots: dict[str, list[int]] = {}
    for i, t in enumerate(types):
        slots.setdefault(t, []).append(i)
    groups = sorted(slots)
    choices = [list(permutations(by_type[t], len(slots[t]))) for t in groups]

    def rec(gi: int, binding: list) -> Iterable[tuple[ObjectRef, ...]]:
        if gi == len(groups):
            yield tuple(binding)
            return
        for sel in choices[gi]:
            for pos, obj in zip(slots[groups[gi]], sel):
                binding[pos] = obj
            yield from rec(gi + 1, binding)

    yield from rec(0, [None] * len(types))


class GroundTask:
    """Interned-atom view of a planning problem for one operator set.

    The atom universe is the closure of the initial state, the goal, and
    every ground operator's precondition and effect atoms; states are int
    bitmasks over that universe.
    """

    def __init__(
        self,
        init: frozenset[Atom],
        goal: frozenset[Atom],
        operators: Sequence[GroundOperator],
    ) -> None:
        universe: set[Atom] = set(init) | set(goal)
        for op in operators:
            universe |= op.preconditions | op.add | op.delete
        self.atoms: list[Atom] = sorted(universe, key=atom_sort_key)
        self.index: dict[Atom, int] = {a: i for i, a in enumerate(self.atoms)}
        self.operators = list(operators)
        self.init_mask = self.mask(init)
        self.goal_mask = self.mask(goal)
        self.pre_masks = [self.mask(op.preconditions) for op in operators]
        self.add_masks = [self.mask(op.add) for op in operators]
        self.del_masks = [self.mask(op.delete) for op in operators]
        self._build_arrays(goal)

    def _build_arrays(self, goal: frozenset[Atom]) -> None:
        pre_idx, pre_off = [], [0]
        add_idx, add_off = [], [0]
        for op in self.operators:
            pre_idx.extend(sorted(self.index[a] for a in op.preconditions))
            pre_off.append(len(pre_idx))
            add_idx.extend(sorted(self.index[a] for a in op.add))
            add_off.append(len(add_idx))
        self.pre_idx = np.asarray(pre_idx, dtype=np.int32)
        self.pre_off = np.asarray(pre_off, dtype=np.int32)
        self.add_idx = np.asarray(add_idx, dtype=np.int32)
        self.add_off = np.asarray(add_off, dtype=np.int32)
        self.goal_idx = np.asarray(sorted(self.index[a] for a in goal), dtype=np.int32)

    def mask(self, atoms: Iterable[Atom]) -> int:
        bits = 0
        for atom in atoms:
            bits |= 1 << self.index[atom]
        return bits

    def unmask(self, bits: int) -> frozenset[Atom]:
        return frozenset(a for i, a in enumerate(self.atoms) if bits >> i & 1)

    def truth_array(self, bits: int) -> np.ndarray:
        out = np.zeros(len(self.atoms), dtype=np.uint8)
        for i in range(len(self.atoms)):
            if bits >> i & 1:
                out[i] = 1
        return out

    def applicable(self, bits: int) -> Iterable[int]:
        for i, pre in enumerate(self.pre_masks):
            if bits & pre == pre:
                yield i

    def successor(self, bits: int, op_index: int) -> int:
        return (bits & ~self.del_masks[op_index]) | self.add_masks[op_index]

    def satisfies_goal(self, bits: int) -> bool:
        return bits & self.goal_mask == self.goal_mask
