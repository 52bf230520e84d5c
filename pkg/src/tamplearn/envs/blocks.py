"""Blocks: tabletop towers with a gripper, analytic collision geometry.

Blocks are axis-aligned cubes on a unit table. Picking requires a clear
block and an empty hand; stacking drops the held block onto a clear one;
putting on the table requires a commanded location whose footprint overlaps
no existing block. Placements sampled onto occupied spots are no-ops, which
is the phenomenon that makes naive placement sampling fail.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..errors import GenerationFailed
from ..operators import Action, ControllerSpec, DeterministicOperator
from ..symbols import Atom, EffectSet, ObjectRef, Predicate, Variable
from .base import Domain, LowLevelState, Problem, Vec
from .config import Config, extract_prefixed, load_domain_defaults

BLOCK = "block"

ON = Predicate("On", (BLOCK, BLOCK))
ON_TABLE = Predicate("OnTable", (BLOCK,))
CLEAR = Predicate("Clear", (BLOCK,))
HOLDING = Predicate("Holding", (BLOCK,))
HAND_EMPTY = Predicate("HandEmpty", ())

PICK = ControllerSpec("Pick", (BLOCK,), 0)
STACK = ControllerSpec("Stack", (BLOCK,), 0)
PUT_ON_TABLE = ControllerSpec("PutOnTable", (), 2)

_TOL = 1e-7


class BlocksDomain(Domain):
    name = "blocks"

    def __init__(self, config: Config | None = None):
        merged = load_domain_defaults(self.name)
        if config:
            merged.update({k: v for k, v in config.items() if k.startswith("blocks.")})
        self._config = merged
        self._size = float(merged["blocks.size"])
        self._table = tuple(merged["blocks.table"])  # (x_lo, x_hi, y_lo, y_hi)
        self._predicates = {
            p.name: p for p in (ON, ON_TABLE, CLEAR, HOLDING, HAND_EMPTY)
        }
        self._controllers = {c.name: c for c in (PICK, STACK, PUT_ON_TABLE)}

    @property
    def types(self) -> tuple[str, ...]:
        return (BLOCK,)

    @property
    def predicates(self) -> Mapping[str, Predicate]:
        return dict(self._predicates)

    @property
    def controllers(self) -> Mapping[str, ControllerSpec]:
        return dict(self._controllers)

    @property
    def goal_predicates(self) -> frozenset[str]:
        return frozenset({ON.name, ON_TABLE.name})

    # Geometry ------------------------------------------------------------

    def _held_block(self, x: LowLevelState) -> ObjectRef | None:
        for obj in x.objects:
            if x.scalar(obj, "held") > 0.5:
                return obj
        return None

    def _pos(self, x: LowLevelState, b: ObjectRef) -> tuple[float, float, float]:
        px, py, pz = x.vec(b, "pos")
        return px, py, pz

    def _on(self, x: LowLevelState, b1: ObjectRef, b2: ObjectRef) -> bool:
        x1, y1, z1 = self._pos(x, b1)
        x2, y2, z2 = self._pos(x, b2)
        return (
            abs(x1 - x2) < _TOL
            and abs(y1 - y2) < _TOL
            and abs(z1 - (z2 + self._size)) < _TOL
        )

    def _clear(self, x: LowLevelState, b: ObjectRef, held: ObjectRef | None) -> bool:
        if b == held:
            return False
        return not any(
            other != held and other != b and self._on(x, other, b)
            for other in x.objects
        )

    def _footprint_free(self, x: LowLevelState, px: float, py: float,
                        held: ObjectRef | None) -> bool:
        s = self._size
        for other in x.objects:
            if other == held:
                continue
            ox, oy, _ = self._pos(x, other)
            if abs(px - ox) < s and abs(py - oy) < s:
                return False
        return True

    def _in_workspace(self, px: float, py: float) -> bool:
        x_lo, x_hi, y_lo, y_hi = self._table
        half = self._size / 2
        return x_lo + half <= px <= x_hi - half and y_lo + half <= py <= y_hi - half

    # Dynamics ------------------------------------------------------------

    def simulate(self, x: LowLevelState, a: Action) -> LowLevelState:
        held = self._held_block(x)
        if a.controller.name == PICK.name:
            (b,) = a.discrete_args
            if held is not None or not self._clear(x, b, held):
                return x
            return x.set(b, held=1.0)
        if a.controller.name == STACK.name:
            (b,) = a.discrete_args
            if held is None or b == held or not self._clear(x, b, held):
                return x
            bx, by, bz = self._pos(x, b)
            return x.set(held, pos=(bx, by, bz + self._size), held=0.0)
        if a.controller.name == PUT_ON_TABLE.name:
            px, py = a.continuous_args
            if held is None:
                return x
            if not self._in_workspace(px, py):
                return x
            if not self._footprint_free(x, px, py, held):
                return x
            return x.set(held, pos=(px, py, self._size / 2), held=0.0)
        raise ValueError(f"unknown controller {a.controller.name}")

    def parse(self, x: LowLevelState) -> frozenset[Atom]:
        atoms: set[Atom] = set()
        held = self._held_block(x)
        if held is None:
            atoms.add(HAND_EMPTY())
        else:
            atoms.add(HOLDING(held))
        s = self._size
        for b in x.objects:
            if b == held:
                continue
            _, _, bz = self._pos(x, b)
            if abs(bz - s / 2) < _TOL:
                atoms.add(ON_TABLE(b))
            if self._clear(x, b, held):
                atoms.add(CLEAR(b))
            for other in x.objects:
                if other != b and other != held and self._on(x, b, other):
                    atoms.add(ON(b, other))
        return frozenset(atoms)

    def sample_continuous(self, controller, x, discrete_args, rng) -> Vec:
        if controller.continuous_dim == 0:
            return ()
        # PutOnTable: uniform reachable table location, ignoring obstacles.
        x_lo, x_hi, y_lo, y_hi = self._table
        half = self._size / 2
        return (
            float(rng.uniform(x_lo + half, x_hi - half)),
            float(rng.uniform(y_lo + half, y_hi - half)),
        )

    # Problems ------------------------------------------------------------

    def _random_towers(self, blocks, rng) -> dict[ObjectRef, tuple[float, float, float]]:
        """Scatter blocks into random towers at non-colliding table spots."""
        s = self._size
        positions: dict[ObjectRef, tuple[float, float, float]] = {}
        towers: list[list[ObjectRef]] = []
        stack_prob = float(self._config["blocks.stack_prob"])
        for b in blocks:
            if towers and rng.random() < stack_prob:
                tower = towers[int(rng.integers(len(towers)))]
                base_x, base_y, _ = positions[tower[0]]
                positions[b] = (base_x, base_y, s / 2 + s * len(tower))
                tower.append(b)
            else:
                for _ in range(200):
                    px = float(rng.uniform(self._table[0] + s / 2, self._table[1] - s / 2))
                    py = float(rng.uniform(self._table[2] + s / 2, self._table[3] - s / 2))
                    if all(
                        abs(px - ox) >= s or abs(py - oy) >= s
                        for ox, oy, _ in positions.values()
                    ):
                        break
                else:
                    raise GenerationFailed("blocks: no free table spot found")
                positions[b] = (px, py, s / 2)
                towers.append([b])
        return positions

    def generate_problem(self, size_params, rng) -> Problem:
        attempts = int(self._config["blocks.max_generation_attempts"])
        for _ in range(attempts):
            problem = self._try_layout(size_params, rng)
            if problem is not None:
                return problem
        raise GenerationFailed(f"blocks: no layout in {attempts} attempts")

    def _try_layout(self, size_params, rng) -> Problem | None:
        n = int(rng.integers(
            int(size_params["n_blocks_min"]), int(size_params["n_blocks_max"]) + 1
        ))
        blocks = [ObjectRef(f"block{i}", BLOCK) for i in range(n)]
        positions = self._random_towers(blocks, rng)
        attrs = {
            b: {"pos": positions[b], "held": (0.0,)} for b in blocks
        }
        x0 = LowLevelState.build(attrs)

        chain_len = int(size_params.get("goal_chain", 0))
        if chain_len >= 2:
            order = list(rng.permutation(n)[:chain_len])
            goal = frozenset(
                ON(blocks[order[i]], blocks[order[i + 1]])
                for i in range(chain_len - 1)
            )
        else:
            i, j = rng.permutation(n)[:2]
            goal = frozenset({ON(blocks[i], blocks[j])})
        if goal <= self.parse(x0):
            return None  # already satisfied; re-roll
        return Problem(objects=frozenset(blocks), x0=x0, goal=goal)

    @property
    def train_size_params(self) -> Mapping[str, float]:
        return extract_prefixed(self._config, "blocks.train.")

    @property
    def eval_size_params(self) -> Mapping[str, float]:
        return extract_prefixed(self._config, "blocks.eval.")

    # Reference operators ---------------------------------------------------

    def oracle_operators(self) -> tuple[DeterministicOperator, ...]:
        b = Variable("?x0", BLOCK)
        c = Variable("?x1", BLOCK)
        pick_table = DeterministicOperator(
            name="PickFromTable0",
            controller=PICK,
            params=(b,),
            preconditions=frozenset({HAND_EMPTY(), CLEAR(b), ON_TABLE(b)}),
            effects=EffectSet(
                add=frozenset({HOLDING(b)}),
                delete=frozenset({HAND_EMPTY(), CLEAR(b), ON_TABLE(b)}),
            ),
        )
        unstack = DeterministicOperator(
            name="Unstack0",
            controller=PICK,
            params=(b, c),
            preconditions=frozenset({HAND_EMPTY(), CLEAR(b), ON(b, c)}),
            effects=EffectSet(
                add=frozenset({HOLDING(b), CLEAR(c)}),
                delete=frozenset({HAND_EMPTY(), CLEAR(b), ON(b, c)}),
            ),
        )
        stack = DeterministicOperator(
            name="Stack0",
            controller=STACK,
            params=(b, c),  # ?x0 is the stack target, ?x1 the held block
            preconditions=frozenset({HOLDING(c), CLEAR(b)}),
            effects=EffectSet(
                add=frozenset({ON(c, b), CLEAR(c), HAND_EMPTY()}),
                delete=frozenset({HOLDING(c), CLEAR(b)}),
            ),
        )
        put = DeterministicOperator(
            name="PutOnTable0",
            controller=PUT_ON_TABLE,
            params=(b,),
            preconditions=frozenset({HOLDING(b)}),
            effects=EffectSet(
                add=frozenset({ON_TABLE(b), CLEAR(b), HAND_EMPTY()}),
                delete=frozenset({HOLDING(b)}),
            ),
        )
        return (pick_table, unstack, stack, put)
