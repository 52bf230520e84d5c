"""Painting: wash, dry, paint, then place each object into a shelf or box.

Objects start on a table, possibly dirty or wet. The gripper picks an object
with a top or side grasp depending on the commanded grip height; the shelf
has a ceiling, so only side-grasped objects fit, while the box only admits
top-grasped objects. Washing, drying, and painting act on the held object;
wash and dry demand an exact per-object effort, paint demands a clean, dry,
blank object. The grasp chosen at pick time therefore gates the placement
several steps later.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from ..errors import GenerationFailed
from ..operators import Action, ControllerSpec, DeterministicOperator
from ..symbols import Atom, EffectSet, ObjectRef, Predicate, Variable
from .base import Domain, LowLevelState, Problem, Vec
from .config import Config, extract_prefixed, load_domain_defaults

OBJ = "obj"

ON_TABLE = Predicate("OnTable", (OBJ,))
HOLDING = Predicate("Holding", (OBJ,))
HOLDING_SIDE = Predicate("HoldingSide", (OBJ,))
HOLDING_TOP = Predicate("HoldingTop", (OBJ,))
IN_SHELF = Predicate("InShelf", (OBJ,))
IN_BOX = Predicate("InBox", (OBJ,))
IS_DIRTY = Predicate("IsDirty", (OBJ,))
IS_CLEAN = Predicate("IsClean", (OBJ,))
IS_DRY = Predicate("IsDry", (OBJ,))
IS_WET = Predicate("IsWet", (OBJ,))
IS_BLANK = Predicate("IsBlank", (OBJ,))
IS_SHELF_COLOR = Predicate("IsShelfColor", (OBJ,))
IS_BOX_COLOR = Predicate("IsBoxColor", (OBJ,))
HAND_EMPTY = Predicate("HandEmpty", ())

PICK = ControllerSpec("Pick", (OBJ,), 6)
PLACE = ControllerSpec("Place", (), 6)
WASH = ControllerSpec("Wash", (OBJ,), 1)
DRY = ControllerSpec("Dry", (OBJ,), 1)
PAINT = ControllerSpec("Paint", (), 1)

_SIDE, _TOP, _NONE = 0.0, 1.0, -1.0

Region = tuple[float, float, float, float]  # x_lo, x_hi, y_lo, y_hi


def _in_region(px: float, py: float, region: Region) -> bool:
    x_lo, x_hi, y_lo, y_hi = region
    return x_lo <= px <= x_hi and y_lo <= py <= y_hi


class PaintingDomain(Domain):
    name = "painting"

    def __init__(self, config: Config | None = None):
        merged = load_domain_defaults(self.name)
        if config:
            merged.update({k: v for k, v in config.items() if k.startswith("painting.")})
        self._config = merged
        self._predicates = {
            p.name: p
            for p in (
                ON_TABLE, HOLDING, HOLDING_SIDE, HOLDING_TOP, IN_SHELF, IN_BOX,
                IS_DIRTY, IS_CLEAN, IS_DRY, IS_WET, IS_BLANK, IS_SHELF_COLOR,
                IS_BOX_COLOR, HAND_EMPTY,
            )
        }
        self._controllers = {c.name: c for c in (PICK, PLACE, WASH, DRY, PAINT)}

    @property
    def types(self) -> tuple[str, ...]:
        return (OBJ,)

    @property
    def predicates(self) -> Mapping[str, Predicate]:
        return dict(self._predicates)

    @property
    def controllers(self) -> Mapping[str, ControllerSpec]:
        return dict(self._controllers)

    @property
    def goal_predicates(self) -> frozenset[str]:
        return frozenset({IN_SHELF.name, IN_BOX.name, IS_SHELF_COLOR.name, IS_BOX_COLOR.name})

    # Dynamics ------------------------------------------------------------

    def _held(self, x: LowLevelState) -> ObjectRef | None:
        for obj in x.objects:
            if x.scalar(obj, "held") > 0.5:
                return obj
        return None

    def _region(self, name: str) -> Region:
        return tuple(self._config[f"painting.{name}"])  # type: ignore[return-value]

    def _collides(self, x: LowLevelState, px: float, py: float,
                  ignore: ObjectRef) -> bool:
        spacing = 2 * float(self._config["painting.obj_radius"])
        for other in x.objects:
            if other == ignore or x.scalar(other, "held") > 0.5:
                continue
            ox, oy, _ = x.vec(other, "pos")
            if abs(px - ox) < spacing and abs(py - oy) < spacing:
                return True
        return False

    def simulate(self, x: LowLevelState, a: Action) -> LowLevelState:
        name = a.controller.name
        held = self._held(x)
        h = float(self._config["painting.obj_height"])
        if name == PICK.name:
            (obj,) = a.discrete_args
            bx, by, _, gx, gy, gz = a.continuous_args
            if held is not None:
                return x
            ox, oy, _ = x.vec(obj, "pos")
            if not _in_region(ox, oy, self._region("table")):
                return x  # only table objects can be picked
            if abs(gx - ox) > self._config["painting.grip_tol"] or \
               abs(gy - oy) > self._config["painting.grip_tol"]:
                return x  # grip missed the object
            if abs(bx - gx) > self._config["painting.reach"] or \
               abs(by - gy) > self._config["painting.reach"]:
                return x  # base cannot reach the grip target
            grasp = _TOP if gz >= h else _SIDE
            return x.set(obj, held=1.0, grasp=grasp)
        if name == PLACE.name:
            bx, by, _, gx, gy, gz = a.continuous_args
            if held is None:
                return x
            if abs(bx - gx) > self._config["painting.reach"] or \
               abs(by - gy) > self._config["painting.reach"]:
                return x
            grasp = x.scalar(held, "grasp")
            if _in_region(gx, gy, self._region("shelf")):
                if grasp != _SIDE:
                    return x  # shelf ceiling blocks top-grasped objects
            elif _in_region(gx, gy, self._region("box")):
                if grasp != _TOP:
                    return x  # box walls block side-grasped objects
            else:
                return x
            if self._collides(x, gx, gy, held):
                return x
            return x.set(held, pos=(gx, gy, h / 2), held=0.0, grasp=_NONE)
        if name == WASH.name:
            (obj,) = a.discrete_args
            (effort,) = a.continuous_args
            if held != obj or x.scalar(obj, "dirtiness") <= 0.5:
                return x
            if effort != x.scalar(obj, "wash_effort"):
                return x
            return x.set(obj, dirtiness=0.0, wetness=1.0)
        if name == DRY.name:
            (obj,) = a.discrete_args
            (effort,) = a.continuous_args
            if held != obj or x.scalar(obj, "wetness") <= 0.5:
                return x
            if effort != x.scalar(obj, "dry_effort"):
                return x
            return x.set(obj, wetness=0.0)
        if name == PAINT.name:
            (color,) = a.continuous_args
            if held is None:
                return x
            if x.scalar(held, "dirtiness") > 0.5 or x.scalar(held, "wetness") > 0.5:
                return x
            if abs(x.scalar(held, "color")) > self._config["painting.color_tol"]:
                return x  # already painted
            return x.set(held, color=color)
        raise ValueError(f"unknown controller {name}")

    def parse(self, x: LowLevelState) -> frozenset[Atom]:
        atoms: set[Atom] = set()
        held = self._held(x)
        if held is None:
            atoms.add(HAND_EMPTY())
        color_tol = float(self._config["painting.color_tol"])
        shelf_color = float(self._config["painting.shelf_color"])
        box_color = float(self._config["painting.box_color"])
        for obj in x.objects:
            px, py, _ = x.vec(obj, "pos")
            if obj == held:
                atoms.add(HOLDING(obj))
                grasp = x.scalar(obj, "grasp")
                atoms.add(HOLDING_TOP(obj) if grasp == _TOP else HOLDING_SIDE(obj))
            elif _in_region(px, py, self._region("shelf")):
                atoms.add(IN_SHELF(obj))
            elif _in_region(px, py, self._region("box")):
                atoms.add(IN_BOX(obj))
            elif _in_region(px, py, self._region("table")):
                atoms.add(ON_TABLE(obj))
            atoms.add(IS_DIRTY(obj) if x.scalar(obj, "dirtiness") > 0.5 else IS_CLEAN(obj))
            atoms.add(IS_WET(obj) if x.scalar(obj, "wetness") > 0.5 else IS_DRY(obj))
            color = x.scalar(obj, "color")
            if abs(color) <= color_tol:
                atoms.add(IS_BLANK(obj))
            elif abs(color - shelf_color) <= color_tol:
                atoms.add(IS_SHELF_COLOR(obj))
            elif abs(color - box_color) <= color_tol:
                atoms.add(IS_BOX_COLOR(obj))
        return frozenset(atoms)

    def sample_continuous(self, controller, x, discrete_args, rng) -> Vec:
        h = float(self._config["painting.obj_height"])
        if controller.name == PICK.name:
            (obj,) = discrete_args
            ox, oy, _ = x.vec(obj, "pos")
            base = (ox + float(rng.uniform(-0.2, 0.2)), oy + float(rng.uniform(-0.2, 0.2)), 0.0)
            if rng.random() < 0.5:
                grip = (ox, oy, h + 0.05)  # from above: top grasp
            else:
                grip = (ox, oy, h / 2)  # from the side
            return base + grip
        if controller.name == PLACE.name:
            region = self._region("shelf") if rng.random() < 0.5 else self._region("box")
            x_lo, x_hi, y_lo, y_hi = region
            gx, gy = float(rng.uniform(x_lo, x_hi)), float(rng.uniform(y_lo, y_hi))
            base = (gx - 0.2, gy, 0.0)
            return base + (gx, gy, h / 2)
        if controller.name == WASH.name:
            (obj,) = discrete_args
            return (x.scalar(obj, "wash_effort"),)
        if controller.name == DRY.name:
            (obj,) = discrete_args
            return (x.scalar(obj, "dry_effort"),)
        if controller.name == PAINT.name:
            color = "painting.shelf_color" if rng.random() < 0.5 else "painting.box_color"
            return (float(self._config[color]),)
        raise ValueError(f"unknown controller {controller.name}")

    # Problems ------------------------------------------------------------

    def generate_problem(self, size_params, rng) -> Problem:
        attempts = int(self._config["painting.max_generation_attempts"])
        for _ in range(attempts):
            problem = self._try_layout(size_params, rng)
            if problem is not None:
                return problem
        raise GenerationFailed(f"painting: no layout in {attempts} attempts")

    def _try_layout(self, size_params, rng) -> Problem | None:
        cfg = self._config
        n = int(rng.integers(
            int(size_params["n_objs_min"]), int(size_params["n_objs_max"]) + 1
        ))
        spacing = 2 * float(cfg["painting.obj_radius"])
        h = float(cfg["painting.obj_height"])
        x_lo, x_hi, y_lo, y_hi = self._region("table")
        attrs: dict[ObjectRef, dict[str, Sequence[float]]] = {}
        placed: list[tuple[float, float]] = []
        goal: set[Atom] = set()
        for i in range(n):
            obj = ObjectRef(f"obj{i}", OBJ)
            for _ in range(200):
                px = float(rng.uniform(x_lo + spacing, x_hi - spacing))
                py = float(rng.uniform(y_lo + spacing, y_hi - spacing))
                if all(abs(px - qx) >= spacing or abs(py - qy) >= spacing
                       for qx, qy in placed):
                    break
            else:
                return None
            placed.append((px, py))
            dirty = rng.random() < float(cfg["painting.dirty_prob"])
            wet = (not dirty) and rng.random() < float(cfg["painting.wet_if_clean_prob"])
            attrs[obj] = {
                "pos": (px, py, h / 2),
                "held": (0.0,),
                "grasp": (_NONE,),
                "dirtiness": (1.0 if dirty else 0.0,),
                "wetness": (1.0 if wet else 0.0,),
                "color": (0.0,),
                "wash_effort": (float(rng.uniform(0.2, 1.0)),),
                "dry_effort": (float(rng.uniform(0.2, 1.0)),),
            }
            if rng.random() < 0.5:
                goal.update({IN_SHELF(obj), IS_SHELF_COLOR(obj)})
            else:
                goal.update({IN_BOX(obj), IS_BOX_COLOR(obj)})
        x0 = LowLevelState.build(attrs)
        return Problem(objects=frozenset(attrs), x0=x0, goal=frozenset(goal))

    @property
    def train_size_params(self) -> Mapping[str, float]:
        return extract_prefixed(self._config, "painting.train.")

    @property
    def eval_size_params(self) -> Mapping[str, float]:
        return extract_prefixed(self._config, "painting.eval.")

    # Reference operators ---------------------------------------------------

    def oracle_operators(self) -> tuple[DeterministicOperator, ...]:
        o = Variable("?x0", OBJ)
        ops = []
        for suffix, grasp_pred in (("Top", HOLDING_TOP), ("Side", HOLDING_SIDE)):
            ops.append(DeterministicOperator(
                name=f"Pick{suffix}0",
                controller=PICK,
                params=(o,),
                preconditions=frozenset({HAND_EMPTY(), ON_TABLE(o)}),
                effects=EffectSet(
                    add=frozenset({HOLDING(o), grasp_pred(o)}),
                    delete=frozenset({HAND_EMPTY(), ON_TABLE(o)}),
                ),
            ))
        ops.append(DeterministicOperator(
            name="Wash0",
            controller=WASH,
            params=(o,),
            preconditions=frozenset({HOLDING(o), IS_DIRTY(o)}),
            effects=EffectSet(
                add=frozenset({IS_CLEAN(o), IS_WET(o)}),
                delete=frozenset({IS_DIRTY(o), IS_DRY(o)}),
            ),
        ))
        ops.append(DeterministicOperator(
            name="Dry0",
            controller=DRY,
            params=(o,),
            preconditions=frozenset({HOLDING(o), IS_WET(o)}),
            effects=EffectSet(
                add=frozenset({IS_DRY(o)}), delete=frozenset({IS_WET(o)})
            ),
        ))
        for suffix, color_pred in (("Shelf", IS_SHELF_COLOR), ("Box", IS_BOX_COLOR)):
            ops.append(DeterministicOperator(
                name=f"Paint{suffix}0",
                controller=PAINT,
                params=(o,),
                preconditions=frozenset(
                    {HOLDING(o), IS_CLEAN(o), IS_DRY(o), IS_BLANK(o)}
                ),
                effects=EffectSet(
                    add=frozenset({color_pred(o)}), delete=frozenset({IS_BLANK(o)})
                ),
            ))
        for suffix, grasp_pred, dest_pred in (
            ("Shelf", HOLDING_SIDE, IN_SHELF),
            ("Box", HOLDING_TOP, IN_BOX),
        ):
            ops.append(DeterministicOperator(
                name=f"Place{suffix}0",
                controller=PLACE,
                params=(o,),
                preconditions=frozenset({HOLDING(o), grasp_pred(o)}),
                effects=EffectSet(
                    add=frozenset({dest_pred(o), HAND_EMPTY()}),
                    delete=frozenset({HOLDING(o), grasp_pred(o)}),
                ),
            ))
        return tuple(ops)
