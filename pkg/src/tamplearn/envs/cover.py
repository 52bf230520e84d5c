"""Cover: blocks and targets on a 1-D line, picks and places in allowed regions.

A gripper may pick or place only at hand positions inside fixed allowed
regions. Picking grabs a block at an offset from its center; placing drops
the held block so that the hand lands at the commanded position. A block
covers a target when the target's extent lies inside the block's extent, so
the grasp offset chosen at pick time constrains which placements can cover a
given target later.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from ..errors import GenerationFailed
from ..operators import Action, ControllerSpec, DeterministicOperator
from ..symbols import Atom, EffectSet, ObjectRef, Predicate, Variable
from .base import Domain, LowLevelState, Problem, Vec
from .config import Config, extract_prefixed, load_domain_defaults

BLOCK = "block"
TARGET = "target"

COVERS = Predicate("Covers", (BLOCK, TARGET))
HOLDING = Predicate("Holding", (BLOCK,))
HAND_EMPTY = Predicate("HandEmpty", ())

PICK = ControllerSpec("Pick", (BLOCK,), 1)
PLACE = ControllerSpec("Place", (TARGET,), 1)

Interval = tuple[float, float]


def _regions(config: Config) -> list[Interval]:
    flat = config["cover.regions"]
    assert isinstance(flat, tuple) and len(flat) % 2 == 0
    return [(flat[i], flat[i + 1]) for i in range(0, len(flat), 2)]


def _in_regions(x: float, regions: Sequence[Interval]) -> bool:
    return any(lo <= x <= hi for lo, hi in regions)


def _covers(bpos: float, bw: float, tpos: float, tw: float) -> bool:
    return bpos - bw / 2 <= tpos - tw / 2 and tpos + tw / 2 <= bpos + bw / 2


def _clip_to_regions(lo: float, hi: float, regions: Sequence[Interval]) -> list[Interval]:
    out = []
    for r_lo, r_hi in regions:
        a, b = max(lo, r_lo), min(hi, r_hi)
        if a < b:
            out.append((a, b))
    return out


def _sample_interval_union(intervals: Sequence[Interval], rng) -> float:
    lengths = np.array([hi - lo for lo, hi in intervals])
    idx = int(rng.choice(len(intervals), p=lengths / lengths.sum()))
    lo, hi = intervals[idx]
    return float(rng.uniform(lo, hi))


def coverable(
    block_pos: float,
    block_width: float,
    target_pos: float,
    target_width: float,
    regions: Sequence[Interval],
) -> bool:
    """Interval-arithmetic feasibility of covering the target with the block.

    True iff there exist a pick position over the block and a place position,
    both inside allowed regions, whose implied landing center covers the
    target. Grasp offsets g range over (regions intersect block extent) minus
    the block center; landing centers are place positions minus g.
    """
    if block_width < target_width:
        return False
    half_slack = (block_width - target_width) / 2
    c_lo, c_hi = target_pos - half_slack, target_pos + half_slack
    b_lo, b_hi = block_pos - block_width / 2, block_pos + block_width / 2
    for r_lo, r_hi in regions:
        g_lo = max(r_lo, b_lo) - block_pos
        g_hi = min(r_hi, b_hi) - block_pos
        if g_lo > g_hi:
            continue  # this region does not touch the block
        for p_lo, p_hi in regions:
            # c = place - g ranges over [p_lo - g_hi, p_hi - g_lo].
            if max(p_lo - g_hi, c_lo) <= min(p_hi - g_lo, c_hi):
                return True
    return False


class CoverDomain(Domain):
    name = "cover"

    def __init__(self, config: Config | None = None):
        merged = load_domain_defaults(self.name)
        if config:
            merged.update({k: v for k, v in config.items() if k.startswith("cover.")})
        self._config = merged
        self._regions = _regions(merged)
        self._predicates = {p.name: p for p in (COVERS, HOLDING, HAND_EMPTY)}
        self._controllers = {c.name: c for c in (PICK, PLACE)}

    @property
    def types(self) -> tuple[str, ...]:
        return (BLOCK, TARGET)

    @property
    def predicates(self) -> Mapping[str, Predicate]:
        return dict(self._predicates)

    @property
    def controllers(self) -> Mapping[str, ControllerSpec]:
        return dict(self._controllers)

    @property
    def goal_predicates(self) -> frozenset[str]:
        return frozenset({COVERS.name})

    @property
    def allowed_regions(self) -> list[Interval]:
        return list(self._regions)

    # Dynamics ------------------------------------------------------------

    def _held_block(self, x: LowLevelState) -> ObjectRef | None:
        for obj in x.objects:
            if obj.type == BLOCK and x.scalar(obj, "held") > 0.5:
                return obj
        return None

    def simulate(self, x: LowLevelState, a: Action) -> LowLevelState:
        if a.controller.name == PICK.name:
            (block,) = a.discrete_args
            (loc,) = a.continuous_args
            if self._held_block(x) is not None:
                return x
            if not _in_regions(loc, self._regions):
                return x
            pos = x.scalar(block, "pos")
            width = x.scalar(block, "width")
            if abs(loc - pos) > width / 2:
                return x  # missed the block
            return x.set(block, held=1.0, grasp=loc - pos)
        if a.controller.name == PLACE.name:
            (loc,) = a.continuous_args
            held = self._held_block(x)
            if held is None:
                return x
            if not _in_regions(loc, self._regions):
                return x
            grasp = x.scalar(held, "grasp")
            return x.set(held, pos=loc - grasp, held=0.0, grasp=0.0)
        raise ValueError(f"unknown controller {a.controller.name}")

    def parse(self, x: LowLevelState) -> frozenset[Atom]:
        atoms: set[Atom] = set()
        blocks = self.objects_of_type(x, BLOCK)
        targets = self.objects_of_type(x, TARGET)
        held = self._held_block(x)
        if held is None:
            atoms.add(HAND_EMPTY())
        else:
            atoms.add(HOLDING(held))
        for b in blocks:
            if b == held:
                continue
            bpos, bw = x.scalar(b, "pos"), x.scalar(b, "width")
            for t in targets:
                if _covers(bpos, bw, x.scalar(t, "pos"), x.scalar(t, "width")):
                    atoms.add(COVERS(b, t))
        return frozenset(atoms)

    def sample_continuous(self, controller, x, discrete_args, rng) -> Vec:
        # Hand positions are proposed over the extent of the controller's
        # discrete argument (clipped to the allowed regions): picks over the
        # block, places over the target. A grasp far off-center can still make a
        # sampled placement miss, which is what forces backtracking to re-pick.
        (obj,) = discrete_args
        pos, width = x.scalar(obj, "pos"), x.scalar(obj, "width")
        support = _clip_to_regions(pos - width / 2, pos + width / 2, self._regions)
        if not support:
            support = list(self._regions)
        return (_sample_interval_union(support, rng),)

    # Problems ------------------------------------------------------------

    def _sample_region_point(self, rng, margin: float) -> float:
        usable = [(lo + margin, hi - margin) for lo, hi in self._regions]
        usable = [(lo, hi) for lo, hi in usable if lo < hi]
        return _sample_interval_union(usable, rng)

    def generate_problem(self, size_params, rng) -> Problem:
        cfg = self._config
        attempts = int(cfg["cover.max_generation_attempts"])
        for _ in range(attempts):
            problem = self._try_layout(size_params, rng)
            if problem is not None:
                return problem
        raise GenerationFailed(f"cover: no solvable layout in {attempts} attempts")

    def _try_layout(self, size_params, rng) -> Problem | None:
        cfg = self._config
        n_targets = int(rng.integers(
            int(size_params["n_targets_min"]), int(size_params["n_targets_max"]) + 1
        ))
        n_distractors = int(size_params.get("n_distractors", 1))
        pre_covered = rng.random() < float(size_params.get("pre_covered_prob", 0.0))

        attrs: dict[ObjectRef, dict[str, tuple[float, ...]]] = {}
        targets, blocks = [], []
        # Targets must be separated by more than block_pad_hi - target_width_lo,
        # or a block placed over one target could be forced to fully contain a
        # neighbouring target as well; the stray Covers atom would then make
        # every refinement disagree with the expected symbolic state.
        gap = max(0.0, float(cfg["cover.block_pad_hi"]) - float(cfg["cover.target_width_lo"]))
        gap += 0.01
        for i in range(n_targets):
            tw = float(rng.uniform(cfg["cover.target_width_lo"], cfg["cover.target_width_hi"]))
            tpos = None
            for _ in range(50):
                cand = self._sample_region_point(rng, tw / 2)
                if all(
                    abs(cand - tp) >= (tw + tw_) / 2 + gap for _, tp, tw_ in targets
                ):
                    tpos = cand
                    break
            if tpos is None:
                return None
            t = ObjectRef(f"target{i}", TARGET)
            targets.append((t, tpos, tw))
            attrs[t] = {"pos": (tpos,), "width": (tw,)}
        for i in range(n_targets + n_distractors):
            if i < n_targets:
                tw = targets[i][2]
                bw = tw + float(rng.uniform(cfg["cover.block_pad_lo"], cfg["cover.block_pad_hi"]))
            else:
                bw = float(rng.uniform(
                    cfg["cover.distractor_width_lo"], cfg["cover.distractor_width_hi"]
                ))
            b = ObjectRef(f"block{i}", BLOCK)
            if i == 0 and pre_covered:
                bpos = targets[0][1]
            else:
                bpos = None
                for _ in range(50):
                    cand = self._sample_region_point(rng, 0.0)
                    if not any(_covers(cand, bw, tp, tw_) for _, tp, tw_ in targets):
                        bpos = cand
                        break
                if bpos is None:
                    return None
            blocks.append((b, bpos, bw))
            attrs[b] = {"pos": (bpos,), "width": (bw,), "held": (0.0,), "grasp": (0.0,)}

        for i in range(n_targets):
            b, bpos, bw = blocks[i]
            t, tpos, tw = targets[i]
            already = _covers(bpos, bw, tpos, tw)
            if not already and not coverable(bpos, bw, tpos, tw, self._regions):
                return None

        goal = frozenset(COVERS(blocks[i][0], targets[i][0]) for i in range(n_targets))
        x0 = LowLevelState.build(attrs)
        return Problem(objects=frozenset(attrs), x0=x0, goal=goal)

    @property
    def train_size_params(self) -> Mapping[str, float]:
        return extract_prefixed(self._config, "cover.train.")

    @property
    def eval_size_params(self) -> Mapping[str, float]:
        return extract_prefixed(self._config, "cover.eval.")

    # Reference operators ---------------------------------------------------

    def oracle_operators(self) -> tuple[DeterministicOperator, ...]:
        b = Variable("?x0", BLOCK)
        pick = DeterministicOperator(
            name="Pick0",
            controller=PICK,
            params=(b,),
            preconditions=frozenset({HAND_EMPTY()}),
            effects=EffectSet(
                add=frozenset({HOLDING(b)}), delete=frozenset({HAND_EMPTY()})
            ),
        )
        t = Variable("?x0", TARGET)
        held = Variable("?x1", BLOCK)
        place = DeterministicOperator(
            name="Place0",
            controller=PLACE,
            params=(t, held),
            preconditions=frozenset({HOLDING(held)}),
            effects=EffectSet(
                add=frozenset({COVERS(held, t), HAND_EMPTY()}),
                delete=frozenset({HOLDING(held)}),
            ),
        )
        return (pick, place)
