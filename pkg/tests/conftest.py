"""Shared fixtures and small vocabularies used across the test suite."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from tamplearn.learning import SymbolicTransition
from tamplearn.operators import Action, ControllerSpec
from tamplearn.symbols import (
    Atom,
    EffectSet,
    ObjectRef,
    Predicate,
    Variable,
    apply_substitution,
    sorted_atoms,
    substitute_effects,
    unify,
)

# A small typed vocabulary for relational unit tests.
BLOCK = "block"
TARGET = "target"

HOLDING = Predicate("Holding", (BLOCK,))
HAND_EMPTY = Predicate("HandEmpty", ())
COVERS = Predicate("Covers", (BLOCK, TARGET))
ON = Predicate("On", (BLOCK, BLOCK))
CLEAR = Predicate("Clear", (BLOCK,))
ON_TABLE = Predicate("OnTable", (BLOCK,))

PREDICATES = {
    p.name: p for p in [HOLDING, HAND_EMPTY, COVERS, ON, CLEAR, ON_TABLE]
}


def blk(name: str) -> ObjectRef:
    return ObjectRef(name, BLOCK)


def tgt(name: str) -> ObjectRef:
    return ObjectRef(name, TARGET)


def effect_set(add=(), delete=()) -> EffectSet:
    return EffectSet(add=frozenset(add), delete=frozenset(delete))


def enumerate_bijections(e1: EffectSet, e2: EffectSet):
    """Brute-force oracle: yield every type-preserving bijection mapping e1 to e2.

    Enumerates all injective assignments from e1's objects to e2's objects
    (per type) and keeps those under which the substituted effect sets are
    exactly equal. Exponential; only for small fixtures.
    """
    from tamplearn.symbols import substitute_effects

    objs1 = sorted(e1.objects())
    objs2 = sorted(e2.objects())
    by_type1: dict[str, list[ObjectRef]] = {}
    by_type2: dict[str, list[ObjectRef]] = {}
    for o in objs1:
        by_type1.setdefault(o.type, []).append(o)
    for o in objs2:
        by_type2.setdefault(o.type, []).append(o)
    if sorted(by_type1) != sorted(by_type2):
        return
    if any(len(by_type1[t]) != len(by_type2[t]) for t in by_type1):
        return

    per_type_perms = [
        [list(zip(by_type1[t], perm)) for perm in itertools.permutations(by_type2[t])]
        for t in sorted(by_type1)
    ]
    for combo in itertools.product(*per_type_perms):
        mapping = dict(pair for group in combo for pair in group)
        if substitute_effects(e1, mapping) == e2:
            yield mapping


def random_effect_set(rng: np.random.Generator, n_objects=4, max_atoms=4) -> EffectSet:
    """Small random ground effect set over the shared vocabulary."""
    blocks = [blk(f"b{i}") for i in range(n_objects)]
    targets = [tgt(f"t{i}") for i in range(n_objects)]
    preds = [HOLDING, HAND_EMPTY, COVERS, ON, CLEAR, ON_TABLE]

    def rand_atom() -> Atom:
        pred = preds[rng.integers(len(preds))]
        args = []
        for t in pred.arg_types:
            pool = blocks if t == BLOCK else targets
            args.append(pool[rng.integers(len(pool))])
        return Atom(pred, tuple(args))

    add, delete = set(), set()
    for _ in range(rng.integers(0, max_atoms + 1)):
        add.add(rand_atom())
    for _ in range(rng.integers(0, max_atoms + 1)):
        atom = rand_atom()
        if atom not in add:
            delete.add(atom)
    return EffectSet(add=frozenset(add), delete=frozenset(delete))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


# ---------------------------------------------------------------------------
# Additive-heuristic fixtures. Each case is (n_atoms, ops, init, goal, want)
# where ops is a list of (pre, add) index lists and `want` was computed by
# hand from the fixpoint definition: cost(p)=0 if p in init, op cost is
# 1 + sum of precondition costs, atom cost is min over ops adding it, and
# the heuristic is the sum of goal-atom costs (inf if any is unreachable).
# ---------------------------------------------------------------------------

INF = float("inf")

HADD_CASES = [
    # goal already true
    (1, [], [0], [0], 0.0),
    # empty goal is free even with no facts
    (2, [([0], [1])], [], [], 0.0),
    # no operator adds the goal
    (2, [], [0], [1], INF),
    # chain 0 -> 1 -> 2: cost(1)=1, cost(2)=2
    (3, [([0], [1]), ([1], [2])], [0], [2], 2.0),
    # additive goals share the chain: 1 + 2
    (3, [([0], [1]), ([1], [2])], [0], [1, 2], 3.0),
    # min over adders: free-precondition op wins
    (2, [([], [1]), ([0], [1])], [0], [1], 1.0),
    # shortcut beats the long chain: min(1+2, 1+0) = 1
    (4, [([0], [1]), ([1], [2]), ([2], [3]), ([0], [3])], [0], [3], 1.0),
    # conjunctive preconditions add up: 1 + (1 + 2) = 4
    (4, [([0], [1]), ([1], [2]), ([1, 2], [3])], [0], [3], 4.0),
    # a cycle converges: cost(1)=1
    (2, [([0], [1]), ([1], [0])], [0], [1], 1.0),
    # self-supporting atom stays unreachable
    (2, [([1], [1])], [0], [1], INF),
    # empty init bootstrapped by a no-precondition op: 1 then 2
    (2, [([], [0]), ([0], [1])], [], [1], 2.0),
]


def hadd_arrays(n_atoms, ops, init):
    """Pack a fixture into the flattened arrays the kernels consume."""
    pre_idx, pre_off, add_idx, add_off = [], [0], [], [0]
    for pre, add in ops:
        pre_idx.extend(pre)
        pre_off.append(len(pre_idx))
        add_idx.extend(add)
        add_off.append(len(add_idx))
    init_true = np.zeros(n_atoms, dtype=np.uint8)
    for i in init:
        init_true[i] = 1
    return (
        init_true,
        np.asarray(pre_idx, dtype=np.int32),
        np.asarray(pre_off, dtype=np.int32),
        np.asarray(add_idx, dtype=np.int32),
        np.asarray(add_off, dtype=np.int32),
    )


def hadd_reference(n_atoms, ops, init, goal) -> float:
    """Independent dict-based Bellman iteration (no arrays, no clamping)."""
    cost = {i: (0.0 if i in init else INF) for i in range(n_atoms)}
    changed = True
    while changed:
        changed = False
        for pre, add in ops:
            total = 1.0 + sum(cost[p] for p in pre)
            for atom in add:
                if total < cost[atom]:
                    cost[atom] = total
                    changed = True
    return sum(cost[g] for g in goal) if goal else 0.0

# ---------------------------------------------------------------------------
# Learner fixtures and oracles. Controllers here have no continuous slot so
# transitions can be hand-built from discrete arguments alone.
# ---------------------------------------------------------------------------

PICK_CTRL = ControllerSpec("Pick", (BLOCK,), 0)
PLACE_CTRL = ControllerSpec("Place", (BLOCK, TARGET), 0)
STACK_CTRL = ControllerSpec("Stack", (BLOCK, BLOCK), 0)


def act(ctrl: ControllerSpec, *objs: ObjectRef) -> Action:
    return Action(ctrl, tuple(objs), ())


def transition(s, a: Action, s_next) -> SymbolicTransition:
    return SymbolicTransition(frozenset(s), a, frozenset(s_next))


def random_transitions(rng: np.random.Generator, n: int, n_objects=3, controllers=None) -> list:
    """Random transitions whose successor states perturb the state slightly,
    so effect sets are small and frequently unify across transitions."""
    blocks = [blk(f"b{i}") for i in range(n_objects)]
    targets = [tgt(f"t{i}") for i in range(n_objects)]
    preds = [HOLDING, HAND_EMPTY, COVERS, ON, CLEAR, ON_TABLE]
    ctrls = list(controllers) if controllers else [PICK_CTRL, PLACE_CTRL, STACK_CTRL]

    def rand_atom() -> Atom:
        pred = preds[rng.integers(len(preds))]
        pools = [blocks if t == BLOCK else targets for t in pred.arg_types]
        return Atom(pred, tuple(p[rng.integers(len(p))] for p in pools))

    out = []
    for _ in range(n):
        s = frozenset(rand_atom() for _ in range(rng.integers(0, 5)))
        ctrl = ctrls[rng.integers(len(ctrls))]
        pools = [blocks if t == BLOCK else targets for t in ctrl.discrete_params]
        args = tuple(p[rng.integers(len(p))] for p in pools)
        nxt = set(s)
        for _ in range(rng.integers(0, 3)):
            if nxt and rng.random() < 0.5:
                nxt.discard(sorted_atoms(nxt)[rng.integers(len(nxt))])
            else:
                nxt.add(rand_atom())
        out.append(transition(s, act(ctrl, *args), nxt))
    return out


def cluster_partition_oracle(transitions) -> set[frozenset[int]]:
    """Union-find closure of anchored effect unifiability.

    Two transitions of the same controller are related when their ground
    effect sets unify under the object seed pairing their discrete arguments
    position by position. The greedy first-representative clustering must
    produce exactly this partition.
    """
    parent = list(range(len(transitions)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in itertools.combinations(range(len(transitions)), 2):
        ti, tj = transitions[i], transitions[j]
        if ti.a.controller.name != tj.a.controller.name:
            continue
        seed: dict[ObjectRef, ObjectRef] = {}
        clash = False
        for src, dst in zip(ti.a.discrete_args, tj.a.discrete_args):
            if seed.get(src, dst) != dst:
                clash = True
                break
            seed[src] = dst
        if clash:
            continue
        if unify(ti.effects, tj.effects, seed) is not None:
            parent[find(i)] = find(j)

    groups: dict[int, set[int]] = {}
    for i in range(len(transitions)):
        groups.setdefault(find(i), set()).add(i)
    return {frozenset(g) for g in groups.values()}


def injective_extensions(variables, objects, seed):
    """Every injective type-consistent total map on ``variables`` extending seed."""
    seed = dict(seed)
    if len(set(seed.values())) != len(seed):
        return  # a non-injective seed admits no injective extension
    vs = sorted(set(variables) - set(seed))
    objects = sorted(set(objects))

    def rec(i, cur, used):
        if i == len(vs):
            yield dict(cur)
            return
        var = vs[i]
        for obj in objects:
            if obj.type == var.type and obj not in used:
                cur[var] = obj
                used.add(obj)
                yield from rec(i + 1, cur, used)
                used.discard(obj)
                del cur[var]

    yield from rec(0, dict(seed), set(seed.values()))


def score_oracle(cand, cluster, transitions, already_explained, beta=10.0) -> float:
    """Exhaustive-substitution reimplementation of the candidate score.

    Enumerates every injective substitution over the candidate's variables
    (extending the controller-argument anchor) instead of searching; a
    transition is a true positive when the cluster's effects follow under
    some such substitution and a false positive when they fail under one.
    Exponential; only for small fixtures.
    """
    member_ids = {m.index for m in cluster.members}
    eff_vars = cluster.lifted_effects.variables()
    cand_vars = {a for atom in cand for a in atom.args if isinstance(a, Variable)}
    tp = fp = 0
    for i, t in enumerate(transitions):
        anchor: dict[Variable, ObjectRef] = {}
        clash = False
        for var, obj in zip(cluster.action_vars, t.a.discrete_args):
            if anchor.get(var, obj) != obj:
                clash = True
                break
            anchor[var] = obj
        if clash:
            continue
        universe = {arg for atom in t.s for arg in atom.args}
        universe |= t.effects.objects() | set(t.a.discrete_args)
        follows = violates = False
        for sigma in injective_extensions(cand_vars | set(anchor), universe, anchor):
            if not apply_substitution(cand, sigma) <= t.s:
                continue
            if any(
                substitute_effects(cluster.lifted_effects, tau) == t.effects
                for tau in injective_extensions(eff_vars | set(sigma), universe, sigma)
            ):
                follows = True
            else:
                violates = True
        if follows and i in member_ids and i not in already_explained:
            tp += 1
        if violates:
            fp += 1
    return beta * tp - fp
