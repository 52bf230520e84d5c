"""Learning probabilistic operators from symbolic transitions.

Per controller: transitions are clustered by unifiability of their ground
effect sets (anchored so that controller arguments correspond), each
cluster's preconditions are learned by an outer greedy loop over an inner
best-first search, candidates sharing a precondition set up to renaming are
merged into one probabilistic operator, and outcome probabilities are
estimated as count ratios.

The candidate score is beta * TP - FP: TP counts cluster transitions not
yet explained where some substitution satisfies the candidate and the
cluster's effects follow under it; FP counts transitions (anywhere in the
controller's data) where some substitution satisfies the candidate but the
effects do not follow under that same substitution. Substitutions always
extend the controller-argument anchor, are injective, and type-consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from heapq import heappop, heappush
from itertools import combinations, permutations
from typing import Iterable, Optional, Sequence

from .errors import DivisionByZeroData
from .matching import (
    Binding,
    CompiledQuery,
    EffectIndex,
    StateIndex,
    compile_effects,
    compile_query,
    has_effect_binding,
    iter_matches,
)
from .operators import Action, ControllerSpec, ProbabilisticOperator
from .symbols import (
    Atom,
    EffectSet,
    ObjectRef,
    SymbolicState,
    Variable,
    apply_substitution,
    atom_sort_key,
    canonical_variable,
    ground_effects,
    invert_bijection,
    sorted_atoms,
    substitute_effects,
    unify,
)


@dataclass(frozen=True)
class SymbolicTransition:
    """One transition with both endpoints already parsed."""

    s: SymbolicState
    a: Action
    s_next: SymbolicState

    @property
    def effects(self) -> EffectSet:
        return ground_effects(self.s, self.s_next)


@dataclass(frozen=True)
class ScoreParams:
    beta: float = 10.0
    max_inner_iters: int = 100
    max_outer_steps: int = 8
    # Seed candidates may mention at most this many objects beyond the
    # action/effect objects; lifting whole states over all objects would make
    # the substitution checks exponential.
    max_aux_objects: int = 1

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class ClusterMember:
    index: int  # position in the controller's transition list
    transition: SymbolicTransition
    binding: Binding  # cluster variable -> this member's object


@dataclass
class EffectCluster:
    controller: ControllerSpec
    action_vars: tuple[Variable, ...]
    lifted_effects: EffectSet
    members: list[ClusterMember]


def cluster_lifted_effects(
    transitions: Sequence[SymbolicTransition],
) -> list[EffectCluster]:
    """Partition same-controller transitions by anchored effect unifiability."""
    clusters: list[EffectCluster] = []
    rep_effects: list[EffectSet] = []
    for index, t in enumerate(transitions):
        effects = t.effects
        placed = False
        for cluster, rep in zip(clusters, rep_effects):
            if cluster.controller.name != t.a.controller.name:
                continue
            rep_member = cluster.members[0]
            seed = _object_anchor(rep_member.transition.a, t.a)
            if seed is None:
                continue
            sigma = unify(rep, effects, seed)
            if sigma is None:
                continue
            binding = {var: sigma[obj] for var, obj in rep_member.binding.items()}
            cluster.members.append(ClusterMember(index, t, binding))
            placed = True
            break
        if not placed:
            alloc_binding: dict[ObjectRef, Variable] = {}
            action_vars = []
            for obj in t.a.discrete_args:
                var = alloc_binding.get(obj)
                if var is None:
                    var = canonical_variable(len(alloc_binding), obj.type)
                    alloc_binding[obj] = var
                action_vars.append(var)
            lifted = _lift_effects(effects, alloc_binding)
            clusters.append(
                EffectCluster(
                    controller=t.a.controller,
                    action_vars=tuple(action_vars),
                    lifted_effects=lifted,
                    members=[ClusterMember(index, t, invert_bijection(alloc_binding))],
                )
            )
            rep_effects.append(effects)
    return clusters


def _lift_effects(effects: EffectSet, alloc: dict[ObjectRef, Variable]) -> EffectSet:
    # Number unseen objects in canonical first-appearance order, adds first.
    for atom in sorted_atoms(effects.add) + sorted_atoms(effects.delete):
        for arg in atom.args:
            if arg not in alloc:
                alloc[arg] = canonical_variable(len(alloc), arg.type)
    return substitute_effects(effects, alloc)


def _object_anchor(rep_action: Action, action: Action) -> Optional[dict]:
    """Object-to-object seed aligning controller arguments, or None if clashing."""
    seed: dict[ObjectRef, ObjectRef] = {}
    for src, dst in zip(rep_action.discrete_args, action.discrete_args):
        if seed.get(src, dst) != dst:
            return None
        seed[src] = dst
    return seed


def _action_anchor(
    action_vars: tuple[Variable, ...], action: Action
) -> Optional[Binding]:
    anchor: Binding = {}
    for var, obj in zip(action_vars, action.discrete_args):
        if anchor.get(var, obj) != obj:
            return None
        anchor[var] = obj
    return anchor


@dataclass
class _Context:
    """Per-controller precomputation shared across many score calls."""

    transitions: Sequence[SymbolicTransition]
    indexes: list[StateIndex] = field(init=False)
    effect_indexes: list[EffectIndex] = field(init=False)
    _anchors: dict[tuple[Variable, ...], list[Optional[Binding]]] = field(
        init=False, default_factory=dict
    )

    def __post_init__(self) -> None:
        self.indexes = [StateIndex.build(t.s) for t in self.transitions]
        self.effect_indexes = [EffectIndex.build(t.effects) for t in self.transitions]

    def anchors(self, action_vars: tuple[Variable, ...]) -> list[Optional[Binding]]:
        memo = self._anchors.get(action_vars)
        if memo is None:
            memo = [_action_anchor(action_vars, t.a) for t in self.transitions]
            self._anchors[action_vars] = memo
        return memo


class _Scorer:
    """Scores candidates for one cluster, reusing per-transition indexes."""

    def __init__(self, cluster, ctx, already_explained, params):
        self.ctx = ctx
        self.params = params
        self.unexplained = {m.index for m in cluster.members} - already_explained
        self.anchors = ctx.anchors(cluster.action_vars)
        self.lifted = compile_effects(cluster.lifted_effects)

    def matches(self, cand: CompiledQuery | frozenset[Atom], i: int) -> tuple[bool, bool]:
        """(some substitution satisfies cand and effects follow,
        some substitution satisfies cand and effects do not follow)."""
        anchor = self.anchors[i]
        if anchor is None:
            return False, False
        follows = violates = False
        eff = self.ctx.effect_indexes[i]
        for sigma in iter_matches(cand, self.ctx.indexes[i], seed=anchor):
            if has_effect_binding(self.lifted, eff, seed=sigma):
                follows = True
            else:
                violates = True
            if follows and violates:
                break
        return follows, violates

    def score(self, cand: frozenset[Atom]) -> float:
        query = compile_query(cand)
        tp = fp = 0
        for i in range(len(self.ctx.transitions)):
            follows, violates = self.matches(query, i)
            if follows and i in self.unexplained:
                tp += 1
            if violates:
                fp += 1
        return self.params.beta * tp - fp


def _matches(cand, cluster, ctx, i) -> tuple[bool, bool]:
    return _Scorer(cluster, ctx, set(), None).matches(cand, i)


def _score(cand, cluster, ctx, already_explained, params) -> float:
    return _Scorer(cluster, ctx, already_explained, params).score(cand)


def score_preconditions(
    cand: frozenset[Atom],
    cluster: EffectCluster,
    transitions: Sequence[SymbolicTransition],
    already_explained: set[int],
    params: ScoreParams,
) -> float:
    """beta * TP - FP for one candidate precondition set."""
    return _score(cand, cluster, _Context(transitions), already_explained, params)


def _seed_candidates(cluster: EffectCluster, params: ScoreParams) -> list[frozenset[Atom]]:
    """Lift each member's previous state over its anchored objects.

    One seed per member uses only action/effect objects; further seeds admit
    up to ``max_aux_objects`` extra objects, each bound to a fresh canonical
    variable.
    """
    seeds: list[frozenset[Atom]] = []
    seen: set[frozenset[Atom]] = set()

    def add(seed: frozenset[Atom]) -> None:
        if seed not in seen:
            seen.add(seed)
            seeds.append(seed)

    for member in cluster.members:
        inv = invert_bijection(member.binding)  # object -> cluster variable
        state = sorted_atoms(member.transition.s)
        base = [a for a in state if all(arg in inv for arg in a.args)]
        add(apply_substitution(base, inv))
        others = sorted(
            {arg for a in state for arg in a.args if arg not in inv},
        )
        for k in range(1, params.max_aux_objects + 1):
            for combo in combinations(others, k):
                ext = dict(inv)
                for j, obj in enumerate(combo):
                    ext[obj] = canonical_variable(len(inv) + j, obj.type)
                atoms = [a for a in state if all(arg in ext for arg in a.args)]
                if len(atoms) > len(base):
                    add(apply_substitution(atoms, ext))
    return seeds


def learn_precondition_set(
    cluster: EffectCluster,
    transitions: Sequence[SymbolicTransition],
    already_explained: set[int],
    params: ScoreParams,
    _ctx: Optional[_Context] = None,
) -> Optional[frozenset[Atom]]:
    """Inner best-first search over atom-removal successors; None on failure.

    The frontier is ordered by score with FIFO tie-breaking; successors are
    pushed only when they strictly improve on their parent, and the search
    stops after ``max_inner_iters`` expansions or when the frontier empties.
    """
    ctx = _ctx if _ctx is not None else _Context(transitions)
    scorer = _Scorer(cluster, ctx, already_explained, params)
    cache: dict[frozenset[Atom], float] = {}

    def score_of(cand: frozenset[Atom]) -> float:
        value = cache.get(cand)
        if value is None:
            value = scorer.score(cand)
            cache[cand] = value
        return value

    frontier: list[tuple[float, int, frozenset[Atom]]] = []
    counter = 0
    best: Optional[frozenset[Atom]] = None
    best_score = float("-inf")
    for seed in _seed_candidates(cluster, params):
        s = score_of(seed)
        heappush(frontier, (-s, counter, seed))
        counter += 1
        if s > best_score:
            best, best_score = seed, s

    for _ in range(params.max_inner_iters):
        if not frontier:
            break
        neg, _, cand = heappop(frontier)
        cand_score = -neg
        for atom in sorted_atoms(cand):
            succ = cand - {atom}
            if succ in cache:
                continue
            s = score_of(succ)
            if s > cand_score:
                heappush(frontier, (-s, counter, succ))
                counter += 1
                if s > best_score:
                    best, best_score = succ, s
    if best is None or best_score <= 0:
        return None
    return best


def learn_precondition_sets(
    cluster: EffectCluster,
    transitions: Sequence[SymbolicTransition],
    params: ScoreParams,
) -> list[frozenset[Atom]]:
    """Outer greedy loop: accept precondition sets while they explain new data."""
    ctx = _Context(transitions)
    explained: set[int] = set()
    out: list[frozenset[Atom]] = []
    for _ in range(params.max_outer_steps):
        pre = learn_precondition_set(cluster, transitions, explained, params, _ctx=ctx)
        if pre is None:
            break
        newly = {
            m.index
            for m in cluster.members
            if m.index not in explained and _matches(pre, cluster, ctx, m.index)[0]
        }
        if not newly:
            break
        out.append(pre)
        explained |= newly
    return out


# ---------------------------------------------------------------------------
# Merging and parameter estimation
# ---------------------------------------------------------------------------


@dataclass
class _Group:
    """Candidates sharing one precondition set, pending estimation."""

    controller: ControllerSpec
    action_vars: tuple[Variable, ...]
    preconditions: frozenset[Atom]
    outcomes: list[EffectSet]


def _var_index(var: Variable) -> int:
    return int(var.name[2:])


def _atom_vars(atoms: Iterable[Atom]) -> set[Variable]:
    return {arg for atom in atoms for arg in atom.args if isinstance(arg, Variable)}


def _pre_isomorphism(
    group: _Group, pre: frozenset[Atom], action_vars: tuple[Variable, ...]
) -> Optional[dict[Variable, Variable]]:
    """Bijective renaming of pre onto the group's preconditions.

    Action variables map positionally; remaining variables are matched by
    exhaustive permutation within each type (precondition sets are tiny).
    """
    if len(pre) != len(group.preconditions):
        return None
    base_map = dict(zip(action_vars, group.action_vars))
    if len(set(base_map.values())) != len(base_map):
        return None
    free = sorted(_atom_vars(pre) - set(action_vars), key=_var_index)
    target = sorted(
        _atom_vars(group.preconditions) - set(group.action_vars), key=_var_index
    )
    by_type: dict[str, list[Variable]] = {}
    for v in target:
        by_type.setdefault(v.type, []).append(v)
    free_by_type: dict[str, list[Variable]] = {}
    for v in free:
        free_by_type.setdefault(v.type, []).append(v)
    if sorted(by_type) != sorted(free_by_type):
        return None
    if any(len(by_type[t]) != len(free_by_type[t]) for t in by_type):
        return None
    types = sorted(by_type)
    for perm_combo in _product_permutations([by_type[t] for t in types]):
        mapping = dict(base_map)
        for t, perm in zip(types, perm_combo):
            mapping.update(zip(free_by_type[t], perm))
        if apply_substitution(pre, mapping) == group.preconditions:
            return mapping
    return None


def _product_permutations(groups: list[list[Variable]]):
    if not groups:
        yield ()
        return
    for head in permutations(groups[0]):
        for rest in _product_permutations(groups[1:]):
            yield (head,) + rest


def _rename_outcome(
    effects: EffectSet, mapping: dict[Variable, Variable], taken: set[Variable]
) -> EffectSet:
    """Apply the precondition renaming, inventing fresh names for new variables."""
    full = dict(mapping)
    next_index = max((_var_index(v) for v in taken), default=-1) + 1
    for var in sorted(_atom_vars(effects.atoms()), key=_var_index):
        if var not in full:
            while canonical_variable(next_index, var.type) in taken:
                next_index += 1
            fresh = canonical_variable(next_index, var.type)
            full[var] = fresh
            taken.add(fresh)
            next_index += 1
    return substitute_effects(effects, full)


def estimate_parameters(
    op: ProbabilisticOperator, transitions: Sequence[SymbolicTransition]
) -> ProbabilisticOperator:
    """Replace outcome probabilities with count ratios from the data.

    The denominator counts transitions where the preconditions hold under
    some substitution; each numerator counts those where the corresponding
    outcome's effects also follow under such a substitution. Outcomes never
    observed are dropped. Raises DivisionByZeroData when the preconditions
    never hold.
    """
    ctx = _Context(transitions)
    k = len(op.controller.discrete_params)
    action_vars = op.params[:k]
    denominator = 0
    numerators = [0] * len(op.outcomes)
    for i, t in enumerate(ctx.transitions):
        anchor = _action_anchor(action_vars, t.a)
        if anchor is None:
            continue
        pending = set(range(len(op.outcomes)))
        held = False
        for sigma in iter_matches(op.preconditions, ctx.indexes[i], seed=anchor):
            held = True
            for j in sorted(pending):
                effects, _ = op.outcomes[j]
                if has_effect_binding(effects, ctx.effect_indexes[i], seed=sigma):
                    numerators[j] += 1
                    pending.discard(j)
            if not pending:
                break
        if held:
            denominator += 1
    if denominator == 0:
        raise DivisionByZeroData(f"{op.name}: preconditions never hold in the data")
    outcomes = tuple(
        (effects, numerators[j] / denominator)
        for j, (effects, _) in enumerate(op.outcomes)
        if numerators[j] > 0
    )
    return ProbabilisticOperator(
        name=op.name,
        controller=op.controller,
        params=op.params,
        preconditions=op.preconditions,
        outcomes=outcomes,
    )


def learn_operators(
    transitions: Sequence[SymbolicTransition],
    params: ScoreParams = ScoreParams(),
) -> list[ProbabilisticOperator]:
    """Full pipeline: cluster, learn preconditions, merge, estimate."""
    by_controller: dict[str, list[SymbolicTransition]] = {}
    for t in transitions:
        by_controller.setdefault(t.a.controller.name, []).append(t)

    operators: list[ProbabilisticOperator] = []
    for cname in sorted(by_controller):
        d_pi = by_controller[cname]
        clusters = cluster_lifted_effects(d_pi)
        groups: list[_Group] = []
        for cluster in clusters:
            if len(set(cluster.action_vars)) != len(cluster.action_vars):
                # Actions that repeat an argument lift to one shared variable;
                # positional operator parameters cannot express that, and the
                # planner only grounds over distinct objects anyway.
                continue
            for pre in learn_precondition_sets(cluster, d_pi, params):
                for group in groups:
                    mapping = _pre_isomorphism(group, pre, cluster.action_vars)
                    if mapping is not None:
                        taken = set(group.action_vars) | _atom_vars(group.preconditions)
                        for eff in group.outcomes:
                            taken |= _atom_vars(eff.atoms())
                        group.outcomes.append(
                            _rename_outcome(cluster.lifted_effects, mapping, taken)
                        )
                        break
                else:
                    groups.append(
                        _Group(
                            controller=cluster.controller,
                            action_vars=cluster.action_vars,
                            preconditions=pre,
                            outcomes=[cluster.lifted_effects],
                        )
                    )
        for gi, group in enumerate(groups):
            variables = set(group.action_vars) | _atom_vars(group.preconditions)
            for eff in group.outcomes:
                variables |= _atom_vars(eff.atoms())
            rest = sorted(variables - set(group.action_vars), key=_var_index)
            op = ProbabilisticOperator(
                name=f"{cname}{gi}",
                controller=group.controller,
                params=tuple(group.action_vars) + tuple(rest),
                preconditions=group.preconditions,
                outcomes=tuple((eff, 1.0) for eff in group.outcomes),
            )
            try:
                operators.append(estimate_parameters(op, d_pi))
            except DivisionByZeroData:
                continue
    return operators
