"""Substitution search: matching lifted atoms and effects against ground data.

Two related searches live here. ``iter_matches`` finds type-consistent,
injective variable bindings under which a set of lifted atoms is a subset of
a ground state (used for precondition checks). ``iter_effect_bindings`` finds
the bijections under which a lifted effect set equals a ground effect set
(used to anchor clusters to transitions). Both accept a partial seed binding
and enumerate deterministically in canonical order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional

from .symbols import (
    Atom,
    EffectSet,
    ObjectRef,
    SymbolicState,
    Variable,
    atom_sort_key,
    sorted_atoms,
)

Binding = dict[Variable, ObjectRef]


@dataclass(frozen=True)
class StateIndex:
    """A symbolic state with its atoms grouped by predicate name."""

    atoms: frozenset[Atom]
    by_predicate: Mapping[str, tuple[Atom, ...]]

    @classmethod
    def build(cls, state: SymbolicState) -> "StateIndex":
        groups: dict[str, list[Atom]] = {}
        for atom in state:
            groups.setdefault(atom.predicate.name, []).append(atom)
        return cls(
            atoms=frozenset(state),
            by_predicate={n: tuple(sorted(g, key=atom_sort_key)) for n, g in groups.items()},
        )


def _as_index(state: SymbolicState | StateIndex) -> StateIndex:
    if isinstance(state, StateIndex):
        return state
    return StateIndex.build(state)


@dataclass(frozen=True)
class CompiledQuery:
    """Lifted atoms preprocessed once for matching against many states."""

    nullary: tuple[Atom, ...]
    positional: tuple[tuple[Atom, tuple], ...]  # atom with its sort key


def compile_query(atoms: Iterable[Atom]) -> CompiledQuery:
    ordered = sorted_atoms(atoms)
    return CompiledQuery(
        nullary=tuple(a for a in ordered if not a.args),
        positional=tuple((a, atom_sort_key(a)) for a in ordered if a.args),
    )


def iter_matches(
    atoms: Iterable[Atom] | CompiledQuery,
    state: SymbolicState | StateIndex,
    seed: Optional[Mapping[Variable, ObjectRef]] = None,
    max_results: Optional[int] = None,
) -> Iterator[Binding]:
    """Yield injective bindings theta extending ``seed`` with theta(atoms) <= state.

    Bindings are type-consistent and distinct variables map to distinct
    objects (the seed's images count as taken). Atoms are matched
    fewest-candidates-first; enumeration order is deterministic.
    """
    index = _as_index(state)
    query = atoms if isinstance(atoms, CompiledQuery) else compile_query(atoms)
    seed = dict(seed) if seed else {}
    taken = set(seed.values())
    if len(taken) != len(seed):
        return  # seed itself is not injective

    for atom in query.nullary:
        if atom not in index.atoms:
            return
    todo = []
    for atom, key in query.positional:
        pool = index.by_predicate.get(atom.predicate.name, ())
        if not pool:
            return
        todo.append((atom, pool, key))
    # Fewest ground candidates first prunes the search earliest.
    todo.sort(key=lambda apk: (len(apk[1]), apk[2]))

    binding: Binding = dict(seed)
    emitted = 0

    def extend(i: int) -> Iterator[Binding]:
        nonlocal emitted
        if max_results is not None and emitted >= max_results:
            return
        if i == len(todo):
            emitted += 1
            yield dict(binding)
            return
        atom, pool, _ = todo[i]
        for cand in pool:
            added: list[Variable] = []
            ok = True
            for src, dst in zip(atom.args, cand.args):
                if isinstance(src, ObjectRef):
                    if src != dst:
                        ok = False
                        break
                    continue
                bound = binding.get(src)
                if bound is not None:
                    if bound != dst:
                        ok = False
                        break
                    continue
                if src.type != dst.type or dst in taken:
                    ok = False
                    break
                binding[src] = dst
                taken.add(dst)
                added.append(src)
            if ok:
                yield from extend(i + 1)
            for src in added:
                taken.discard(binding.pop(src))

    yield from extend(0)


def find_match(
    atoms: Iterable[Atom],
    state: SymbolicState | StateIndex,
    seed: Optional[Mapping[Variable, ObjectRef]] = None,
) -> Optional[Binding]:
    """First match in canonical order, or None."""
    for binding in iter_matches(atoms, state, seed, max_results=1):
        return binding
    return None


def holds(
    atoms: Iterable[Atom],
    state: SymbolicState | StateIndex,
    seed: Optional[Mapping[Variable, ObjectRef]] = None,
) -> bool:
    return find_match(atoms, state, seed) is not None


@dataclass(frozen=True)
class CompiledEffects:
    """A lifted effect set preprocessed once for binding against many grounds."""

    n_add: int
    n_delete: int
    todo: tuple[tuple[bool, Atom], ...]


def compile_effects(lifted: EffectSet) -> CompiledEffects:
    todo = [(True, a) for a in sorted_atoms(lifted.add)]
    todo += [(False, a) for a in sorted_atoms(lifted.delete)]
    todo.sort(key=lambda pa: (-len(pa[1].args), atom_sort_key(pa[1])))
    return CompiledEffects(len(lifted.add), len(lifted.delete), tuple(todo))


@dataclass(frozen=True)
class EffectIndex:
    """A ground effect set grouped by polarity and predicate name."""

    n_add: int
    n_delete: int
    pool: Mapping[tuple[bool, str], tuple[Atom, ...]]

    @classmethod
    def build(cls, effects: EffectSet) -> "EffectIndex":
        groups: dict[tuple[bool, str], list[Atom]] = {}
        for atom in effects.add:
            groups.setdefault((True, atom.predicate.name), []).append(atom)
        for atom in effects.delete:
            groups.setdefault((False, atom.predicate.name), []).append(atom)
        return cls(
            n_add=len(effects.add),
            n_delete=len(effects.delete),
            pool={k: tuple(sorted(g, key=atom_sort_key)) for k, g in groups.items()},
        )


def iter_effect_bindings(
    lifted: EffectSet | CompiledEffects,
    ground: EffectSet | EffectIndex,
    seed: Optional[Mapping[Variable, ObjectRef]] = None,
) -> Iterator[Binding]:
    """Yield every bijective binding making ``lifted`` equal ``ground``.

    Adds map to adds and deletes to deletes; each lifted variable maps to a
    distinct object and every ground atom must be covered. ``seed`` pins
    bindings (the controller-argument anchor) and is included in each result.
    """
    compiled = lifted if isinstance(lifted, CompiledEffects) else compile_effects(lifted)
    index = ground if isinstance(ground, EffectIndex) else EffectIndex.build(ground)
    if compiled.n_add != index.n_add or compiled.n_delete != index.n_delete:
        return

    pool = index.pool
    todo = compiled.todo
    for polarity, atom in todo:
        if len(pool.get((polarity, atom.predicate.name), ())) == 0:
            return

    binding: Binding = {}
    taken: set[ObjectRef] = set()
    if seed:
        for var, obj in seed.items():
            if var.type != obj.type or obj in taken:
                return
            binding[var] = obj
            taken.add(obj)

    def extend(i: int, used: set[tuple[bool, str, int]]) -> Iterator[Binding]:
        if i == len(todo):
            yield dict(binding)
            return
        polarity, atom = todo[i]
        group = pool[(polarity, atom.predicate.name)]
        for j, cand in enumerate(group):
            key = (polarity, atom.predicate.name, j)
            if key in used:
                continue
            added: list[Variable] = []
            ok = True
            for src, dst in zip(atom.args, cand.args):
                if isinstance(src, ObjectRef):
                    if src != dst:
                        ok = False
                        break
                    continue
                bound = binding.get(src)
                if bound is not None:
                    if bound != dst:
                        ok = False
                        break
                    continue
                if src.type != dst.type or dst in taken:
                    ok = False
                    break
                binding[src] = dst
                taken.add(dst)
                added.append(src)
            if ok:
                used.add(key)
                yield from extend(i + 1, used)
                used.discard(key)
            for src in added:
                taken.discard(binding.pop(src))

    yield from extend(0, set())


def has_effect_binding(
    lifted: EffectSet | CompiledEffects,
    ground: EffectSet | EffectIndex,
    seed: Optional[Mapping[Variable, ObjectRef]] = None,
) -> bool:
    for _ in iter_effect_bindings(lifted, ground, seed):
        return True
    return False
