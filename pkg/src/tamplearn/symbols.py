"""Relational substrate: typed objects, predicates, atoms, effect sets, unification.

Everything here is immutable and hashable, so states, effect sets, and
substitution results can be shared freely and used as dict keys. Iteration
order never leaks: any place where order matters sorts atoms by
:func:`atom_sort_key` first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, TypeAlias, Union

from .errors import FileFormatError, UnboundVariable


@dataclass(frozen=True, order=True)
class ObjectRef:
    """A named, typed object in a problem instance."""

    name: str
    type: str


@dataclass(frozen=True, order=True)
class Variable:
    """A typed placeholder, written with a leading ``?`` (e.g. ``?x0``)."""

    name: str
    type: str


Term: TypeAlias = Union[ObjectRef, Variable]


@dataclass(frozen=True)
class Predicate:
    """A named relation with a fixed argument type signature."""

    name: str
    arg_types: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.arg_types)

    def __call__(self, *args: Term) -> "Atom":
        return Atom(self, tuple(args))

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Atom:
    """A predicate applied to terms; ground when every term is an object."""

    predicate: Predicate
    args: tuple[Term, ...]

    def __post_init__(self) -> None:
        if len(self.args) != self.predicate.arity:
            raise ValueError(
                f"{self.predicate.name} expects {self.predicate.arity} args, "
                f"got {len(self.args)}"
            )
        for arg, expected in zip(self.args, self.predicate.arg_types):
            if arg.type != expected:
                raise ValueError(
                    f"{self.predicate.name}: argument {arg.name} has type "
                    f"{arg.type}, expected {expected}"
                )

    @property
    def is_ground(self) -> bool:
        return all(isinstance(a, ObjectRef) for a in self.args)

    def variables(self) -> tuple[Variable, ...]:
        return tuple(a for a in self.args if isinstance(a, Variable))

    def __str__(self) -> str:
        return f"{self.predicate.name}({','.join(a.name for a in self.args)})"


SymbolicState: TypeAlias = frozenset[Atom]

Substitution: TypeAlias = Mapping[Term, Term]


def atom_sort_key(atom: Atom) -> tuple:
    """Canonical ordering key: predicate name, then argument names."""
    return (atom.predicate.name, len(atom.args), tuple(a.name for a in atom.args))


def sorted_atoms(atoms: Iterable[Atom]) -> list[Atom]:
    return sorted(atoms, key=atom_sort_key)


@dataclass(frozen=True)
class EffectSet:
    """Add and delete atom sets; the two halves are disjoint by construction."""

    add: frozenset[Atom]
    delete: frozenset[Atom]

    def __post_init__(self) -> None:
        overlap = self.add & self.delete
        if overlap:
            raise ValueError(f"add/delete overlap: {sorted_atoms(overlap)}")

    @property
    def is_empty(self) -> bool:
        return not self.add and not self.delete

    def atoms(self) -> frozenset[Atom]:
        return self.add | self.delete

    def objects(self) -> set[ObjectRef]:
        return {a for atom in self.atoms() for a in atom.args if isinstance(a, ObjectRef)}

    def variables(self) -> set[Variable]:
        return {a for atom in self.atoms() for a in atom.args if isinstance(a, Variable)}

    def __str__(self) -> str:
        parts = [str(a) for a in sorted_atoms(self.add)]
        parts += [f"not-{a}" for a in sorted_atoms(self.delete)]
        return "{" + ", ".join(parts) + "}"


EMPTY_EFFECTS = EffectSet(frozenset(), frozenset())


def ground_effects(s: SymbolicState, s_next: SymbolicState) -> EffectSet:
    """Effects observed across one symbolic transition, via two set differences."""
    return EffectSet(add=frozenset(s_next - s), delete=frozenset(s - s_next))


def apply_substitution(atoms: Iterable[Atom], sub: Substitution) -> frozenset[Atom]:
    """Replace atom arguments per ``sub``; unmapped objects pass through.

    Raises UnboundVariable if an atom contains a variable with no image.
    """
    out = set()
    for atom in atoms:
        new_args = []
        for arg in atom.args:
            image = sub.get(arg)
            if image is None:
                if isinstance(arg, Variable):
                    raise UnboundVariable(f"no binding for {arg.name} in {atom}")
                image = arg
            new_args.append(image)
        out.add(Atom(atom.predicate, tuple(new_args)))
    return frozenset(out)


def substitute_effects(effects: EffectSet, sub: Substitution) -> EffectSet:
    return EffectSet(
        add=apply_substitution(effects.add, sub),
        delete=apply_substitution(effects.delete, sub),
    )


def apply_effects(s: SymbolicState, effects: EffectSet) -> SymbolicState:
    return frozenset((s - effects.delete) | effects.add)


# ---------------------------------------------------------------------------
# Unification of ground effect sets.
# ---------------------------------------------------------------------------


def _signature(effects: EffectSet):
    sig: dict[tuple[bool, str], int] = {}
    for atom in effects.add:
        key = (True, atom.predicate.name)
        sig[key] = sig.get(key, 0) + 1
    for atom in effects.delete:
        key = (False, atom.predicate.name)
        sig[key] = sig.get(key, 0) + 1
    return sig


def unify(
    e1: EffectSet,
    e2: EffectSet,
    seed: Optional[Mapping[ObjectRef, ObjectRef]] = None,
) -> Optional[dict[ObjectRef, ObjectRef]]:
    """Find a type-preserving bijection on objects mapping ``e1`` onto ``e2``.

    Add atoms must map to add atoms and deletes to deletes. ``seed`` pins
    required pairs (used to anchor controller arguments); the result extends
    it. Returns None when no bijection exists. Mismatched predicate-count
    signatures reject in linear time; otherwise a small backtracking search
    runs over same-predicate candidates, most-constrained atoms first.
    """
    if _signature(e1) != _signature(e2):
        return None

    forward: dict[ObjectRef, ObjectRef] = {}
    backward: dict[ObjectRef, ObjectRef] = {}
    if seed:
        for src, dst in seed.items():
            if src.type != dst.type:
                return None
            if forward.get(src, dst) != dst or backward.get(dst, src) != src:
                return None
            forward[src] = dst
            backward[dst] = src

    # Group candidate targets by polarity + predicate.
    pool: dict[tuple[bool, str], list[Atom]] = {}
    for atom in e2.add:
        pool.setdefault((True, atom.predicate.name), []).append(atom)
    for atom in e2.delete:
        pool.setdefault((False, atom.predicate.name), []).append(atom)
    for atoms in pool.values():
        atoms.sort(key=atom_sort_key)

    todo = [(True, a) for a in sorted_atoms(e1.add)]
    todo += [(False, a) for a in sorted_atoms(e1.delete)]
    # Higher-arity atoms constrain the mapping more; try them first.
    todo.sort(key=lambda pa: (-len(pa[1].args), atom_sort_key(pa[1])))

    def extend(i: int, used: set[int]) -> bool:
        if i == len(todo):
            return True
        polarity, atom = todo[i]
        for j, cand in enumerate(pool[(polarity, atom.predicate.name)]):
            key = (polarity, atom.predicate.name, j)
            if key in used:
                continue
            added: list[ObjectRef] = []
            ok = True
            for src, dst in zip(atom.args, cand.args):
                assert isinstance(src, ObjectRef) and isinstance(dst, ObjectRef)
                if forward.get(src, dst) != dst or backward.get(dst, src) != src:
                    ok = False
                    break
                if src not in forward:
                    forward[src] = dst
                    backward[dst] = src
                    added.append(src)
            if ok:
                used.add(key)
                if extend(i + 1, used):
                    return True
                used.discard(key)
            for src in added:
                backward.pop(forward.pop(src))
        return False

    if not extend(0, set()):
        return None
    return dict(forward)


def invert_bijection(sub: Mapping[Term, Term]) -> dict[Term, Term]:
    inv = {v: k for k, v in sub.items()}
    if len(inv) != len(sub):
        raise ValueError("substitution is not injective")
    return inv


# ---------------------------------------------------------------------------
# Canonical variable naming for lifted forms.
# ---------------------------------------------------------------------------


def canonical_variable(index: int, type_name: str) -> Variable:
    """Lifting placeholders are named ?x0, ?x1, ... in first-appearance order."""
    return Variable(f"?x{index}", type_name)


@dataclass
class VariableAllocator:
    """Assigns canonical variables to objects in first-appearance order."""

    mapping: dict[ObjectRef, Variable] = field(default_factory=dict)

    def get(self, obj: ObjectRef) -> Variable:
        var = self.mapping.get(obj)
        if var is None:
            var = canonical_variable(len(self.mapping), obj.type)
            self.mapping[obj] = var
        return var

    def lift_atoms(self, atoms: Iterable[Atom]) -> frozenset[Atom]:
        lifted = set()
        for atom in sorted_atoms(atoms):
            lifted.add(
                Atom(atom.predicate, tuple(self.get(a) for a in atom.args))  # type: ignore[arg-type]
            )
        return frozenset(lifted)

    def lift_effects(self, effects: EffectSet) -> EffectSet:
        # Deterministic variable numbering: walk adds before deletes, sorted.
        for atom in sorted_atoms(effects.add):
            for a in atom.args:
                self.get(a)  # type: ignore[arg-type]
        for atom in sorted_atoms(effects.delete):
            for a in atom.args:
                self.get(a)  # type: ignore[arg-type]
        return EffectSet(
            add=self.lift_atoms(effects.add), delete=self.lift_atoms(effects.delete)
        )


# ---------------------------------------------------------------------------
# Text round-trip for atoms: Pred(a,b), zero-arity Pred(), negation "not-".
# ---------------------------------------------------------------------------


def format_atom(atom: Atom) -> str:
    return str(atom)


def format_literal(atom: Atom, negated: bool) -> str:
    return f"not-{atom}" if negated else str(atom)


def parse_term(name: str, type_name: str) -> Term:
    if name.startswith("?"):
        return Variable(name, type_name)
    return ObjectRef(name, type_name)


def parse_atom(text: str, predicates: Mapping[str, Predicate]) -> Atom:
    """Parse ``Pred(arg1,arg2)``; argument types come from the predicate."""
    text = text.strip()
    if not text.endswith(")") or "(" not in text:
        raise FileFormatError(f"malformed atom: {text!r}")
    name, _, rest = text.partition("(")
    name = name.strip()
    if name not in predicates:
        raise FileFormatError(f"unknown predicate in atom: {text!r}")
    pred = predicates[name]
    body = rest[:-1].strip()
    arg_names = [a.strip() for a in body.split(",")] if body else []
    if len(arg_names) != pred.arity:
        raise FileFormatError(f"arity mismatch in atom: {text!r}")
    args = tuple(parse_term(a, t) for a, t in zip(arg_names, pred.arg_types))
    return Atom(pred, args)


def parse_literal(
    text: str, predicates: Mapping[str, Predicate]
) -> tuple[Atom, bool]:
    text = text.strip()
    if text.startswith("not-"):
        return parse_atom(text[len("not-"):], predicates), True
    return parse_atom(text, predicates), False
