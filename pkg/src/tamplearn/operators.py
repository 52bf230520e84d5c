"""Controllers, actions, and symbolic operators (probabilistic and deterministic).

Operators pair a controller with lifted preconditions and effects. A
probabilistic operator carries one or more (effect set, probability)
outcomes as produced by learning; a deterministic operator carries a single
effect set and is what the planner grounds. Both serialize to a line-based
text format that round-trips through :func:`parse_operators`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .errors import FileFormatError, MalformedAction
from .symbols import (
    Atom,
    EffectSet,
    ObjectRef,
    Predicate,
    Variable,
    format_literal,
    parse_atom,
    parse_literal,
    sorted_atoms,
)


@dataclass(frozen=True)
class ControllerSpec:
    """A hybrid controller: name, discrete parameter types, continuous arity."""

    name: str
    discrete_params: tuple[str, ...]
    continuous_dim: int

    def __post_init__(self) -> None:
        if self.continuous_dim < 0:
            raise ValueError("continuous_dim must be non-negative")

    def __str__(self) -> str:
        args = ",".join(self.discrete_params)
        return f"{self.name}({args})/{self.continuous_dim}"


@dataclass(frozen=True)
class Action:
    """A controller instantiated with discrete objects and continuous args."""

    controller: ControllerSpec
    discrete_args: tuple[ObjectRef, ...]
    continuous_args: tuple[float, ...]

    def __post_init__(self) -> None:
        spec = self.controller
        if len(self.discrete_args) != len(spec.discrete_params):
            raise MalformedAction(
                f"{spec.name}: expected {len(spec.discrete_params)} discrete args, "
                f"got {len(self.discrete_args)}"
            )
        for obj, want in zip(self.discrete_args, spec.discrete_params):
            if obj.type != want:
                raise MalformedAction(
                    f"{spec.name}: argument {obj.name} has type {obj.type}, expected {want}"
                )
        if len(self.continuous_args) != spec.continuous_dim:
            raise MalformedAction(
                f"{spec.name}: expected {spec.continuous_dim} continuous args, "
                f"got {len(self.continuous_args)}"
            )

    def __str__(self) -> str:
        discrete = ",".join(o.name for o in self.discrete_args)
        cont = ",".join(f"{v:.4g}" for v in self.continuous_args)
        return f"{self.controller.name}({discrete})[{cont}]"


@dataclass(frozen=True)
class ActionTemplate:
    """An action with its continuous slot still unassigned."""

    controller: ControllerSpec
    discrete_args: tuple[ObjectRef, ...]

    def __post_init__(self) -> None:
        spec = self.controller
        if len(self.discrete_args) != len(spec.discrete_params):
            raise MalformedAction(
                f"{spec.name}: expected {len(spec.discrete_params)} discrete args"
            )
        for obj, want in zip(self.discrete_args, spec.discrete_params):
            if obj.type != want:
                raise MalformedAction(
                    f"{spec.name}: argument {obj.name} has type {obj.type}, expected {want}"
                )

    def bind(self, continuous_args: Sequence[float]) -> Action:
        return Action(self.controller, self.discrete_args, tuple(continuous_args))

    def __str__(self) -> str:
        return f"{self.controller.name}({','.join(o.name for o in self.discrete_args)})"


def _check_params(
    params: Sequence[Variable],
    controller: ControllerSpec,
    atoms: Iterable[Atom],
    label: str,
) -> None:
    if len(params) != len(set(params)):
        raise ValueError(f"{label}: duplicate parameters")
    if len(params) < len(controller.discrete_params):
        raise ValueError(f"{label}: params must cover controller discrete args")
    for var, want in zip(params, controller.discrete_params):
        if var.type != want:
            raise ValueError(
                f"{label}: leading param {var.name} has type {var.type}, expected {want}"
            )
    housed = set(params)
    for atom in atoms:
        for arg in atom.args:
            if isinstance(arg, Variable) and arg not in housed:
                raise ValueError(f"{label}: variable {arg.name} not in params")
            if isinstance(arg, ObjectRef):
                raise ValueError(f"{label}: ground argument {arg.name} in lifted operator")


@dataclass(frozen=True)
class ProbabilisticOperator:
    """Lifted operator with probabilistic outcomes, as produced by learning.

    The leading params correspond positionally to the controller's discrete
    arguments. Outcome probabilities are count ratios and need not sum to 1.
    """

    name: str
    controller: ControllerSpec
    params: tuple[Variable, ...]
    preconditions: frozenset[Atom]
    outcomes: tuple[tuple[EffectSet, float], ...]

    def __post_init__(self) -> None:
        all_atoms = list(self.preconditions)
        for effects, prob in self.outcomes:
            if not 0.0 < prob <= 1.0:
                raise ValueError(f"{self.name}: outcome probability {prob} not in (0,1]")
            all_atoms.extend(effects.atoms())
        _check_params(self.params, self.controller, all_atoms, self.name)

    def __str__(self) -> str:
        lines = [f"{self.name}({', '.join(f'{v.name}:{v.type}' for v in self.params)})"]
        lines.append("  pre: " + ", ".join(str(a) for a in sorted_atoms(self.preconditions)))
        for effects, prob in self.outcomes:
            lines.append(f"  {prob:.3f}: {effects}")
        return "\n".join(lines)


@dataclass(frozen=True)
class DeterministicOperator:
    """Single-outcome lifted operator; the unit the planner grounds."""

    name: str
    controller: ControllerSpec
    params: tuple[Variable, ...]
    preconditions: frozenset[Atom]
    effects: EffectSet

    def __post_init__(self) -> None:
        atoms = list(self.preconditions) + list(self.effects.atoms())
        _check_params(self.params, self.controller, atoms, self.name)

    def __str__(self) -> str:
        pre = ", ".join(str(a) for a in sorted_atoms(self.preconditions))
        params = ", ".join(f"{v.name}:{v.type}" for v in self.params)
        return f"{self.name}({params})  pre: {pre}  eff: {self.effects}"


def operator_sort_key(op: ProbabilisticOperator | DeterministicOperator) -> tuple:
    return (op.controller.name, op.name)


# ---------------------------------------------------------------------------
# Native text serialization. Line-based, one operator block per operator:
#
#   operator Pick
#     controller Pick
#     params ?x0:block ?x1:target
#     pre HandEmpty(), IsBlock(?x0)
#     outcome 0.5 Holding(?x0), not-HandEmpty()
#     outcome 0.5 ...
#   end
#
# Deterministic operators use a single "effects" line in place of "outcome"
# lines. Probabilities are written with repr() so parsing is exact.
# ---------------------------------------------------------------------------

HEADER = "# operators v1"


def _format_literals(effects: EffectSet) -> str:
    parts = [format_literal(a, negated=False) for a in sorted_atoms(effects.add)]
    parts += [format_literal(a, negated=True) for a in sorted_atoms(effects.delete)]
    return ", ".join(parts)


def _parse_literals(text: str, predicates: Mapping) -> EffectSet:
    add, delete = set(), set()
    text = text.strip()
    if text:
        for chunk in _split_atoms(text):
            atom, negated = parse_literal(chunk, predicates)
            (delete if negated else add).add(atom)
    return EffectSet(add=frozenset(add), delete=frozenset(delete))


def _split_atoms(text: str) -> list[str]:
    # Split on commas at paren depth zero: "On(?a,?b), Clear(?a)".
    out, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            out.append(text[start:i].strip())
            start = i + 1
    tail = text[start:].strip()
    if tail:
        out.append(tail)
    return out


def format_operators(
    ops: Iterable[ProbabilisticOperator | DeterministicOperator],
) -> str:
    lines = [HEADER]
    for op in sorted(ops, key=operator_sort_key):
        lines.append(f"operator {op.name}")
        lines.append(f"  controller {op.controller.name}")
        params = " ".join(f"{v.name}:{v.type}" for v in op.params)
        lines.append(f"  params {params}".rstrip())
        pre = ", ".join(str(a) for a in sorted_atoms(op.preconditions))
        lines.append(f"  pre {pre}".rstrip())
        if isinstance(op, ProbabilisticOperator):
            for effects, prob in op.outcomes:
                lines.append(f"  outcome {prob!r} {_format_literals(effects)}".rstrip())
        else:
            lines.append(f"  effects {_format_literals(op.effects)}".rstrip())
        lines.append("end")
    return "\n".join(lines) + "\n"


def parse_operators(
    text: str,
    predicates: Mapping[str, Predicate],
    controllers: Mapping[str, ControllerSpec],
) -> list[ProbabilisticOperator | DeterministicOperator]:
    """Parse the native operator format; inverse of :func:`format_operators`."""
    lines = [ln.rstrip() for ln in text.splitlines()]
    if not lines or lines[0].strip() != HEADER:
        raise FileFormatError("missing operator file header")
    ops: list[ProbabilisticOperator | DeterministicOperator] = []
    i = 1
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line or line.startswith("#"):
            continue
        if not line.startswith("operator "):
            raise FileFormatError(f"expected 'operator', got {line!r}")
        name = line.split(None, 1)[1]
        controller: Optional[ControllerSpec] = None
        params: list[Variable] = []
        pre: frozenset[Atom] = frozenset()
        outcomes: list[tuple[EffectSet, float]] = []
        effects: Optional[EffectSet] = None
        while i < len(lines):
            line = lines[i].strip()
            i += 1
            if line == "end":
                break
            key, _, rest = line.partition(" ")
            if key == "controller":
                if rest not in controllers:
                    raise FileFormatError(f"unknown controller {rest!r}")
                controller = controllers[rest]
            elif key == "params":
                for tok in rest.split():
                    vname, _, vtype = tok.partition(":")
                    if not vname.startswith("?") or not vtype:
                        raise FileFormatError(f"bad param token {tok!r}")
                    params.append(Variable(vname, vtype))
            elif key == "pre":
                pre = frozenset(
                    parse_atom(chunk, predicates) for chunk in _split_atoms(rest)
                )
            elif key == "outcome":
                prob_text, _, lits = rest.partition(" ")
                outcomes.append((_parse_literals(lits, predicates), float(prob_text)))
            elif key == "effects":
                effects = _parse_literals(rest, predicates)
            else:
                raise FileFormatError(f"unknown operator field {key!r}")
        else:
            raise FileFormatError(f"operator {name} missing 'end'")
        if controller is None:
            raise FileFormatError(f"operator {name} missing controller")
        if effects is not None and outcomes:
            raise FileFormatError(f"operator {name} mixes outcome and effects lines")
        if effects is not None:
            ops.append(
                DeterministicOperator(name, controller, tuple(params), pre, effects)
            )
        else:
            ops.append(
                ProbabilisticOperator(
                    name, controller, tuple(params), pre, tuple(outcomes)
                )
            )
    return ops
