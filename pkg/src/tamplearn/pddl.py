"""PDDL export of determinized operators, plus a PPDDL-style probabilistic form.

The default export is typed (``:parameters (?x0 - block)``). With
``strict=True`` the output downgrades to untyped STRIPS: each type becomes a
unary predicate that is declared, added to every action's preconditions for
its parameters, and asserted in ``:init`` for every object. Both modes are
plain s-expressions and both have parsers here; parsing an export returns
operators equal to the originals up to variable renaming (exports reuse the
operators' own variable names, so in practice equality is literal).

Probabilities in the PPDDL-style form are written with ``repr`` and parsed
with ``float``, so they survive a round trip exactly. Outcome probabilities
are count ratios from learning and need not sum to one; the output is
PPDDL-*style*, not validated PPDDL.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

from .envs.base import Domain, Problem
from .errors import FileFormatError, UnknownPredicate
from .operators import (
    ControllerSpec,
    DeterministicOperator,
    ProbabilisticOperator,
    operator_sort_key,
)
from .symbols import Atom, EffectSet, ObjectRef, Predicate, Variable, sorted_atoms

_Sexp = Union[str, list]


# ---------------------------------------------------------------------------
# Formatting helpers
# ---------------------------------------------------------------------------


def _check_predicate(pred: Predicate, predicates: Mapping[str, Predicate]) -> None:
    known = predicates.get(pred.name)
    if known is None:
        raise UnknownPredicate(f"predicate {pred.name!r} is not declared in the domain")
    if known != pred:
        raise UnknownPredicate(
            f"predicate {pred.name!r} does not match the domain declaration"
        )


def _check_atoms(atoms: Iterable[Atom], predicates: Mapping[str, Predicate]) -> None:
    for atom in atoms:
        _check_predicate(atom.predicate, predicates)


def _format_atom(atom: Atom) -> str:
    if not atom.args:
        return f"({atom.predicate.name})"
    args = " ".join(arg.name for arg in atom.args)
    return f"({atom.predicate.name} {args})"


def _format_conjunction(atoms: Iterable[Atom], extra: Sequence[str] = ()) -> str:
    parts = list(extra) + [_format_atom(a) for a in sorted_atoms(atoms)]
    return "(and " + " ".join(parts) + ")" if parts else "(and)"


def _format_effects(effects: EffectSet) -> str:
    parts = [_format_atom(a) for a in sorted_atoms(effects.add)]
    parts += [f"(not {_format_atom(a)})" for a in sorted_atoms(effects.delete)]
    return "(and " + " ".join(parts) + ")" if parts else "(and)"


def _format_typed_list(named: Sequence[tuple[str, str]]) -> str:
    """``[(name, type), ...]`` as a PDDL typed list, grouping runs of one type."""
    parts: list[str] = []
    run: list[str] = []
    run_type = None
    for name, type_ in named:
        if type_ != run_type and run:
            parts.extend(run + ["-", run_type])
            run = []
        run.append(name)
        run_type = type_
    if run:
        parts.extend(run + ["-", run_type])
    return " ".join(parts)


def _predicate_decl(pred: Predicate, strict: bool) -> str:
    if not pred.arg_types:
        return f"({pred.name})"
    if strict:
        args = " ".join(f"?x{i}" for i in range(len(pred.arg_types)))
        return f"({pred.name} {args})"
    typed = _format_typed_list(
        [(f"?x{i}", t) for i, t in enumerate(pred.arg_types)]
    )
    return f"({pred.name} {typed})"


def _collect_types(
    operators: Sequence[DeterministicOperator | ProbabilisticOperator],
    predicates: Mapping[str, Predicate],
    objects: Iterable[ObjectRef] = (),
) -> list[str]:
    types = {t for pred in predicates.values() for t in pred.arg_types}
    for op in operators:
        types.update(v.type for v in op.params)
    types.update(o.type for o in objects)
    return sorted(types)


def _action_block(
    op: DeterministicOperator,
    predicates: Mapping[str, Predicate],
    strict: bool,
) -> list[str]:
    _check_atoms(op.preconditions, predicates)
    _check_atoms(op.effects.atoms(), predicates)
    if strict:
        params = " ".join(v.name for v in op.params)
        type_atoms = [f"({v.type} {v.name})" for v in op.params]
    else:
        params = _format_typed_list([(v.name, v.type) for v in op.params])
        type_atoms = []
    return [
        f"  ; controller {op.controller.name}",
        f"  (:action {op.name}",
        f"    :parameters ({params})",
        f"    :precondition {_format_conjunction(op.preconditions, type_atoms)}",
        f"    :effect {_format_effects(op.effects)})",
    ]


def export_pddl_domain(
    operators: Sequence[DeterministicOperator],
    predicates: Mapping[str, Predicate],
    domain_name: str,
    strict: bool = False,
) -> str:
    reqs = ":strips" if strict else ":strips :typing"
    lines = [f"(define (domain {domain_name})", f"  (:requirements {reqs})"]
    types = _collect_types(operators, predicates)
    if not strict and types:
        lines.append(f"  (:types {' '.join(types)})")
    decls = [_predicate_decl(predicates[name], strict) for name in sorted(predicates)]
    if strict:
        decls += [f"({t} ?x0)" for t in types]
    lines.append(f"  (:predicates {' '.join(decls)})")
    for op in sorted(operators, key=operator_sort_key):
        lines.extend(_action_block(op, predicates, strict))
    lines.append(")")
    return "\n".join(lines) + "\n"


def export_pddl_problem(
    problem: Problem,
    init: Iterable[Atom],
    predicates: Mapping[str, Predicate],
    domain_name: str,
    problem_name: str = "problem0",
    strict: bool = False,
) -> str:
    init = sorted_atoms(init)
    _check_atoms(init, predicates)
    _check_atoms(problem.goal, predicates)
    objects = sorted(problem.objects, key=lambda o: (o.type, o.name))
    if strict:
        object_decl = " ".join(o.name for o in objects)
        init_parts = [f"({o.type} {o.name})" for o in objects]
    else:
        object_decl = _format_typed_list([(o.name, o.type) for o in objects])
        init_parts = []
    init_parts += [_format_atom(a) for a in init]
    lines = [
        f"(define (problem {problem_name})",
        f"  (:domain {domain_name})",
        f"  (:objects {object_decl})",
        f"  (:init {' '.join(init_parts)})",
        f"  (:goal {_format_conjunction(problem.goal)}))",
    ]
    return "\n".join(lines) + "\n"


def export_pddl(
    operators: Sequence[DeterministicOperator],
    domain: Domain,
    problem: Problem,
    strict: bool = False,
) -> tuple[str, str]:
    """Domain and problem files for ``operators`` and ``problem``.

    ``:init`` is the symbolic parse of the problem's initial low-level state
    under ``domain``, so an ablated domain exports an ablated init.
    """
    domain_text = export_pddl_domain(operators, domain.predicates, domain.name, strict)
    problem_text = export_pddl_problem(
        problem, domain.parse(problem.x0), domain.predicates, domain.name, strict=strict
    )
    return domain_text, problem_text


def format_ppddl(
    operators: Sequence[ProbabilisticOperator],
    predicates: Mapping[str, Predicate],
    domain_name: str,
) -> str:
    """PPDDL-style domain text with ``(probabilistic ...)`` effects."""
    lines = [
        f"(define (domain {domain_name})",
        "  (:requirements :strips :typing :probabilistic-effects)",
    ]
    types = _collect_types(operators, predicates)
    if types:
        lines.append(f"  (:types {' '.join(types)})")
    decls = [_predicate_decl(predicates[name], False) for name in sorted(predicates)]
    lines.append(f"  (:predicates {' '.join(decls)})")
    for op in sorted(operators, key=operator_sort_key):
        _check_atoms(op.preconditions, predicates)
        for effects, _ in op.outcomes:
            _check_atoms(effects.atoms(), predicates)
        params = _format_typed_list([(v.name, v.type) for v in op.params])
        outcomes = " ".join(
            f"{prob!r} {_format_effects(effects)}" for effects, prob in op.outcomes
        )
        lines += [
            f"  ; controller {op.controller.name}",
            f"  (:action {op.name}",
            f"    :parameters ({params})",
            f"    :precondition {_format_conjunction(op.preconditions)}",
            f"    :effect (probabilistic {outcomes}))",
        ]
    lines.append(")")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _tokenize(text: str) -> list[str]:
    out: list[str] = []
    for raw in text.splitlines():
        line = raw.split(";", 1)[0]
        out.extend(line.replace("(", " ( ").replace(")", " ) ").split())
    return out


def _read_sexp(tokens: list[str], pos: int) -> tuple[_Sexp, int]:
    if pos >= len(tokens):
        raise FileFormatError("unexpected end of input")
    tok = tokens[pos]
    if tok == "(":
        items: list[_Sexp] = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            item, pos = _read_sexp(tokens, pos)
            items.append(item)
        if pos >= len(tokens):
            raise FileFormatError("unbalanced parentheses")
        return items, pos + 1
    if tok == ")":
        raise FileFormatError("unexpected ')'")
    return tok, pos + 1


def _parse_sexp(text: str) -> _Sexp:
    tokens = _tokenize(text)
    sexp, pos = _read_sexp(tokens, 0)
    if pos != len(tokens):
        raise FileFormatError("trailing tokens after top-level form")
    return sexp


def _parse_typed_list(items: Sequence[str]) -> list[tuple[str, str]]:
    """Inverse of :func:`_format_typed_list`; untyped names get type ``''``."""
    out: list[tuple[str, str]] = []
    pending: list[str] = []
    i = 0
    while i < len(items):
        tok = items[i]
        if tok == "-":
            if i + 1 >= len(items) or not pending:
                raise FileFormatError("malformed typed list")
            out.extend((name, items[i + 1]) for name in pending)
            pending = []
            i += 2
        else:
            pending.append(tok)
            i += 1
    out.extend((name, "") for name in pending)
    return out


def _is_type_name(name: str, types: frozenset[str]) -> bool:
    return name in types


def _parse_atom_sexp(
    sexp: _Sexp,
    predicates: Mapping[str, Predicate],
    scope: Mapping[str, Variable | ObjectRef],
) -> Atom:
    if not isinstance(sexp, list) or not sexp or not isinstance(sexp[0], str):
        raise FileFormatError(f"expected atom, got {sexp!r}")
    head, *arg_names = sexp
    if head not in predicates:
        raise UnknownPredicate(f"predicate {head!r} is not declared in the domain")
    args = []
    for name in arg_names:
        if not isinstance(name, str) or name not in scope:
            raise FileFormatError(f"unknown term {name!r} in atom ({head} ...)")
        args.append(scope[name])
    return Atom(predicates[head], tuple(args))


def _parse_conjunction(sexp: _Sexp) -> list[_Sexp]:
    if isinstance(sexp, list) and sexp and sexp[0] == "and":
        return sexp[1:]
    return [sexp]


def _parse_effect_sexp(
    sexp: _Sexp,
    predicates: Mapping[str, Predicate],
    scope: Mapping[str, Variable | ObjectRef],
) -> EffectSet:
    add, delete = set(), set()
    for lit in _parse_conjunction(sexp):
        if isinstance(lit, list) and lit and lit[0] == "not":
            if len(lit) != 2:
                raise FileFormatError("malformed (not ...) effect")
            delete.add(_parse_atom_sexp(lit[1], predicates, scope))
        else:
            add.add(_parse_atom_sexp(lit, predicates, scope))
    return EffectSet(add=frozenset(add), delete=frozenset(delete))


def _controller_hints(text: str) -> dict[str, str]:
    """Map action name -> controller name from ``; controller X`` comments.

    PDDL has no slot for the operator/controller linkage, so the exporters
    write it as a comment immediately above each ``(:action ...)``.
    """
    pattern = re.compile(r";\s*controller\s+(\S+)\s*\n\s*\(:action\s+([^\s()]+)")
    return {action: ctrl for ctrl, action in pattern.findall(text)}


def _resolve_controller(
    name: str,
    controllers: Mapping[str, ControllerSpec],
    hint: str | None,
) -> ControllerSpec:
    if hint is not None:
        if hint not in controllers:
            raise FileFormatError(f"action {name!r}: unknown controller {hint!r}")
        return controllers[hint]
    # Without a hint, rely on the naming scheme for learned operators:
    # controller name plus a suffix (Pick0, PaintBox1); longest prefix wins.
    best = max(
        (c for c in controllers.values() if name.startswith(c.name)),
        key=lambda c: len(c.name),
        default=None,
    )
    if best is None:
        raise FileFormatError(f"action {name!r} does not match any controller")
    return best


def _parse_action(
    sexp: list,
    predicates: Mapping[str, Predicate],
    controllers: Mapping[str, ControllerSpec],
    types: frozenset[str],
    hints: Mapping[str, str],
) -> tuple[str, ControllerSpec, tuple[Variable, ...], frozenset[Atom], _Sexp]:
    fields: dict[str, _Sexp] = {}
    if len(sexp) < 2 or not isinstance(sexp[1], str):
        raise FileFormatError("(:action ...) missing a name")
    name = sexp[1]
    rest = sexp[2:]
    if len(rest) % 2:
        raise FileFormatError(f"action {name}: dangling keyword")
    for key, value in zip(rest[::2], rest[1::2]):
        fields[key] = value
    for key in (":parameters", ":precondition", ":effect"):
        if key not in fields:
            raise FileFormatError(f"action {name}: missing {key}")

    param_list = fields[":parameters"]
    if not isinstance(param_list, list):
        raise FileFormatError(f"action {name}: malformed :parameters")
    typed = _parse_typed_list(param_list)

    pre_sexps = _parse_conjunction(fields[":precondition"])
    # Untyped parameters (strict export) recover their types from the unary
    # type predicates in the precondition, which are then dropped.
    var_types = dict(typed)
    kept_pre: list[_Sexp] = []
    for lit in pre_sexps:
        if (
            isinstance(lit, list)
            and len(lit) == 2
            and isinstance(lit[0], str)
            and _is_type_name(lit[0], types)
        ):
            var_types[lit[1]] = lit[0]
        else:
            kept_pre.append(lit)
    params = []
    for var_name, _ in typed:
        type_ = var_types.get(var_name, "")
        if not type_:
            raise FileFormatError(f"action {name}: parameter {var_name} has no type")
        params.append(Variable(var_name, type_))
    scope = {v.name: v for v in params}
    pre = frozenset(_parse_atom_sexp(l, predicates, scope) for l in kept_pre)
    controller = _resolve_controller(name, controllers, hints.get(name))
    return name, controller, tuple(params), pre, fields[":effect"]


def _domain_sections(text: str, expect_domain: bool = True) -> tuple[str, list[list]]:
    sexp = _parse_sexp(text)
    if not isinstance(sexp, list) or not sexp or sexp[0] != "define":
        raise FileFormatError("expected (define ...)")
    head = sexp[1] if len(sexp) > 1 else None
    kind = "domain" if expect_domain else "problem"
    if not isinstance(head, list) or len(head) != 2 or head[0] != kind:
        raise FileFormatError(f"expected (define ({kind} <name>) ...)")
    return head[1], [s for s in sexp[2:] if isinstance(s, list)]


def _declared_types(sections: Sequence[list], predicates: Mapping[str, Predicate]) -> frozenset[str]:
    types = {t for pred in predicates.values() for t in pred.arg_types}
    for section in sections:
        if section and section[0] == ":types":
            types.update(t for t in section[1:] if isinstance(t, str) and t != "-")
    return frozenset(types)


def parse_pddl_domain(
    text: str,
    predicates: Mapping[str, Predicate],
    controllers: Mapping[str, ControllerSpec],
) -> list[DeterministicOperator]:
    """Inverse of :func:`export_pddl_domain`, for both typed and strict output."""
    _, sections = _domain_sections(text)
    types = _declared_types(sections, predicates)
    hints = _controller_hints(text)
    ops = []
    for section in sections:
        if not section or section[0] != ":action":
            continue
        name, controller, params, pre, eff_sexp = _parse_action(
            section, predicates, controllers, types, hints
        )
        scope = {v.name: v for v in params}
        effects = _parse_effect_sexp(eff_sexp, predicates, scope)
        ops.append(DeterministicOperator(name, controller, params, pre, effects))
    return ops


def parse_ppddl(
    text: str,
    predicates: Mapping[str, Predicate],
    controllers: Mapping[str, ControllerSpec],
) -> list[ProbabilisticOperator]:
    """Inverse of :func:`format_ppddl`."""
    _, sections = _domain_sections(text)
    types = _declared_types(sections, predicates)
    hints = _controller_hints(text)
    ops = []
    for section in sections:
        if not section or section[0] != ":action":
            continue
        name, controller, params, pre, eff_sexp = _parse_action(
            section, predicates, controllers, types, hints
        )
        scope = {v.name: v for v in params}
        if not isinstance(eff_sexp, list) or not eff_sexp or eff_sexp[0] != "probabilistic":
            raise FileFormatError(f"action {name}: expected (probabilistic ...) effect")
        body = eff_sexp[1:]
        if not body or len(body) % 2:
            raise FileFormatError(f"action {name}: malformed probabilistic effect")
        outcomes = []
        for prob_tok, outcome in zip(body[::2], body[1::2]):
            try:
                prob = float(prob_tok)
            except (TypeError, ValueError):
                raise FileFormatError(
                    f"action {name}: bad outcome probability {prob_tok!r}"
                ) from None
            outcomes.append((_parse_effect_sexp(outcome, predicates, scope), prob))
        ops.append(ProbabilisticOperator(name, controller, params, pre, tuple(outcomes)))
    return ops


@dataclass(frozen=True)
class PddlProblem:
    """Contents of a parsed problem file."""

    name: str
    domain_name: str
    objects: frozenset[ObjectRef]
    init: frozenset[Atom]
    goal: frozenset[Atom]


def parse_pddl_problem(text: str, predicates: Mapping[str, Predicate]) -> PddlProblem:
    """Inverse of :func:`export_pddl_problem`, for both typed and strict output."""
    name, sections = _domain_sections(text, expect_domain=False)
    fields = {s[0]: s for s in sections if s}
    for key in (":domain", ":objects", ":init", ":goal"):
        if key not in fields:
            raise FileFormatError(f"problem file missing {key}")
    domain_name = fields[":domain"][1]
    types = _declared_types(sections, predicates)

    typed = _parse_typed_list(fields[":objects"][1:])
    init_sexps = list(fields[":init"][1:])
    # Strict problems type their objects via unary init atoms.
    obj_types = dict(typed)
    kept_init: list[_Sexp] = []
    for lit in init_sexps:
        if (
            isinstance(lit, list)
            and len(lit) == 2
            and isinstance(lit[0], str)
            and _is_type_name(lit[0], types)
        ):
            obj_types[lit[1]] = lit[0]
        else:
            kept_init.append(lit)
    objects = []
    for obj_name, _ in typed:
        type_ = obj_types.get(obj_name, "")
        if not type_:
            raise FileFormatError(f"object {obj_name} has no type")
        objects.append(ObjectRef(obj_name, type_))
    scope = {o.name: o for o in objects}
    init = frozenset(_parse_atom_sexp(l, predicates, scope) for l in kept_init)
    goal_sexp = fields[":goal"]
    if len(goal_sexp) != 2:
        raise FileFormatError("malformed :goal")
    goal = frozenset(
        _parse_atom_sexp(l, predicates, scope)
        for l in _parse_conjunction(goal_sexp[1])
    )
    return PddlProblem(name, domain_name, frozenset(objects), init, goal)
