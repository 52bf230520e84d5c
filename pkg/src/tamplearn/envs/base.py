"""Environment abstractions: low-level states, problems, and the Domain API.

A domain bundles a deterministic simulator over low-level states, a parser
from low-level to symbolic states, per-controller samplers for continuous
arguments, a random problem generator, and hand-written reference operators.
Domains are immutable; all randomness comes from caller-supplied generators.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ..errors import OracleFailure
from ..operators import ControllerSpec, DeterministicOperator
from ..symbols import Atom, ObjectRef, Predicate, SymbolicState

Vec = tuple[float, ...]


def _freeze_attrs(
    attrs: Mapping[ObjectRef, Mapping[str, Sequence[float]]]
) -> dict[ObjectRef, dict[str, Vec]]:
    return {
        obj: {name: tuple(float(v) for v in vec) for name, vec in sorted(over.items())}
        for obj, over in sorted(attrs.items())
    }


@dataclass(frozen=True)
class LowLevelState:
    """Mapping from objects to named real-vector attributes, plus globals."""

    attrs: Mapping[ObjectRef, Mapping[str, Vec]]
    globals_: Mapping[str, Vec]

    @classmethod
    def build(
        cls,
        attrs: Mapping[ObjectRef, Mapping[str, Sequence[float]]],
        globals_: Optional[Mapping[str, Sequence[float]]] = None,
    ) -> "LowLevelState":
        frozen_globals = {
            name: tuple(float(v) for v in vec) for name, vec in sorted((globals_ or {}).items())
        }
        return cls(attrs=_freeze_attrs(attrs), globals_=frozen_globals)

    @property
    def objects(self) -> tuple[ObjectRef, ...]:
        return tuple(sorted(self.attrs))

    def vec(self, obj: ObjectRef, name: str) -> Vec:
        return self.attrs[obj][name]

    def scalar(self, obj: ObjectRef, name: str) -> float:
        (value,) = self.attrs[obj][name]
        return value

    def global_scalar(self, name: str) -> float:
        (value,) = self.globals_[name]
        return value

    def set(self, obj: ObjectRef, **updates: Sequence[float] | float) -> "LowLevelState":
        new_attrs = {o: dict(over) for o, over in self.attrs.items()}
        for name, value in updates.items():
            vec = (float(value),) if isinstance(value, (int, float)) else tuple(
                float(v) for v in value
            )
            new_attrs[obj][name] = vec
        return LowLevelState.build(new_attrs, self.globals_)

    def set_global(self, name: str, value: Sequence[float] | float) -> "LowLevelState":
        vec = (float(value),) if isinstance(value, (int, float)) else tuple(
            float(v) for v in value
        )
        new_globals = dict(self.globals_)
        new_globals[name] = vec
        return LowLevelState.build(self.attrs, new_globals)


@dataclass(frozen=True)
class Problem:
    """A planning problem: objects, an initial low-level state, a goal."""

    objects: frozenset[ObjectRef]
    x0: LowLevelState
    goal: frozenset[Atom]

    def __post_init__(self) -> None:
        for atom in self.goal:
            for arg in atom.args:
                if arg not in self.objects:
                    raise ValueError(f"goal atom {atom} references unknown object")


class Domain(ABC):
    """Immutable environment definition; see module docstring."""

    name: str

    @property
    @abstractmethod
    def types(self) -> tuple[str, ...]: ...

    @property
    @abstractmethod
    def predicates(self) -> Mapping[str, Predicate]: ...

    @property
    @abstractmethod
    def controllers(self) -> Mapping[str, ControllerSpec]: ...

    @property
    @abstractmethod
    def goal_predicates(self) -> frozenset[str]:
        """Predicates that may appear in goals; never withheld by ablation."""

    @abstractmethod
    def simulate(self, x: LowLevelState, a) -> LowLevelState:
        """Deterministic one-step dynamics; infeasible actions are no-ops."""

    @abstractmethod
    def parse(self, x: LowLevelState) -> SymbolicState:
        """Ground atoms whose classifiers hold in ``x``."""

    @abstractmethod
    def sample_continuous(
        self,
        controller: ControllerSpec,
        x: LowLevelState,
        discrete_args: Sequence[ObjectRef],
        rng: np.random.Generator,
    ) -> Vec: ...

    @abstractmethod
    def generate_problem(
        self, size_params: Mapping[str, float], rng: np.random.Generator
    ) -> Problem: ...

    @abstractmethod
    def oracle_operators(self) -> tuple[DeterministicOperator, ...]:
        """Hand-written reference operators (demonstration ground truth)."""

    @property
    @abstractmethod
    def train_size_params(self) -> Mapping[str, float]: ...

    @property
    @abstractmethod
    def eval_size_params(self) -> Mapping[str, float]: ...

    # Shared conveniences -------------------------------------------------

    def objects_of_type(self, x: LowLevelState, type_name: str) -> list[ObjectRef]:
        return [o for o in x.objects if o.type == type_name]

    def goal_achieved(self, x: LowLevelState, goal: Iterable[Atom]) -> bool:
        return set(goal) <= self.parse(x)


class AblatedDomain(Domain):
    """A domain with some predicates withheld from parsing.

    Used to study learning with an incomplete predicate vocabulary. Goal
    predicates are never withheld (problems must remain expressible).
    Reference operators are unavailable because they mention the full
    vocabulary.
    """

    def __init__(self, base: Domain, withheld: Iterable[str]):
        withheld = frozenset(withheld)
        unknown = withheld - set(base.predicates)
        if unknown:
            raise ValueError(f"cannot withhold unknown predicates: {sorted(unknown)}")
        clash = withheld & base.goal_predicates
        if clash:
            raise ValueError(f"cannot withhold goal predicates: {sorted(clash)}")
        self._base = base
        self._withheld = withheld
        self.name = base.name

    @property
    def base(self) -> Domain:
        return self._base

    @property
    def withheld(self) -> frozenset[str]:
        return self._withheld

    @property
    def types(self) -> tuple[str, ...]:
        return self._base.types

    @property
    def predicates(self) -> Mapping[str, Predicate]:
        return {
            name: p for name, p in self._base.predicates.items()
            if name not in self._withheld
        }

    @property
    def controllers(self) -> Mapping[str, ControllerSpec]:
        return self._base.controllers

    @property
    def goal_predicates(self) -> frozenset[str]:
        return self._base.goal_predicates

    def simulate(self, x, a):
        return self._base.simulate(x, a)

    def parse(self, x) -> SymbolicState:
        return frozenset(
            atom for atom in self._base.parse(x)
            if atom.predicate.name not in self._withheld
        )

    def sample_continuous(self, controller, x, discrete_args, rng):
        return self._base.sample_continuous(controller, x, discrete_args, rng)

    def generate_problem(self, size_params, rng):
        return self._base.generate_problem(size_params, rng)

    def oracle_operators(self):
        raise OracleFailure("reference operators unavailable under ablation")

    @property
    def train_size_params(self):
        return self._base.train_size_params

    @property
    def eval_size_params(self):
        return self._base.eval_size_params
