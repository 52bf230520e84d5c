"""Offline transition datasets: demonstrations, random negatives, subsampling.

A dataset is a flat sequence of low-level transitions ``(x, a, x_next, goal)``
tagged with provenance (``demo`` or ``negative``). States are stored at the
low level so a dataset can be re-parsed under a different predicate
vocabulary (e.g. an ablated domain) without recollection.

Serialization is line-based JSON with a versioned header. Floats are written
with ``repr`` semantics (Python's ``json`` does this by default), so a
save/load/save cycle is byte-identical and replaying ``simulate`` on loaded
data reproduces ``x_next`` exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterator, Optional, Sequence

import numpy as np

from .envs import Domain, LowLevelState, get_domain
from .envs.base import Problem
from .errors import FileFormatError, GenerationFailed, OracleFailure
from .learning import SymbolicTransition
from .operators import Action
from .planning import PlannerConfig, solve
from .symbols import Atom, ObjectRef

FORMAT_NAME = "tamplearn-dataset"
FORMAT_VERSION = 1

DEMO = "demo"
NEGATIVE = "negative"

_MAX_PROBLEM_ATTEMPTS = 25
_MAX_ACTION_ATTEMPTS = 100

# Demonstration collection runs the planner with the hand-written operators;
# training problems are small, so modest budgets suffice.
_DEMO_PLANNER = PlannerConfig(heuristic="hadd", max_nodes=100_000, max_skeletons=100)


@dataclass(frozen=True)
class Transition:
    """One low-level transition plus the goal of the problem it came from."""

    x: LowLevelState
    a: Action
    x_next: LowLevelState
    goal: frozenset[Atom]
    provenance: str


@dataclass(frozen=True)
class Dataset:
    domain: str
    seed: int
    transitions: tuple[Transition, ...]

    def __len__(self) -> int:
        return len(self.transitions)

    def __iter__(self) -> Iterator[Transition]:
        return iter(self.transitions)

    @property
    def n_demo(self) -> int:
        return sum(1 for t in self.transitions if t.provenance == DEMO)

    @property
    def n_negative(self) -> int:
        return sum(1 for t in self.transitions if t.provenance == NEGATIVE)


def _replay(domain: Domain, problem: Problem, plan: Sequence[Action]) -> list[Transition]:
    out = []
    x = problem.x0
    for action in plan:
        x_next = domain.simulate(x, action)
        out.append(Transition(x, action, x_next, problem.goal, DEMO))
        x = x_next
    return out


def collect_demonstrations(
    domain: Domain,
    n_problems: int,
    rng: np.random.Generator,
    seed: int = 0,
    config: Optional[PlannerConfig] = None,
) -> Dataset:
    """Solve ``n_problems`` training-scale problems with the oracle operators.

    A problem the oracle planner fails to solve is regenerated; repeated
    failure raises :class:`OracleFailure`.
    """
    config = config or _DEMO_PLANNER
    operators = domain.oracle_operators()
    transitions: list[Transition] = []
    for _ in range(n_problems):
        for _ in range(_MAX_PROBLEM_ATTEMPTS):
            problem = domain.generate_problem(domain.train_size_params, rng)
            plan, _ = solve(problem, operators, domain, config, rng)
            if plan is not None:
                transitions.extend(_replay(domain, problem, plan))
                break
        else:
            raise OracleFailure(
                f"{domain.name}: oracle planner failed on "
                f"{_MAX_PROBLEM_ATTEMPTS} consecutive training problems"
            )
    return Dataset(domain.name, seed, tuple(transitions))


def _random_action(
    domain: Domain, x: LowLevelState, rng: np.random.Generator
) -> Action:
    names = sorted(domain.controllers)
    for _ in range(_MAX_ACTION_ATTEMPTS):
        controller = domain.controllers[names[rng.integers(len(names))]]
        args = []
        for type_name in controller.discrete_params:
            pool = domain.objects_of_type(x, type_name)
            if not pool:
                break
            args.append(pool[rng.integers(len(pool))])
        else:
            theta = domain.sample_continuous(controller, x, tuple(args), rng)
            return Action(controller, tuple(args), tuple(theta))
    raise GenerationFailed("could not sample an action with typed arguments")


def collect_negatives(
    domain: Domain,
    demos: Dataset,
    k: int,
    rng: np.random.Generator,
) -> Dataset:
    """``k`` transitions from random actions in states the demos visited.

    Each draw picks a uniformly random endpoint of a demonstration
    transition, a uniformly random controller with typed discrete arguments,
    and a sampler draw for the continuous parameters; the simulator supplies
    the successor (infeasible actions are no-ops). The recorded goal is the
    source problem's.
    """
    pool = [(t.x, t.goal) for t in demos] + [(t.x_next, t.goal) for t in demos]
    if not pool:
        raise ValueError("cannot collect negatives without demonstrations")
    out = []
    for _ in range(k):
        x, goal = pool[rng.integers(len(pool))]
        action = _random_action(domain, x, rng)
        out.append(Transition(x, action, domain.simulate(x, action), goal, NEGATIVE))
    return Dataset(demos.domain, demos.seed, tuple(out))


def collect_dataset(
    domain: Domain,
    seed: int,
    n_problems: int = 20,
    k_negatives: int = 100,
    config: Optional[PlannerConfig] = None,
) -> Dataset:
    """Demonstrations followed by negatives, from one seeded stream."""
    rng = np.random.default_rng(seed)
    demos = collect_demonstrations(domain, n_problems, rng, seed, config)
    negatives = collect_negatives(domain, demos, k_negatives, rng)
    return Dataset(domain.name, seed, demos.transitions + negatives.transitions)


def subsample(dataset: Dataset, fraction: float, rng: np.random.Generator) -> Dataset:
    """⌈fraction·|D|⌉ transitions drawn without replacement, original order."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    n = math.ceil(fraction * len(dataset))
    keep = sorted(rng.choice(len(dataset), size=n, replace=False))
    return replace(dataset, transitions=tuple(dataset.transitions[i] for i in keep))


def symbolic_transitions(dataset: Dataset, domain: Domain) -> list[SymbolicTransition]:
    """Parse both endpoints of every transition under ``domain``."""
    return [
        SymbolicTransition(domain.parse(t.x), t.a, domain.parse(t.x_next))
        for t in dataset
    ]


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _state_obj(x: LowLevelState) -> dict:
    return {
        "objects": [
            [obj.name, obj.type, {k: list(vec) for k, vec in sorted(x.attrs[obj].items())}]
            for obj in x.objects
        ],
        "globals": {k: list(vec) for k, vec in sorted(x.globals_.items())},
    }


def _record(t: Transition) -> dict:
    return {
        "provenance": t.provenance,
        "x": _state_obj(t.x),
        "action": {
            "controller": t.a.controller.name,
            "objects": [o.name for o in t.a.discrete_args],
            "continuous": [float(v) for v in t.a.continuous_args],
        },
        "x_next": _state_obj(t.x_next),
        "goal": [
            [a.predicate.name, [arg.name for arg in a.args]]
            for a in sorted(t.goal, key=lambda a: (a.predicate.name, tuple(o.name for o in a.args)))
        ],
    }


def format_dataset(dataset: Dataset) -> str:
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "domain": dataset.domain,
        "seed": dataset.seed,
        "count": len(dataset),
    }
    lines = [json.dumps(header, sort_keys=True)]
    lines += [json.dumps(_record(t), sort_keys=True) for t in dataset]
    return "\n".join(lines) + "\n"


def _parse_state(obj: dict) -> LowLevelState:
    attrs = {
        ObjectRef(name, type_): {k: tuple(vec) for k, vec in feats.items()}
        for name, type_, feats in obj["objects"]
    }
    globals_ = {k: tuple(vec) for k, vec in obj["globals"].items()}
    return LowLevelState.build(attrs, globals_)


def parse_dataset(text: str, domain: Optional[Domain] = None) -> Dataset:
    lines = text.splitlines()
    if not lines:
        raise FileFormatError("empty dataset file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"bad dataset header: {exc}") from None
    if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
        raise FileFormatError("not a dataset file (missing format header)")
    if header.get("version") != FORMAT_VERSION:
        raise FileFormatError(f"unsupported dataset version {header.get('version')!r}")
    if domain is None:
        domain = get_domain(header["domain"])
    elif domain.name != header["domain"]:
        raise FileFormatError(
            f"dataset is for domain {header['domain']!r}, not {domain.name!r}"
        )
    transitions = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            x = _parse_state(rec["x"])
            x_next = _parse_state(rec["x_next"])
            by_name = {o.name: o for o in x.objects}
            act = rec["action"]
            action = Action(
                domain.controllers[act["controller"]],
                tuple(by_name[n] for n in act["objects"]),
                tuple(act["continuous"]),
            )
            goal = frozenset(
                Atom(domain.predicates[pred], tuple(by_name[n] for n in args))
                for pred, args in rec["goal"]
            )
            provenance = rec["provenance"]
            if provenance not in (DEMO, NEGATIVE):
                raise KeyError(f"bad provenance {provenance!r}")
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise FileFormatError(f"dataset line {lineno}: {exc}") from None
        transitions.append(Transition(x, action, x_next, goal, provenance))
    if len(transitions) != header.get("count"):
        raise FileFormatError(
            f"dataset header promises {header.get('count')} records, "
            f"found {len(transitions)}"
        )
    return Dataset(header["domain"], header["seed"], tuple(transitions))


def save_dataset(dataset: Dataset, path) -> None:
    from pathlib import Path

    Path(path).write_text(format_dataset(dataset))


def load_dataset(path, domain: Optional[Domain] = None) -> Dataset:
    from pathlib import Path

    return parse_dataset(Path(path).read_text(), domain)
