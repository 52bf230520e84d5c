"""Planner tests: heuristic kernels, grounding, skeleton search, refinement.

Derived quantities are checked against independent oracles: hand-computed
fixpoints and a dict-based Bellman iteration for the additive heuristic,
brute-force enumeration for grounding, breadth-first search for shortest
skeletons, and a two-step coin domain with known success probability for
the backtracking refinement.
"""

from __future__ import annotations

import math
import os
import subprocess
import sys
from collections import deque
from itertools import product
from typing import Mapping

import numpy as np
import pytest
from conftest import BLOCK, HADD_CASES, TARGET, blk, hadd_arrays, hadd_reference, tgt

from tamplearn.envs import get_domain
from tamplearn.envs.base import Domain, LowLevelState, Problem
from tamplearn.errors import SearchExhausted
from tamplearn.operators import (
    Action,
    ActionTemplate,
    ControllerSpec,
    DeterministicOperator,
)
from tamplearn.planning import (
    BIG,
    GroundOperator,
    GroundTask,
    PlannerConfig,
    SamplerBudget,
    Skeleton,
    ground_operators,
    make_heuristic,
    refine,
    skeleton_search,
    solve,
    solve_no_operators,
)
from tamplearn.planning.kernels import HAS_NUMBA, _hadd_numpy, _hadd_python
from tamplearn.symbols import EffectSet, ObjectRef, Predicate, Variable

# ---------------------------------------------------------------------------
# Heuristic kernels
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("case", HADD_CASES, ids=range(len(HADD_CASES)))
def test_hadd_matches_hand_computation(case):
    n_atoms, ops, init, goal, want = case
    arrays = hadd_arrays(n_atoms, ops, init)
    goal_idx = np.asarray(goal, dtype=np.int32)
    got = _hadd_numpy(*arrays, goal_idx)
    if math.isinf(want):
        assert got == BIG
    else:
        assert got == want
    ref = hadd_reference(n_atoms, ops, init, goal)
    assert ref == want


def _random_hadd_task(rng):
    n_atoms = int(rng.integers(1, 12))
    n_ops = int(rng.integers(0, 20))
    ops = []
    for _ in range(n_ops):
        pre = sorted(set(rng.integers(0, n_atoms, size=rng.integers(0, 4)).tolist()))
        add = sorted(set(rng.integers(0, n_atoms, size=rng.integers(1, 4)).tolist()))
        ops.append((pre, add))
    init = sorted(set(rng.integers(0, n_atoms, size=rng.integers(0, n_atoms + 1)).tolist()))
    goal = sorted(set(rng.integers(0, n_atoms, size=rng.integers(0, 4)).tolist()))
    return n_atoms, ops, init, goal


def test_hadd_backends_agree_with_reference():
    rng = np.random.default_rng(7)
    for _ in range(300):
        n_atoms, ops, init, goal = _random_hadd_task(rng)
        arrays = hadd_arrays(n_atoms, ops, init)
        goal_idx = np.asarray(goal, dtype=np.int32)
        ref = hadd_reference(n_atoms, ops, init, goal)
        want = BIG if math.isinf(ref) else ref
        assert _hadd_numpy(*arrays, goal_idx) == want
        assert _hadd_python(*arrays, goal_idx) == want


@pytest.mark.skipif(not HAS_NUMBA, reason="numba unavailable")
def test_hadd_numba_backend_agrees():
    from tamplearn.planning.kernels import _hadd_numba

    rng = np.random.default_rng(11)
    for _ in range(100):
        n_atoms, ops, init, goal = _random_hadd_task(rng)
        arrays = hadd_arrays(n_atoms, ops, init)
        goal_idx = np.asarray(goal, dtype=np.int32)
        assert _hadd_numba(*arrays, goal_idx) == _hadd_numpy(*arrays, goal_idx)


def test_numba_disable_flag_selects_numpy_backend():
    env = dict(os.environ, TAMPLEARN_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c",
         "from tamplearn.planning.kernels import backend_name; print(backend_name())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"


# ---------------------------------------------------------------------------
# Grounding
# ---------------------------------------------------------------------------

GRIP = ControllerSpec("Grip", (BLOCK,), 0)
ON = Predicate("On", (BLOCK, BLOCK))
COVERS_P = Predicate("Covers", (BLOCK, TARGET))


def _two_param_op():
    a, b = Variable("?x0", BLOCK), Variable("?x1", BLOCK)
    return DeterministicOperator(
        name="Move0",
        controller=GRIP,
        params=(a, b),
        preconditions=frozenset({ON(a, b)}),
        effects=EffectSet(add=frozenset({ON(b, a)}), delete=frozenset({ON(a, b)})),
    )


def test_grounding_uses_distinct_objects():
    op = _two_param_op()
    objs = [blk("b0"), blk("b1"), blk("b2")]
    ground = ground_operators([op], objs)
    # Ordered pairs of distinct blocks: 3*2, not 3*3.
    assert len(ground) == 6
    assert all(len(set(g.objects)) == 2 for g in ground)
    names = {g.name for g in ground}
    assert "Move0(b0,b1)" in names and "Move0(b0,b0)" not in names


def test_grounding_empty_when_pool_too_small():
    assert ground_operators([_two_param_op()], [blk("b0")]) == []


def test_grounding_matches_bruteforce_enumeration(rng):
    preds = {BLOCK: Predicate("PB", (BLOCK,)), TARGET: Predicate("PT", (TARGET,))}
    for round_ in range(50):
        arity = int(rng.integers(1, 4))
        types = [BLOCK if rng.random() < 0.5 else TARGET for _ in range(arity)]
        if types[0] != BLOCK:
            types[0] = BLOCK  # leading param must match the controller
        variables = tuple(Variable(f"?x{i}", t) for i, t in enumerate(types))
        op = DeterministicOperator(
            name="R0",
            controller=GRIP,
            params=variables,
            preconditions=frozenset(),
            effects=EffectSet(
                add=frozenset({preds[types[0]](variables[0])}), delete=frozenset()
            ),
        )
        pool = [blk(f"b{i}") for i in range(rng.integers(0, 4))]
        pool += [tgt(f"t{i}") for i in range(rng.integers(0, 3))]
        got = {g.objects for g in ground_operators([op], pool)}
        want = {
            combo
            for combo in product(pool, repeat=arity)
            if len(set(combo)) == arity
            and all(o.type == t for o, t in zip(combo, types))
        }
        assert got == want, f"round {round_}: {types}"


def test_ground_template_binds_leading_params():
    op = _two_param_op()
    ground = ground_operators([op], [blk("b0"), blk("b1")])
    for g in ground:
        assert g.template.controller is GRIP
        assert g.template.discrete_args == g.objects[:1]


# ---------------------------------------------------------------------------
# Skeleton search
# ---------------------------------------------------------------------------


def _cover_task(seed=0, heuristic="hadd"):
    domain = get_domain("cover")
    rng = np.random.default_rng(seed)
    problem = domain.generate_problem(domain.eval_size_params, rng)
    ground = ground_operators(domain.oracle_operators(), problem.objects)
    task = GroundTask(domain.parse(problem.x0), problem.goal, ground)
    return domain, problem, task, make_heuristic(heuristic, task)


def _bfs_shortest(task) -> int | None:
    seen = {task.init_mask}
    queue = deque([(task.init_mask, 0)])
    while queue:
        bits, depth = queue.popleft()
        if task.satisfies_goal(bits):
            return depth
        for i in task.applicable(bits):
            succ = task.successor(bits, i)
            if succ not in seen:
                seen.add(succ)
                queue.append((succ, depth + 1))
    return None


@pytest.mark.parametrize("seed", range(5))
def test_blind_first_skeleton_is_shortest(seed):
    _, _, task, h = _cover_task(seed, heuristic="blind")
    first = next(skeleton_search(task, h, max_nodes=100_000))
    assert len(first) == _bfs_shortest(task)


def test_skeleton_stream_blind_lengths_nondecreasing():
    _, _, task, h = _cover_task(1, heuristic="blind")
    stream = skeleton_search(task, h, max_nodes=100_000)
    lengths = []
    try:
        for skeleton in stream:
            lengths.append(len(skeleton))
    except SearchExhausted:
        pass
    assert lengths and lengths == sorted(lengths)


def test_skeleton_expected_states_follow_effects():
    _, _, task, h = _cover_task(2)
    skeleton = next(skeleton_search(task, h, max_nodes=10_000))
    state = task.unmask(task.init_mask)
    for step, expected in zip(skeleton.steps, skeleton.expected):
        assert step.preconditions <= state
        state = (state - step.delete) | step.add
        assert state == expected
    assert task.unmask(task.goal_mask) <= state


def test_search_exhausted_on_node_budget():
    _, _, task, h = _cover_task(0, heuristic="blind")
    with pytest.raises(SearchExhausted):
        for _ in skeleton_search(task, h, max_nodes=1):
            pass


def test_hadd_zero_iff_goal_satisfied(rng):
    _, _, task, h = _cover_task(3)
    atoms = list(range(len(task.atoms)))
    for _ in range(100):
        bits = 0
        for i in atoms:
            if rng.random() < 0.4:
                bits |= 1 << i
        assert (h(bits) == 0.0) == task.satisfies_goal(bits)


def test_hadd_monotone_under_operator_removal():
    domain, problem, task, h = _cover_task(4)
    full = h(task.init_mask)
    ground = task.operators
    for keep in range(len(ground)):
        sub = GroundTask(domain.parse(problem.x0), problem.goal, ground[:keep])
        h_sub = make_heuristic("hadd", sub)(sub.init_mask)
        assert h_sub >= full


# ---------------------------------------------------------------------------
# Refinement: a two-step coin domain with known success probability
# ---------------------------------------------------------------------------

COUNTER = "counter"
STEP_ONE = Predicate("StepOne", ())
STEP_TWO = Predicate("StepTwo", ())
FLIP = ControllerSpec("Flip", (COUNTER,), 1)


class CoinDomain(Domain):
    """Flip succeeds iff its continuous argument is below the success rate."""

    name = "coin"

    def __init__(self, success_rate=0.5):
        self.success_rate = success_rate

    @property
    def types(self):
        return (COUNTER,)

    @property
    def predicates(self) -> Mapping[str, Predicate]:
        return {p.name: p for p in (STEP_ONE, STEP_TWO)}

    @property
    def controllers(self) -> Mapping[str, ControllerSpec]:
        return {FLIP.name: FLIP}

    @property
    def goal_predicates(self):
        return frozenset({STEP_TWO.name})

    def simulate(self, x: LowLevelState, a: Action) -> LowLevelState:
        (obj,) = a.discrete_args
        if a.continuous_args[0] < self.success_rate:
            return x.set(obj, n=x.scalar(obj, "n") + 1)
        return x

    def parse(self, x):
        (obj,) = x.objects
        n = x.scalar(obj, "n")
        atoms = set()
        if n >= 1:
            atoms.add(STEP_ONE())
        if n >= 2:
            atoms.add(STEP_TWO())
        return frozenset(atoms)

    def sample_continuous(self, controller, x, discrete_args, rng):
        return (float(rng.uniform(0.0, 1.0)),)

    def generate_problem(self, size_params, rng):
        raise NotImplementedError

    def oracle_operators(self):
        raise NotImplementedError

    @property
    def train_size_params(self):
        return {}

    @property
    def eval_size_params(self):
        return {}


def _coin_fixture(success_rate=0.5):
    coin = ObjectRef("c0", COUNTER)
    x0 = LowLevelState.build({coin: {"n": (0.0,)}})
    var = Variable("?x0", COUNTER)
    ops = []
    for name, pre, add in (
        ("Flip0", frozenset(), frozenset({STEP_ONE()})),
        ("Flip1", frozenset({STEP_ONE()}), frozenset({STEP_TWO()})),
    ):
        op = DeterministicOperator(
            name=name, controller=FLIP, params=(var,),
            preconditions=pre, effects=EffectSet(add=add, delete=frozenset()),
        )
        ops.append(
            GroundOperator(
                name=f"{name}(c0)", operator=op, objects=(coin,),
                template=ActionTemplate(FLIP, (coin,)),
                preconditions=pre, add=add, delete=frozenset(),
            )
        )
    skeleton = Skeleton(
        steps=tuple(ops),
        expected=(frozenset({STEP_ONE()}), frozenset({STEP_ONE(), STEP_TWO()})),
    )
    return CoinDomain(success_rate), x0, skeleton


def test_refine_success_rate_matches_analytic_value():
    # With one sample per step and per-step success probability 1/2, the
    # two-step skeleton refines with probability exactly 1/4.
    domain, x0, skeleton = _coin_fixture()
    rng = np.random.default_rng(123)
    trials = 4000
    wins = sum(
        refine(skeleton, x0, domain, 1, rng, max_calls=10) is not None
        for _ in range(trials)
    )
    assert abs(wins / trials - 0.25) < 0.02


def test_refine_backtracking_raises_success_rate():
    # n_samples=2 gives q2 = 1-(1-p)^2 = 0.75 at the leaf and
    # q = 1-(1 - p*q2)^2 = 0.609375 overall.
    domain, x0, skeleton = _coin_fixture()
    rng = np.random.default_rng(321)
    trials = 4000
    wins = sum(
        refine(skeleton, x0, domain, 2, rng, max_calls=100) is not None
        for _ in range(trials)
    )
    assert abs(wins / trials - 0.609375) < 0.025


def test_refine_never_rejects_matching_samples():
    # With success_rate 1.0 every sample realizes the expected state, so
    # refinement must accept immediately: exactly one draw per step.
    domain, x0, skeleton = _coin_fixture(success_rate=1.0)
    rng = np.random.default_rng(5)
    calls = 0

    def count():
        nonlocal calls
        calls += 1

    plan = refine(skeleton, x0, domain, 10, rng, max_calls=100, on_call=count)
    assert plan is not None and len(plan) == 2
    assert calls == 2


def test_refine_enforces_sampler_budget():
    domain, x0, skeleton = _coin_fixture(success_rate=1.0)
    rng = np.random.default_rng(6)
    with pytest.raises(SamplerBudget):
        refine(skeleton, x0, domain, 10, rng, max_calls=1)


def test_refine_simulates_from_accepted_prefix():
    domain, x0, skeleton = _coin_fixture(success_rate=1.0)
    rng = np.random.default_rng(7)
    plan = refine(skeleton, x0, domain, 10, rng, max_calls=10)
    x = x0
    for action, expected in zip(plan, skeleton.expected):
        x = domain.simulate(x, action)
        assert domain.parse(x) == expected


# ---------------------------------------------------------------------------
# End-to-end solving
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("heuristic", ["hadd", "blind"])
def test_solve_cover_with_reference_operators(heuristic):
    domain = get_domain("cover")
    config = PlannerConfig(heuristic=heuristic)
    for seed in range(10):
        rng = np.random.default_rng(seed)
        problem = domain.generate_problem(domain.eval_size_params, rng)
        plan, stats = solve(problem, domain.oracle_operators(), domain, config, rng)
        assert stats.solved, (seed, stats)
        x = problem.x0
        for action in plan:
            x = domain.simulate(x, action)
        assert problem.goal <= domain.parse(x)


@pytest.mark.parametrize("name,n", [("blocks", 5), ("painting", 3)])
def test_solve_other_domains_with_reference_operators(name, n):
    domain = get_domain(name)
    config = PlannerConfig()
    for seed in range(n):
        rng = np.random.default_rng(seed)
        problem = domain.generate_problem(domain.eval_size_params, rng)
        plan, stats = solve(problem, domain.oracle_operators(), domain, config, rng)
        assert stats.solved, (name, seed, stats)


def test_solve_is_deterministic_given_seed():
    domain = get_domain("blocks")
    config = PlannerConfig()
    results = []
    for _ in range(2):
        rng = np.random.default_rng(42)
        problem = domain.generate_problem(domain.eval_size_params, rng)
        plan, stats = solve(problem, domain.oracle_operators(), domain, config, rng)
        results.append(
            (plan, stats.skeletons_tried, stats.nodes_expanded, stats.sampler_calls)
        )
    assert results[0] == results[1]


def test_solve_trivial_goal_returns_empty_plan():
    domain = get_domain("cover")
    rng = np.random.default_rng(0)
    problem = domain.generate_problem(domain.eval_size_params, rng)
    trivial = Problem(objects=problem.objects, x0=problem.x0, goal=frozenset())
    plan, stats = solve(trivial, domain.oracle_operators(), domain, PlannerConfig(), rng)
    assert stats.solved and plan == []


def test_solve_reports_search_exhaustion():
    domain = get_domain("cover")
    rng = np.random.default_rng(0)
    problem = domain.generate_problem(domain.eval_size_params, rng)
    # No operators at all: the symbolic goal is unreachable.
    plan, stats = solve(problem, [], domain, PlannerConfig(), rng)
    assert plan is None and not stats.solved
    assert stats.failure == "search_exhausted"


def test_solve_no_operators_solves_some_cover_problems():
    domain = get_domain("cover")
    config = PlannerConfig(max_sampler_calls=3000, max_template_length=4)
    wins = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        problem = domain.generate_problem(domain.eval_size_params, rng)
        plan, stats = solve_no_operators(problem, domain, config, rng)
        if stats.solved:
            wins += 1
            x = problem.x0
            for action in plan:
                x = domain.simulate(x, action)
            assert problem.goal <= domain.parse(x)
    assert wins > 0


def test_solve_no_operators_fails_painting_within_budget():
    domain = get_domain("painting")
    config = PlannerConfig(max_sampler_calls=3000, max_template_length=4)
    rng = np.random.default_rng(0)
    problem = domain.generate_problem(domain.eval_size_params, rng)
    plan, stats = solve_no_operators(problem, domain, config, rng)
    assert plan is None and not stats.solved
