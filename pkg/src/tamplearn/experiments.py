"""Experiment harness: learning curves, heuristic and predicate ablations.

``run_experiment`` sweeps (seed, method, fraction) cells for one domain and
returns flat result rows; ``emit_outputs`` writes them as a CSV (byte-stable
across reruns) plus optional plots. Every RNG stream is keyed by the seed and
a fixed tag, so each cell is independent of which other cells run: adding a
seed or a fraction to the config never changes existing rows.

Budgets are hardware-independent (node and sampler-call caps, calibrated so
the reference operators solve every domain comfortably); wall-clock time is
reported but not used as the primary cutoff.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import Dataset, collect_dataset, load_dataset, subsample, symbolic_transitions
from .determinize import DEFAULT_P_MIN, determinize
from .envs import AblatedDomain, Domain, Problem, get_domain
from .learning import learn_operators
from .operators import DeterministicOperator
from .planning import PlannerConfig, solve, solve_no_operators

METHODS = ("learned", "oracle", "unguided")

# Distinct sub-stream tags so every cell draws from its own generator.
_EVAL_TAG = 101
_SUBSAMPLE_TAG = 211
_PLAN_TAG = 307
_ABLATE_TAG = 401

# Per-domain data and evaluation sizes.
_DOMAIN_DEFAULTS = {
    "cover": {"k_negatives": 100, "n_eval_problems": 30},
    "blocks": {"k_negatives": 100, "n_eval_problems": 10},
    "painting": {"k_negatives": 2500, "n_eval_problems": 30},
}


@dataclass(frozen=True)
class ExperimentConfig:
    domain: str
    methods: tuple[str, ...] = METHODS
    fractions: tuple[float, ...] = (0.1, 0.25, 0.5, 0.75, 1.0)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    n_train_problems: int = 20
    k_negatives: int = 100
    n_eval_problems: int = 30
    heuristic: str = "hadd"
    max_nodes: int = 1_000
    n_samples: int = 10
    max_sampler_calls: int = 100_000
    max_skeletons: int = 1_000
    unguided_sampler_calls: int = 3_000
    unguided_template_length: int = 4
    p_min: float = DEFAULT_P_MIN
    n_withheld: int = 0
    dataset_path: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        for f in self.fractions:
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"fractions must be in [0, 1], got {f}")
        if self.heuristic not in ("hadd", "blind"):
            raise ValueError(f"unknown heuristic {self.heuristic!r}")
        if self.n_withheld < 0:
            raise ValueError("n_withheld must be non-negative")


def default_config(domain: str, **overrides) -> ExperimentConfig:
    """Per-domain defaults (negative count, eval problem count)."""
    base = dict(_DOMAIN_DEFAULTS.get(domain, {}))
    base.update(overrides)
    return ExperimentConfig(domain=domain, **base)


@dataclass(frozen=True)
class ResultRow:
    domain: str
    method: str
    fraction: float
    seed: int
    n_withheld: int
    solved_percent: float
    mean_wall_time: float
    mean_nodes_expanded: float
    learn_time: float
    error: str = ""


CSV_COLUMNS = (
    "domain",
    "method",
    "fraction",
    "seed",
    "n_withheld",
    "solved_percent",
    "mean_wall_time",
    "mean_nodes_expanded",
    "learn_time",
    "error",
)


def _planner_config(cfg: ExperimentConfig, heuristic: Optional[str] = None) -> PlannerConfig:
    return PlannerConfig(
        heuristic=heuristic or cfg.heuristic,
        n_samples=cfg.n_samples,
        max_nodes=cfg.max_nodes,
        max_sampler_calls=cfg.max_sampler_calls,
        max_skeletons=cfg.max_skeletons,
    )


def _unguided_config(cfg: ExperimentConfig) -> PlannerConfig:
    return PlannerConfig(
        n_samples=cfg.n_samples,
        max_sampler_calls=cfg.unguided_sampler_calls,
        max_template_length=cfg.unguided_template_length,
    )


def _eval_problems(domain: Domain, cfg: ExperimentConfig, seed: int) -> list[Problem]:
    rng = np.random.default_rng([seed, _EVAL_TAG])
    return [
        domain.generate_problem(domain.eval_size_params, rng)
        for _ in range(cfg.n_eval_problems)
    ]


@dataclass
class _EvalOutcome:
    solved_percent: float = 0.0
    mean_wall_time: float = 0.0
    mean_nodes_expanded: float = 0.0


def _evaluate(
    domain: Domain,
    operators: Optional[Sequence[DeterministicOperator]],
    problems: Sequence[Problem],
    planner_cfg: PlannerConfig,
    seed: int,
) -> _EvalOutcome:
    """Solve every problem; ``operators=None`` means the operator-free baseline.

    Each problem gets its own RNG stream keyed only by (seed, index), so a
    learned run with no operators behaves identically to the baseline.
    """
    solved = 0
    walls, nodes = [], []
    for i, problem in enumerate(problems):
        rng = np.random.default_rng([seed, _PLAN_TAG, i])
        if operators is None:
            plan, stats = solve_no_operators(problem, domain, planner_cfg, rng)
        else:
            plan, stats = solve(problem, operators, domain, planner_cfg, rng)
        if plan is not None:
            x = problem.x0
            for action in plan:
                x = domain.simulate(x, action)
            assert domain.goal_achieved(x, problem.goal), "plan does not replay to goal"
            solved += 1
        walls.append(stats.wall_time)
        nodes.append(stats.nodes_expanded)
    n = max(len(problems), 1)
    return _EvalOutcome(100.0 * solved / n, float(np.mean(walls or [0.0])), float(np.mean(nodes or [0.0])))


def _learn(
    dataset: Dataset, domain: Domain, fraction: float, seed: int, cfg: ExperimentConfig
) -> tuple[list[DeterministicOperator], float]:
    rng = np.random.default_rng([seed, _SUBSAMPLE_TAG, int(round(fraction * 1000))])
    sub = subsample(dataset, fraction, rng)
    start = time.perf_counter()
    operators = learn_operators(symbolic_transitions(sub, domain))
    det = determinize(operators, cfg.p_min)
    return det, time.perf_counter() - start


def _withheld_predicates(domain: Domain, n_withheld: int, seed: int) -> frozenset[str]:
    candidates = sorted(set(domain.predicates) - domain.goal_predicates)
    if n_withheld > len(candidates):
        raise ValueError(
            f"cannot withhold {n_withheld} of {len(candidates)} non-goal predicates"
        )
    rng = np.random.default_rng([seed, _ABLATE_TAG])
    picked = rng.choice(len(candidates), size=n_withheld, replace=False)
    return frozenset(candidates[i] for i in picked)


def _failed_row(cfg: ExperimentConfig, method: str, fraction: float, seed: int, exc: Exception) -> ResultRow:
    return ResultRow(
        cfg.domain, method, fraction, seed, cfg.n_withheld,
        0.0, 0.0, 0.0, 0.0, f"{type(exc).__name__}: {exc}",
    )


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    """Evaluate every (seed, method, fraction) cell of the config.

    Per-cell errors become rows with a non-empty ``error`` field; the run
    continues. ``oracle`` and ``unguided`` skip learning and are evaluated
    once per seed (reported at fraction 1.0). A learned cell whose data
    yields no operators falls back to the operator-free baseline, so
    fraction 0.0 reproduces ``unguided`` exactly.
    """
    base = get_domain(cfg.domain)
    rows: list[ResultRow] = []
    for seed in cfg.seeds:
        domain: Domain = base
        if cfg.n_withheld:
            domain = AblatedDomain(base, _withheld_predicates(base, cfg.n_withheld, seed))
        try:
            if cfg.dataset_path is not None:
                dataset = load_dataset(cfg.dataset_path, base)
            else:
                dataset = collect_dataset(
                    base, seed, cfg.n_train_problems, cfg.k_negatives
                )
            problems = _eval_problems(base, cfg, seed)
        except Exception as exc:  # noqa: BLE001 - per-cell error reporting
            for method in cfg.methods:
                for fraction in cfg.fractions if method == "learned" else (1.0,):
                    rows.append(_failed_row(cfg, method, fraction, seed, exc))
            continue
        for method in cfg.methods:
            if method == "learned":
                for fraction in cfg.fractions:
                    rows.append(
                        _learned_cell(cfg, domain, dataset, problems, fraction, seed)
                    )
            else:
                rows.append(_baseline_cell(cfg, domain, problems, method, seed))
    return rows


def _learned_cell(
    cfg: ExperimentConfig,
    domain: Domain,
    dataset: Dataset,
    problems: Sequence[Problem],
    fraction: float,
    seed: int,
) -> ResultRow:
    try:
        operators, learn_time = _learn(dataset, domain, fraction, seed, cfg)
        if operators:
            outcome = _evaluate(domain, operators, problems, _planner_config(cfg), seed)
        else:
            outcome = _evaluate(domain, None, problems, _unguided_config(cfg), seed)
    except Exception as exc:  # noqa: BLE001
        return _failed_row(cfg, "learned", fraction, seed, exc)
    return ResultRow(
        cfg.domain, "learned", fraction, seed, cfg.n_withheld,
        outcome.solved_percent, outcome.mean_wall_time, outcome.mean_nodes_expanded,
        learn_time,
    )


def _baseline_cell(
    cfg: ExperimentConfig,
    domain: Domain,
    problems: Sequence[Problem],
    method: str,
    seed: int,
) -> ResultRow:
    try:
        if method == "oracle":
            operators = list(domain.oracle_operators())
            outcome = _evaluate(domain, operators, problems, _planner_config(cfg), seed)
        else:
            outcome = _evaluate(domain, None, problems, _unguided_config(cfg), seed)
    except Exception as exc:  # noqa: BLE001
        return _failed_row(cfg, method, 1.0, seed, exc)
    return ResultRow(
        cfg.domain, method, 1.0, seed, cfg.n_withheld,
        outcome.solved_percent, outcome.mean_wall_time, outcome.mean_nodes_expanded,
        0.0,
    )


def run_predicate_ablation(cfg: ExperimentConfig, n_withheld: int) -> list[ResultRow]:
    """Learned method with ``n_withheld`` non-goal predicates hidden per seed.

    Ablation changes the parse used for data conversion and planning; data
    collection itself runs on the full domain (demonstrations need the
    reference operators). ``n_withheld=0`` matches the plain experiment.
    """
    ablated = replace(cfg, methods=("learned",), n_withheld=n_withheld)
    return run_experiment(ablated)


# ---------------------------------------------------------------------------
# Output emission
# ---------------------------------------------------------------------------


def format_rows(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([getattr(row, col) for col in CSV_COLUMNS])
    return buf.getvalue()


def _curve(rows: Sequence[ResultRow], method: str) -> tuple[list[float], list[float]]:
    """Mean solved% per fraction for one method, fractions ascending."""
    fractions = sorted({r.fraction for r in rows if r.method == method})
    means = []
    for fraction in fractions:
        cell = [r.solved_percent for r in rows if r.method == method and r.fraction == fraction]
        means.append(float(np.mean(cell)))
    return fractions, means


def _plot_learning_curves(rows: Sequence[ResultRow], domain: str, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for method in sorted({r.method for r in rows}):
        fractions, means = _curve(rows, method)
        if method == "learned":
            ax.plot(fractions, means, marker="o", label=method)
        else:
            ax.axhline(means[0], linestyle="--", alpha=0.7, label=method)
    ax.set_xlabel("data fraction")
    ax.set_ylabel("% problems solved")
    ax.set_ylim(-5, 105)
    ax.set_title(domain)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_ablation(rows: Sequence[ResultRow], domain: str, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    counts = sorted({r.n_withheld for r in rows})
    means = [
        float(np.mean([r.solved_percent for r in rows if r.n_withheld == n]))
        for n in counts
    ]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(counts, means, marker="o")
    ax.set_xlabel("predicates withheld")
    ax.set_ylabel("% problems solved")
    ax.set_ylim(-5, 105)
    ax.set_title(domain)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def emit_outputs(rows: Sequence[ResultRow], out_dir, plots: bool = True) -> list[Path]:
    """Write ``results.csv`` (stable column order, byte-stable) and plots."""
    if not rows:
        raise ValueError("no rows to emit")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "results.csv"]
    paths[0].write_text(format_rows(rows))
    if not plots:
        return paths
    for domain in sorted({r.domain for r in rows}):
        sub = [r for r in rows if r.domain == domain]
        if len({r.n_withheld for r in sub}) > 1:
            path = out_dir / f"ablation_{domain}.png"
            _plot_ablation(sub, domain, path)
        else:
            path = out_dir / f"learning_curve_{domain}.png"
            _plot_learning_curves(sub, domain, path)
        paths.append(path)
    return paths
