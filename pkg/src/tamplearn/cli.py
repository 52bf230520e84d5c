"""Command-line interface.

Subcommands cover the full pipeline: ``collect`` (dataset), ``learn``
(operators from a dataset), ``plan`` (solve generated problems),
``export-pddl`` (domain/problem files), ``experiment`` (learning curves),
and ``ablate-predicates`` (withheld-predicate sweep).

Global flags: ``--seed``, ``--domain``, ``--config`` (key=value file with
domain constants and optional ``experiment.*`` overrides), ``--out-dir``.
They may be given before or after the subcommand. Exit status is 0 on
success, 2 on configuration errors, 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import collect_dataset, load_dataset, save_dataset, subsample
from .determinize import DEFAULT_P_MIN, determinize
from .envs import get_domain, load_config
from .envs.config import Config, extract_prefixed
from .errors import FileFormatError, TamplearnError
from .experiments import (
    _DOMAIN_DEFAULTS,
    ExperimentConfig,
    default_config,
    emit_outputs,
    run_experiment,
    run_predicate_ablation,
)
from .learning import learn_operators
from .operators import DeterministicOperator, format_operators, parse_operators
from .pddl import export_pddl, format_ppddl
from .planning import PlannerConfig, solve, solve_no_operators

_EVAL_TAG = 101
_PLAN_TAG = 307
_SUBSAMPLE_TAG = 211


def _global_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("global flags")
    group.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="RNG seed (default 0)")
    group.add_argument(
        "--domain",
        choices=sorted(_DOMAIN_DEFAULTS),
        default=argparse.SUPPRESS,
        help="planning domain",
    )
    group.add_argument(
        "--config", default=argparse.SUPPRESS, help="key=value config file"
    )
    group.add_argument(
        "--out-dir", default=argparse.SUPPRESS, help="output directory (default ./out)"
    )
    return parent


def _build_parser() -> argparse.ArgumentParser:
    parent = _global_flags()
    parser = argparse.ArgumentParser(
        prog="tamplearn",
        description=__doc__.split("\n\n")[0],
        parents=[parent],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", parents=[parent], help="collect a transition dataset")
    p.add_argument("--n-problems", type=int, default=20, help="demonstration problems")
    p.add_argument(
        "--negatives", type=int, default=None,
        help="random negative transitions (default per domain)",
    )
    p.add_argument("--output", default=None, help="dataset path (default in --out-dir)")

    p = sub.add_parser("learn", parents=[parent], help="learn operators from a dataset")
    p.add_argument("--data", default=None, help="dataset path (default in --out-dir)")
    p.add_argument("--fraction", type=float, default=1.0, help="data fraction to use")
    p.add_argument("--p-min", type=float, default=DEFAULT_P_MIN, help="determinization cutoff")

    p = sub.add_parser("plan", parents=[parent], help="solve generated problems")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--operators", default=None, help="operator file (native format)")
    src.add_argument("--oracle", action="store_true", help="use hand-written operators")
    src.add_argument("--unguided", action="store_true", help="operator-free baseline")
    p.add_argument("--problems", type=int, default=10, help="number of problems")
    p.add_argument("--train-scale", action="store_true", help="training-size problems")
    p.add_argument("--heuristic", choices=("hadd", "blind"), default="hadd")
    p.add_argument("--max-nodes", type=int, default=1_000)
    p.add_argument("--max-sampler-calls", type=int, default=100_000)

    p = sub.add_parser("export-pddl", parents=[parent], help="write PDDL domain/problem files")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--operators", default=None, help="operator file (native format)")
    src.add_argument("--oracle", action="store_true", help="use hand-written operators")
    p.add_argument(
        "--strict-pddl", action="store_true",
        help="untyped output with unary type predicates",
    )

    p = sub.add_parser("experiment", parents=[parent], help="run the learning-curve sweep")
    p.add_argument("--methods", default=None, help="comma list: learned,oracle,unguided")
    p.add_argument("--fractions", default=None, help="comma list of data fractions")
    p.add_argument("--seeds", default=None, help="comma list of seeds")
    p.add_argument("--eval-problems", type=int, default=None)
    p.add_argument("--heuristic", choices=("hadd", "blind"), default=None)
    p.add_argument("--dataset", default=None, help="reuse a collected dataset file")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser(
        "ablate-predicates", parents=[parent], help="sweep withheld predicate counts"
    )
    p.add_argument("--withheld", default="0,1,2,3", help="comma list of counts")
    p.add_argument("--seeds", default=None, help="comma list of seeds")
    p.add_argument("--eval-problems", type=int, default=None)
    p.add_argument("--no-plots", action="store_true")
    return parser


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _require_domain(args: argparse.Namespace, parser: argparse.ArgumentParser) -> str:
    if args.domain is None:
        parser.error(f"--domain is required for '{args.command}'")
    return args.domain


def _experiment_overrides(config: Config) -> dict:
    """``experiment.*`` config keys coerced to ExperimentConfig field types."""
    raw = extract_prefixed(config, "experiment.")
    allowed = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
    out: dict = {}
    for key, value in raw.items():
        if key in ("seeds",):
            out[key] = tuple(int(v) for v in _as_tuple(value))
        elif key in ("fractions",):
            out[key] = tuple(float(v) for v in _as_tuple(value))
        elif key in ("methods",):
            out[key] = tuple(str(value).split())
        else:
            out[key] = value
    return out


def _as_tuple(value) -> tuple:
    return value if isinstance(value, tuple) else (value,)


def _dataset_path(args) -> Path:
    return Path(args.out_dir) / f"{args.domain}_dataset.jsonl"


def _cmd_collect(args, domain) -> int:
    k = args.negatives
    if k is None:
        k = _DOMAIN_DEFAULTS[domain.name]["k_negatives"]
    dataset = collect_dataset(domain, args.seed, args.n_problems, k)
    path = Path(args.output) if args.output else _dataset_path(args)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, path)
    print(
        f"wrote {len(dataset)} transitions "
        f"({dataset.n_demo} demo, {dataset.n_negative} negative) to {path}"
    )
    return 0


def _cmd_learn(args, domain) -> int:
    path = Path(args.data) if args.data else _dataset_path(args)
    dataset = load_dataset(path, domain)
    if args.fraction < 1.0:
        rng = np.random.default_rng(
            [args.seed, _SUBSAMPLE_TAG, int(round(args.fraction * 1000))]
        )
        dataset = subsample(dataset, args.fraction, rng)
    from .data import symbolic_transitions

    start = time.perf_counter()
    operators = learn_operators(symbolic_transitions(dataset, domain))
    deterministic = determinize(operators, args.p_min)
    elapsed = time.perf_counter() - start
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prob_path = out / f"{domain.name}_operators.txt"
    det_path = out / f"{domain.name}_operators_det.txt"
    ppddl_path = out / f"{domain.name}_operators.ppddl"
    prob_path.write_text(format_operators(operators))
    det_path.write_text(format_operators(deterministic))
    ppddl_path.write_text(format_ppddl(operators, domain.predicates, domain.name))
    print(
        f"learned {len(operators)} operators ({len(deterministic)} determinized) "
        f"from {len(dataset)} transitions in {elapsed:.2f}s"
    )
    for path in (prob_path, det_path, ppddl_path):
        print(f"wrote {path}")
    return 0


def _load_operators(path: str, domain) -> list[DeterministicOperator]:
    ops = parse_operators(Path(path).read_text(), domain.predicates, domain.controllers)
    deterministic = [op for op in ops if isinstance(op, DeterministicOperator)]
    if len(deterministic) < len(ops):
        # Probabilistic file: determinize with the default cutoff.
        deterministic = determinize(
            [op for op in ops if not isinstance(op, DeterministicOperator)]
        )
    return deterministic


def _cmd_plan(args, domain) -> int:
    size = domain.train_size_params if args.train_scale else domain.eval_size_params
    rng = np.random.default_rng([args.seed, _EVAL_TAG])
    problems = [domain.generate_problem(size, rng) for _ in range(args.problems)]
    config = PlannerConfig(
        heuristic=args.heuristic,
        max_nodes=args.max_nodes,
        max_sampler_calls=args.max_sampler_calls,
    )
    operators: Optional[list[DeterministicOperator]]
    if args.unguided:
        operators = None
        config = PlannerConfig(max_sampler_calls=3_000, max_template_length=4)
    elif args.oracle or not args.operators:
        operators = list(domain.oracle_operators())
    else:
        operators = _load_operators(args.operators, domain)
    n_solved = 0
    for i, problem in enumerate(problems):
        prng = np.random.default_rng([args.seed, _PLAN_TAG, i])
        if operators is None:
            plan, stats = solve_no_operators(problem, domain, config, prng)
        else:
            plan, stats = solve(problem, operators, domain, config, prng)
        n_solved += stats.solved
        plan_text = ";".join(str(a) for a in plan) if plan else ""
        failure = f" failure={stats.failure}" if stats.failure else ""
        print(
            f"problem={i} solved={str(stats.solved).lower()} "
            f"length={stats.plan_length if plan else 0} "
            f"nodes={stats.nodes_expanded} skeletons={stats.skeletons_tried} "
            f"sampler_calls={stats.sampler_calls} "
            f"wall_s={stats.wall_time:.3f}{failure} plan=\"{plan_text}\""
        )
    print(f"solved {n_solved}/{len(problems)}")
    return 0


def _cmd_export_pddl(args, domain) -> int:
    if args.operators:
        operators = _load_operators(args.operators, domain)
    else:
        operators = list(domain.oracle_operators())
    rng = np.random.default_rng([args.seed, _EVAL_TAG])
    problem = domain.generate_problem(domain.train_size_params, rng)
    domain_text, problem_text = export_pddl(
        operators, domain, problem, strict=args.strict_pddl
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    domain_path = out / f"{domain.name}.pddl"
    problem_path = out / f"{domain.name}_problem.pddl"
    domain_path.write_text(domain_text)
    problem_path.write_text(problem_text)
    print(f"wrote {domain_path}")
    print(f"wrote {problem_path}")
    return 0


def _experiment_config(args, config: Config) -> ExperimentConfig:
    overrides = _experiment_overrides(config)
    if getattr(args, "methods", None) is not None:
        overrides["methods"] = tuple(t for t in args.methods.split(",") if t)
    if getattr(args, "fractions", None) is not None:
        overrides["fractions"] = _float_list(args.fractions)
    if getattr(args, "seeds", None) is not None:
        overrides["seeds"] = _int_list(args.seeds)
    if getattr(args, "eval_problems", None) is not None:
        overrides["n_eval_problems"] = args.eval_problems
    if getattr(args, "heuristic", None):
        overrides["heuristic"] = args.heuristic
    if getattr(args, "dataset", None):
        overrides["dataset_path"] = args.dataset
    return default_config(args.domain, **overrides)


def _cmd_experiment(args, domain) -> int:
    cfg = _experiment_config(args, args.loaded_config)
    rows = run_experiment(cfg)
    paths = emit_outputs(rows, args.out_dir, plots=not args.no_plots)
    for path in paths:
        print(f"wrote {path}")
    for method in cfg.methods:
        cells = [r.solved_percent for r in rows if r.method == method]
        if cells:
            print(f"{method}: mean solved {float(np.mean(cells)):.1f}%")
    failed = [r for r in rows if r.error]
    if failed:
        print(f"{len(failed)} cells failed (see the error column)")
    return 0


def _cmd_ablate(args, domain) -> int:
    cfg = replace(_experiment_config(args, args.loaded_config), fractions=(1.0,))
    rows = []
    for n_withheld in _int_list(args.withheld):
        rows.extend(run_predicate_ablation(cfg, n_withheld))
    paths = emit_outputs(rows, args.out_dir, plots=not args.no_plots)
    for path in paths:
        print(f"wrote {path}")
    for n_withheld in sorted({r.n_withheld for r in rows}):
        cells = [r.solved_percent for r in rows if r.n_withheld == n_withheld]
        print(f"withheld={n_withheld}: mean solved {float(np.mean(cells)):.1f}%")
    return 0


_COMMANDS = {
    "collect": _cmd_collect,
    "learn": _cmd_learn,
    "plan": _cmd_plan,
    "export-pddl": _cmd_export_pddl,
    "experiment": _cmd_experiment,
    "ablate-predicates": _cmd_ablate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    # Fill global-flag defaults (the flags are accepted both before and
    # after the subcommand, so they use SUPPRESS defaults).
    for name, default in (("seed", 0), ("domain", None), ("config", None), ("out_dir", "out")):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        args.loaded_config = load_config(args.config) if args.config else {}
        domain_name = _require_domain(args, parser)
        domain = get_domain(domain_name, args.loaded_config or None)
        return _COMMANDS[args.command](args, domain)
    except (ValueError, OSError, FileFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TamplearnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
