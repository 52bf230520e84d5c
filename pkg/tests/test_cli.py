"""CLI subcommands, flag handling, and exit codes."""

import re

import pytest

from tamplearn.cli import main
from tamplearn.data import load_dataset
from tamplearn.envs import get_domain
from tamplearn.operators import ProbabilisticOperator, parse_operators
from tamplearn.pddl import parse_pddl_domain, parse_pddl_problem


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A collected dataset and learned operators for the cover domain."""
    out = tmp_path_factory.mktemp("cli")
    assert run(
        "collect", "--domain", "cover", "--seed", "0", "--out-dir", str(out),
        "--n-problems", "6", "--negatives", "30",
    ) == 0
    assert run("learn", "--domain", "cover", "--seed", "0", "--out-dir", str(out)) == 0
    return out


def test_collect_writes_dataset(workspace, capsys):
    dataset = load_dataset(workspace / "cover_dataset.jsonl", get_domain("cover"))
    assert dataset.n_demo >= 6 and dataset.n_negative == 30
    assert run(
        "collect", "--domain", "cover", "--seed", "0", "--out-dir", str(workspace),
        "--n-problems", "2", "--negatives", "3",
        "--output", str(workspace / "tiny.jsonl"),
    ) == 0
    out = capsys.readouterr().out
    assert re.search(r"wrote \d+ transitions \(\d+ demo, 3 negative\)", out)


def test_learn_writes_all_formats(workspace):
    domain = get_domain("cover")
    for name in ("cover_operators.txt", "cover_operators_det.txt"):
        ops = parse_operators(
            (workspace / name).read_text(), domain.predicates, domain.controllers
        )
        assert ops
    assert "(probabilistic" in (workspace / "cover_operators.ppddl").read_text()


def test_global_flags_accepted_before_subcommand(workspace, tmp_path):
    assert run(
        "--domain", "cover", "--seed", "1", "--out-dir", str(tmp_path),
        "collect", "--n-problems", "2", "--negatives", "2",
    ) == 0
    assert (tmp_path / "cover_dataset.jsonl").exists()


def test_plan_with_learned_operators(workspace, capsys):
    assert run(
        "plan", "--domain", "cover", "--seed", "0", "--out-dir", str(workspace),
        "--operators", str(workspace / "cover_operators_det.txt"), "--problems", "3",
    ) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert len(lines) == 4  # three problem records plus a summary
    for line in lines[:-1]:
        assert re.match(
            r'problem=\d+ solved=(true|false) length=\d+ nodes=\d+ '
            r'skeletons=\d+ sampler_calls=\d+ wall_s=[\d.]+.* plan=".*"',
            line,
        )
    assert re.match(r"solved \d+/3", lines[-1])


def test_plan_baselines(workspace, capsys):
    assert run(
        "plan", "--domain", "cover", "--oracle", "--problems", "2",
        "--out-dir", str(workspace),
    ) == 0
    assert "solved 2/2" in capsys.readouterr().out
    assert run(
        "plan", "--domain", "cover", "--unguided", "--problems", "2",
        "--out-dir", str(workspace),
    ) == 0
    capsys.readouterr()


def test_export_pddl_round_trips(workspace, tmp_path):
    domain = get_domain("cover")
    for extra in ([], ["--strict-pddl"]):
        assert run(
            "export-pddl", "--domain", "cover", "--out-dir", str(tmp_path),
            "--operators", str(workspace / "cover_operators_det.txt"), *extra,
        ) == 0
        ops = parse_pddl_domain(
            (tmp_path / "cover.pddl").read_text(), domain.predicates, domain.controllers
        )
        assert ops
        parsed = parse_pddl_problem(
            (tmp_path / "cover_problem.pddl").read_text(), domain.predicates
        )
        assert parsed.domain_name == "cover"


def test_export_pddl_determinizes_probabilistic_input(workspace, tmp_path):
    domain = get_domain("cover")
    assert run(
        "export-pddl", "--domain", "cover", "--out-dir", str(tmp_path),
        "--operators", str(workspace / "cover_operators.txt"),
    ) == 0
    ops = parse_pddl_domain(
        (tmp_path / "cover.pddl").read_text(), domain.predicates, domain.controllers
    )
    assert ops and not any(isinstance(op, ProbabilisticOperator) for op in ops)


def test_experiment_subcommand(workspace, tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("experiment.n_train_problems = 4\nexperiment.k_negatives = 10\n")
    assert run(
        "experiment", "--domain", "cover", "--out-dir", str(tmp_path),
        "--config", str(cfg), "--seeds", "0", "--fractions", "1.0",
        "--eval-problems", "3", "--no-plots",
    ) == 0
    out = capsys.readouterr().out
    assert "results.csv" in out
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert len(lines) == 1 + 3  # header + learned + oracle + unguided


def test_experiment_reuses_dataset_file(workspace, tmp_path):
    assert run(
        "experiment", "--domain", "cover", "--out-dir", str(tmp_path),
        "--dataset", str(workspace / "cover_dataset.jsonl"),
        "--seeds", "0", "--fractions", "1.0", "--methods", "learned",
        "--eval-problems", "2", "--no-plots",
    ) == 0
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert len(lines) == 2


def test_ablate_subcommand(workspace, tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("experiment.n_train_problems = 3\nexperiment.k_negatives = 8\n")
    assert run(
        "ablate-predicates", "--domain", "cover", "--out-dir", str(tmp_path),
        "--config", str(cfg), "--seeds", "0", "--eval-problems", "2",
        "--withheld", "0,1", "--no-plots",
    ) == 0
    out = capsys.readouterr().out
    assert "withheld=0" in out and "withheld=1" in out
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert len(lines) == 3


def test_missing_domain_is_config_error(capsys):
    with pytest.raises(SystemExit) as err:
        run("collect")
    assert err.value.code == 2
    capsys.readouterr()


def test_bad_inputs_exit_nonzero(tmp_path, capsys):
    assert run("learn", "--domain", "cover", "--data", str(tmp_path / "nope.jsonl")) == 2
    assert run("experiment", "--domain", "cover", "--seeds", "") == 2
    bad_cfg = tmp_path / "bad.cfg"
    bad_cfg.write_text("experiment.quantum = 1\n")
    assert run("experiment", "--domain", "cover", "--config", str(bad_cfg)) == 2
    not_cfg = tmp_path / "not.cfg"
    not_cfg.write_text("no equals sign here\n")
    assert run("collect", "--domain", "cover", "--config", str(not_cfg)) == 2
    capsys.readouterr()


def test_unknown_subcommand_exits_two(capsys):
    with pytest.raises(SystemExit) as err:
        run("frobnicate")
    assert err.value.code == 2
    capsys.readouterr()
