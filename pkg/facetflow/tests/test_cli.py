import json
import numpy as np
import pytest
from facetflow.cli import cli
from facetflow.lab.report import REPORT_COLUMNS

CONSTANT = """
[model]
p = 1.5

[mollifier]
eps = 0.01

[grid]
dim = 1
cells = 16

[time]
t_end = 0.1
dt = 0.02

[boundary]
value = 0.3

[experiment]
name = constant
delta = 0.5
"""

SWEEP = """
[model]
p = 1.3

[grid]
dim = 1
cells = 16

[time]
t_end = 0.1
dt = 0.02

[initial]
kind = sine
amplitude = 0.5

[experiment]
name = sweep
eps_list = 0.2, 0.1
delta = 0.5
workers = 2
"""

PLANE = """
[model]
p = 1.3

[grid]
dim = 2
cells = 8

[time]
t_end = 0.1
dt = 0.02
"""


@pytest.fixture
def config_file(work_dir):
    def write(text, name="experiment.ini"):
        path = work_dir / name
        path.write_text(text)
        return str(path)

    return write


def _solve(cli_runner, config_path, runs_dir):
    result = cli_runner(cli, ["solve", "--config", config_path, "--runs-dir", runs_dir])
    assert result.exit_code == 0, result.output
    return result


def test_solve_constant_data(cli_runner, config_file, work_dir):
    _solve(cli_runner, config_file(CONSTANT), str(work_dir / "runs"))
    run_dir = work_dir / "runs" / "constant"
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["outcome"] == "completed"
    assert len(manifest["config_hash"]) == 64
    assert manifest["files"][0] == "series.csv"
    assert len(manifest["files"]) == 7
    header = (run_dir / "series.csv").read_text().splitlines()[0]
    assert header == "t,energy,sup_u,sup_V,newton_iters"
    series = np.loadtxt(run_dir / "series.csv", delimiter=",", skiprows=1)
    assert series.shape == (6, 5)
    assert np.all(series[:, 1] == series[0, 1])
    assert np.all(series[:, 2] == 0.3)


def test_reruns_are_byte_identical(cli_runner, config_file, work_dir):
    config_path = config_file(SWEEP.replace("eps_list = 0.2, 0.1", ""))
    for name in ("first", "second"):
        _solve(cli_runner, config_path, str(work_dir / name))
    for csv in ["series.csv"] + [f"snapshot_{k}.csv" for k in range(6)]:
        first = (work_dir / "first" / "sweep" / csv).read_bytes()
        assert first == (work_dir / "second" / "sweep" / csv).read_bytes(), csv


def test_analyze_run(cli_runner, config_file, work_dir):
    _solve(cli_runner, config_file(CONSTANT), str(work_dir / "runs"))
    run_dir = work_dir / "runs" / "constant"
    result = cli_runner(cli, ["analyze", "--run", str(run_dir)])
    assert result.exit_code == 0, result.output
    lines = (run_dir / "report.csv").read_text().splitlines()
    assert lines[0] == ",".join(REPORT_COLUMNS)
    reports = json.loads((run_dir / "report.json").read_text())
    checks = [r["check"] for r in reports]
    assert checks == [
        "max_principle",
        "vw_compatibility",
        "euler_identity",
        "facet_fraction",
        "holder_modulus",
    ]
    assert all(r["status"] == "pass" for r in reports)
    facet = next(r for r in reports if r["check"] == "facet_fraction")
    assert facet["params"]["final"] == 1.0


def test_analyze_flags_violations(cli_runner, config_file, work_dir):
    _solve(cli_runner, config_file(CONSTANT), str(work_dir / "runs"))
    run_dir = work_dir / "runs" / "constant"
    snapshot = run_dir / "snapshot_2.csv"
    rows = np.loadtxt(snapshot, delimiter=",", skiprows=1)
    rows[5, 1] = 0.5
    np.savetxt(snapshot, rows, fmt="%.17g", delimiter=",", header="x,u", comments="")
    out = work_dir / "reports"
    result = cli_runner(cli, ["analyze", "--run", str(run_dir), "--out", str(out)])
    assert result.exit_code == 3, result.output
    reports = json.loads((out / "report.json").read_text())
    assert reports[0]["check"] == "max_principle"
    assert reports[0]["status"] == "fail"
    assert reports[0]["margins"]["margin"] == pytest.approx(-0.2)


def test_analyze_rejects_tampered_manifest(cli_runner, config_file, work_dir):
    _solve(cli_runner, config_file(CONSTANT), str(work_dir / "runs"))
    path = work_dir / "runs" / "constant" / "manifest.json"
    manifest = json.loads(path.read_text())
    manifest["config_hash"] = "0" * 64
    path.write_text(json.dumps(manifest))
    result = cli_runner(cli, ["analyze", "--run", str(path.parent)])
    assert result.exit_code == 1
    assert "does not match" in result.output


def test_analyze_missing_run_dir(cli_runner, work_dir):
    result = cli_runner(cli, ["analyze", "--run", str(work_dir / "nowhere")])
    assert result.exit_code == 1
    assert "does not exist" in result.output


def test_sweep_and_analyze(cli_runner, config_file, work_dir):
    runs = work_dir / "runs"
    result = cli_runner(
        cli, ["sweep", "--config", config_file(SWEEP), "--runs-dir", str(runs)]
    )
    assert result.exit_code in (0, 3), result.output
    sweep_dir = runs / "sweep"
    assert (sweep_dir / "eps_0" / "manifest.json").exists()
    assert (sweep_dir / "eps_1" / "manifest.json").exists()
    matrix = np.loadtxt(sweep_dir / "convergence.csv", delimiter=",", skiprows=1)
    assert matrix.shape == (2, 2)
    assert matrix[0, 1] == matrix[1, 0] > 0.0
    sweep_reports = json.loads((sweep_dir / "report.json").read_text())
    assert [r["check"] for r in sweep_reports] == [
        "epsilon_convergence",
        "gradient_sup_series",
    ]
    result = cli_runner(cli, ["analyze", "--run", str(sweep_dir), "--out", str(runs)])
    assert result.exit_code in (0, 3), result.output
    checks = [r["check"] for r in json.loads((runs / "report.json").read_text())]
    assert checks.count("max_principle") == 2
    assert "epsilon_convergence" in checks
    assert "gradient_sup_series" in checks


def test_sweep_needs_radii(cli_runner, config_file, work_dir):
    result = cli_runner(
        cli,
        [
            "sweep",
            "--config",
            config_file(CONSTANT),
            "--runs-dir",
            str(work_dir / "runs"),
        ],
    )
    assert result.exit_code == 1
    assert "eps_list" in result.output


def test_verify_lemmas_is_deterministic(cli_runner, config_file, work_dir):
    config_path = config_file(CONSTANT)
    outputs = []
    for name in ("a", "b"):
        out = work_dir / name
        result = cli_runner(
            cli,
            [
                "verify",
                "lemmas",
                "--config",
                config_path,
                "--seed",
                "3",
                "--out",
                str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        outputs.append((out / "report.json").read_bytes())
    assert outputs[0] == outputs[1]
    reports = json.loads(outputs[0])
    assert [r["check"] for r in reports] == [
        "moser_equality",
        "moser_iteration",
        "absorbing_iteration",
    ]
    assert all(r["pass"] for r in reports)


def test_verify_lemmas_along_ladders(cli_runner, config_file, work_dir):
    config_path = config_file(
        PLANE.replace("p = 1.3", "p = 1.1\nsubcritical = true")
        .replace("dim = 2", "dim = 3")
        + "\n[experiment]\ns = 4\nq = 2\n"
    )
    out = work_dir / "lemmas"
    result = cli_runner(
        cli, ["verify", "lemmas", "--config", config_path, "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    checks = [r["check"] for r in json.loads((out / "report.json").read_text())]
    assert "moser_ladder:u" in checks
    assert "moser_ladder:V" in checks


def test_verify_composites(cli_runner, config_file, work_dir):
    out = work_dir / "composites"
    result = cli_runner(
        cli,
        ["verify", "composites", "--config", config_file(PLANE), "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    reports = json.loads((out / "report.json").read_text())
    assert {r["check"] for r in reports} == {
        "structure:composites",
        "composites:monotone_convergence",
        "composites:vw_compatibility",
    }


def test_verify_structure(cli_runner, config_file, work_dir):
    out = work_dir / "structure"
    result = cli_runner(
        cli,
        [
            "verify",
            "structure",
            "--config",
            config_file(PLANE),
            "--seed",
            "11",
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    checks = [r["check"] for r in json.loads((out / "report.json").read_text())]
    assert checks == ["structure:exact-euclidean", "structure:mollified"]


def test_usage_errors_exit_with_one(cli_runner, config_file):
    assert cli_runner(cli, ["solve"]).exit_code == 1
    assert cli_runner(cli, ["verify", "everything", "--config", "x.ini"]).exit_code == 1
    invalid = config_file(CONSTANT.replace("p = 1.5", "p = 0.9"))
    result = cli_runner(cli, ["solve", "--config", invalid])
    assert result.exit_code == 1
    assert "[model]" in result.output
    result = cli_runner(cli, ["analyze", "--run", ".", "--cylinder", "a,b"])
    assert result.exit_code == 1
