import json
import os

import numpy as np
import pytest

from bayescg_lab import reports
from bayescg_lab.cli import main, parse_config
from bayescg_lab.errors import UsageError
from bayescg_lab.problems import random_rank_problem, random_spd_problem


def run(args):
    return main(args)


# ---------------------------------------------------------------------------
# parsing

def test_parse_defaults_and_flag_override(tmp_path):
    out = str(tmp_path / "o.csv")
    config = parse_config(["solve", "--d", "17", "--seed", "7", "--out", out])
    assert config.command == "solve"
    assert config.options["d"] == 17
    assert config.options["seed"] == 7
    assert config.options["prior"] == "identity"
    assert config.out == out


def test_parse_rejects_duplicate_flags(tmp_path):
    with pytest.raises(UsageError):
        parse_config(["solve", "--prior", "identity", "--prior", "natural",
                      "--out", str(tmp_path / "o.csv")])


def test_parse_requires_out():
    with pytest.raises(UsageError):
        parse_config(["solve", "--d", "5"])


def test_parse_rejects_unknown_prior(tmp_path):
    with pytest.raises(UsageError):
        parse_config(["solve", "--prior", "bogus", "--out", str(tmp_path / "o.csv")])


def test_config_file_merge_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"d": 9, "seed": 4, "out": str(tmp_path / "from-file.csv")}))
    config = parse_config(["solve", "--config", str(cfg), "--seed", "9"])
    assert config.options["d"] == 9
    assert config.options["seed"] == 9  # flag wins
    assert config.out == str(tmp_path / "from-file.csv")


def test_config_file_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus_key": 1}))
    with pytest.raises(UsageError):
        parse_config(["solve", "--config", str(cfg), "--out", str(tmp_path / "o.csv")])


def test_missing_config_file_exit_code(tmp_path, capsys):
    code = run(["solve", "--config", str(tmp_path / "nope.json"),
                "--out", str(tmp_path / "o.csv")])
    assert code == 3
    record = json.loads(capsys.readouterr().err.strip())
    assert "nope.json" in record["message"]


def test_usage_error_exit_code(capsys):
    assert run([]) == 2
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "UsageError"


# ---------------------------------------------------------------------------
# solve command

def test_solve_writes_csv_and_meta(tmp_path, capsys):
    out = str(tmp_path / "solve.csv")
    assert run(["solve", "--d", "12", "--seed", "3", "--out", out]) == 0
    columns, rows = reports.read_csv(out)
    assert columns == reports.SOLVE_COLUMNS
    assert len(rows) >= 12
    assert float(rows[-1]["residual_norm"]) <= 1e-8
    meta = json.loads(open(out + ".meta.json").read())
    assert meta["config"]["seed"] == 3
    assert meta["status"] in ("residual_converged", "trace_converged", "max_iterations")


def test_solve_byte_identical_reruns(tmp_path):
    out1 = str(tmp_path / "a.csv")
    out2 = str(tmp_path / "b.csv")
    run(["solve", "--d", "10", "--seed", "5", "--out", out1])
    run(["solve", "--d", "10", "--seed", "5", "--out", out2])
    assert open(out1).read() == open(out2).read()


def test_solve_json_format_embeds_config(tmp_path):
    out = str(tmp_path / "solve.json")
    assert run(["solve", "--d", "8", "--seed", "2", "--format", "json", "--out", out]) == 0
    payload = json.loads(open(out).read())
    assert payload["config"]["command"] == "solve"
    assert payload["config"]["seed"] == 2
    assert payload["results"]["table"]["columns"] == reports.SOLVE_COLUMNS


def test_solve_from_problem_file(tmp_path):
    problem = random_spd_problem(6, 11)
    pfile = str(tmp_path / "problem.json")
    reports.write_problem_file(pfile, problem)
    out = str(tmp_path / "solve.csv")
    assert run(["solve", "--problem-file", pfile, "--out", out]) == 0
    _, rows = reports.read_csv(out)
    assert float(rows[-1]["error_norm"]) <= 1e-8


def test_solve_missing_problem_file(tmp_path, capsys):
    code = run(["solve", "--problem-file", str(tmp_path / "absent.json"),
                "--out", str(tmp_path / "o.csv")])
    assert code == 3
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "absent.json" in record["message"]


def test_solve_breakdown_maps_to_numerical_exit_code(tmp_path, capsys):
    problem = random_rank_problem(6, 6, 2, 3)
    pfile = str(tmp_path / "singular.json")
    reports.write_problem_file(pfile, problem)
    out = str(tmp_path / "o.csv")
    code = run(["solve", "--problem-file", pfile, "--residual-tol", "1e-300",
                "--trace-tol", "1e-300", "--out", out])
    assert code == 4
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "BreakdownError"


def test_solve_with_prior_file(tmp_path):
    cov = np.diag([1.0, 2.0, 3.0, 4.0])
    mfile = str(tmp_path / "cov.json")
    reports.write_matrix_file(mfile, cov)
    out = str(tmp_path / "solve.csv")
    assert run(["solve", "--d", "4", "--prior", f"file:{mfile}", "--out", out]) == 0


# ---------------------------------------------------------------------------
# other commands, smoke level

def test_calibrate_csv_schema(tmp_path):
    out = str(tmp_path / "cal.csv")
    assert run(["calibrate", "--d", "8", "--m", "2", "--replications", "80",
                "--seed", "5", "--out", out]) == 0
    columns, rows = reports.read_csv(out)
    assert columns[:3] == ["replication", "z", "dof"]
    assert columns[3:] == ["cover_50", "cover_80", "cover_90", "cover_95"]
    assert len(rows) == 80


def test_calibrate_scenario_flag(tmp_path):
    out = str(tmp_path / "cal.json")
    assert run(["calibrate", "--d", "8", "--m", "2", "--replications", "60",
                "--scenario", "over_dispersed", "--format", "json", "--out", out]) == 0
    payload = json.loads(open(out).read())
    coverage = payload["results"]["credible_coverage"]
    assert all(v > float(k) for k, v in coverage.items())


def test_calibrate_unknown_scenario(tmp_path, capsys):
    code = run(["calibrate", "--scenario", "nope", "--out", str(tmp_path / "c.csv")])
    assert code == 2


def test_oracle_compare_rows(tmp_path):
    out = str(tmp_path / "oracle.csv")
    assert run(["oracle-compare", "--d", "6", "--seed", "7", "--out", out]) == 0
    columns, rows = reports.read_csv(out)
    assert columns == reports.ORACLE_COLUMNS
    # (d + 1) iterations x (1 exact + 4 weights)
    assert len(rows) == 7 * 5
    exact_rows = [r for r in rows if r["comparison"] == "exact_posterior"]
    assert all(float(r["mean_diff"]) <= 1e-8 for r in exact_rows)


def test_oracle_compare_single_weight(tmp_path):
    out = str(tmp_path / "oracle.csv")
    assert run(["oracle-compare", "--d", "5", "--weight", "a", "--out", out]) == 0
    _, rows = reports.read_csv(out)
    tags = {r["weight"] for r in rows if r["comparison"] == "mu_m"}
    assert tags == {"a"}


def test_pinv_study_csv(tmp_path):
    out = str(tmp_path / "pinv.csv")
    assert run(["pinv-study", "--c", "7", "--d", "7", "--rank", "3",
                "--replications", "4", "--seed", "9", "--out", out]) == 0
    columns, rows = reports.read_csv(out)
    assert columns == reports.PINV_COLUMNS
    statuses = {r["status"] for r in rows}
    assert statuses <= {"breakdown", "residual_converged", "max_iterations"}


def test_cost_study_runs_small(tmp_path):
    out = str(tmp_path / "cost.csv")
    assert run(["cost-study", "--d", "48", "--iters", "12", "--trials", "1",
                "--out", out]) == 0
    columns, rows = reports.read_csv(out)
    assert columns == reports.COST_COLUMNS
    assert [r["arm"] for r in rows] == ["dense", "sparse_diagonal"]
    assert float(rows[1]["flop_ratio"]) < float(rows[0]["flop_ratio"])


def test_invariants_command(tmp_path):
    out = str(tmp_path / "inv.csv")
    assert run(["invariants", "--d", "8", "--seed", "3", "--out", out]) == 0
    columns, rows = reports.read_csv(out)
    assert columns == reports.INVARIANT_COLUMNS
    names = {r["name"] for r in rows}
    assert {"trace_identity", "rank", "oracle_mean_gap", "oracle_cov_gap",
            "conjugacy_offdiag"} <= names
    assert all(float(r["gap"]) <= 1e-6 for r in rows)


def test_calibrate_json_round_trips_into_equal_values(tmp_path):
    from bayescg_lab.calibration import CalibrationConfig, run_calibration
    from bayescg_lab.solver import PriorSpec

    out = str(tmp_path / "cal.json")
    assert run(["calibrate", "--d", "8", "--m", "2", "--replications", "50",
                "--seed", "21", "--format", "json", "--out", out]) == 0
    payload = json.loads(open(out).read())
    direct = run_calibration(CalibrationConfig(
        d=8, m=2, generating_prior=PriorSpec.identity(),
        solver_prior=PriorSpec.identity(), replications=50, rng_seed=21))
    assert payload["results"]["z_samples"] == [float(z) for z in direct.z_samples]
    assert payload["results"]["mean_z"] == direct.mean_z


def test_threads_env_does_not_change_results(tmp_path, monkeypatch):
    out1 = str(tmp_path / "c1.csv")
    run(["calibrate", "--d", "6", "--m", "2", "--replications", "40",
         "--seed", "5", "--out", out1])
    monkeypatch.setenv("BAYESCG_LAB_THREADS", "4")
    out2 = str(tmp_path / "c2.csv")
    run(["calibrate", "--d", "6", "--m", "2", "--replications", "40",
         "--seed", "5", "--out", out2])
    assert open(out1).read() == open(out2).read()
