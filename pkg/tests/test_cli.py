from __future__ import annotations

import json
import subprocess
import sys

import pytest

from antiplan.bench import read_csv
from antiplan.blockworld import TaskSpec, generate_environment, load_env, save_env
from antiplan.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from antiplan.planner import optimal_cost

TINY_BENCH = ["bench", "--env-seeds", "1000", "--sequences", "1", "--tasks", "2",
              "--prep-iterations", "5"]


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def env_file(tmp_path):
    return save_env(generate_environment(3), tmp_path)


def _some_task(path):
    return str(load_env(path).task_distribution.tasks[0])


def _some_task_for_seed(seed):
    return str(generate_environment(seed).task_distribution.tasks[0])


# ---------------------------------------------------------------------------
# Exit status
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["bench", "--no-such-flag"],
    ["solve", "--env-seed", "1"],                          # --task missing
    ["plan", "--task", "A:red"],                           # no environment
    ["train"],                                             # --data missing
    ["plan", "--env-seed", "1", "--task", "A:red", "--estimator", "learned"],
    ["generate-envs", "--seeds", "x-y"],
])
def test_usage_errors_exit_one(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == EXIT_USAGE
    assert "error" in err or "usage" in err


def test_unknown_flag_prints_usage(capsys):
    code, _, err = run(["bench", "--bogus"], capsys)
    assert code == EXIT_USAGE and err.startswith("usage:")


def test_help_exits_zero(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "generate-envs" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["solve", "--env", "/nonexistent/env.json", "--task", "A:red"],
    ["summarize", "/nonexistent/bench.csv"],
    ["solve", "--env-seed", "1", "--task", "Zq:red"],
])
def test_runtime_errors_exit_two(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == EXIT_RUNTIME
    assert "error" in err


def test_bad_config_file_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"no_such_option": 1}))
    assert run(["generate-envs", "--config", str(cfg)], capsys)[0] == EXIT_USAGE
    cfg.write_text("[1, 2]")
    assert run(["generate-envs", "--config", str(cfg)], capsys)[0] == EXIT_USAGE


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def test_generate_envs(tmp_path, capsys):
    code, out, _ = run(["generate-envs", "--seeds", "0-2,5", "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    assert sorted(p.name for p in tmp_path.iterdir()) == [f"env_{s}.json" for s in (0, 1, 2, 5)]
    assert len(out.splitlines()) == 4


def test_config_file_supplies_options(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seeds": "4", "out": str(tmp_path / "e")}))
    assert run(["generate-envs", "--config", str(cfg)], capsys)[0] == EXIT_OK
    assert (tmp_path / "e" / "env_4.json").exists()
    # explicit flags win over the file
    assert run(["generate-envs", "--config", str(cfg), "--seeds", "6"], capsys)[0] == EXIT_OK
    assert (tmp_path / "e" / "env_6.json").exists()


@pytest.mark.parametrize("engine", ["astar", "macro"])
def test_solve_reports_optimal_cost(env_file, engine, capsys):
    task = _some_task(env_file)
    code, out, _ = run(["solve", "--env", str(env_file), "--task", task, "--engine", engine], capsys)
    assert code == EXIT_OK
    plan = json.loads(out)
    env = generate_environment(3)
    assert plan["cost"] == pytest.approx(optimal_cost(env, env.initial_state, TaskSpec.parse(task)))


@pytest.mark.parametrize("mode", ["myopic", "ap"])
def test_plan_command(env_file, mode, capsys):
    task = _some_task(env_file)
    code, out, _ = run(["plan", "--env", str(env_file), "--task", task, "--mode", mode], capsys)
    assert code == EXIT_OK
    res = json.loads(out)
    assert res["total_cost"] == pytest.approx(res["immediate_cost"] + res["future_cost"])


def test_prepare_command(env_file, capsys):
    code, out, _ = run(["prepare", "--env", str(env_file), "--iterations", "5", "--seed", "2"], capsys)
    assert code == EXIT_OK
    res = json.loads(out)
    assert res["value"] <= res["initial_value"]


def test_bench_then_summarize(tmp_path, capsys):
    out = tmp_path / "b.csv"
    summary = tmp_path / "s.json"
    code, table, _ = run(TINY_BENCH + ["--out", str(out), "--summary-json", str(summary)], capsys)
    assert code == EXIT_OK
    assert len(read_csv(out)) == 2 * 4
    assert "prep+ap" in table
    code, printed, _ = run(["summarize", str(out), "--json"], capsys)
    assert code == EXIT_OK
    assert json.loads(printed) == json.loads(summary.read_text())


def test_bench_same_seed_same_csv(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(TINY_BENCH + ["--out", str(a)], capsys)[0] == EXIT_OK
    assert run(TINY_BENCH + ["--out", str(b)], capsys)[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_gen_data_and_train(tmp_path, capsys):
    data = tmp_path / "data"
    code, _, _ = run(["gen-data", "--train-envs", "2", "--test-envs", "1", "--states-per-env", "3",
                      "--out", str(data), "--seed", "1"], capsys)
    assert code == EXIT_OK
    assert len((data / "train.jsonl").read_text().splitlines()) == 6
    assert len((data / "test.jsonl").read_text().splitlines()) == 3
    model = tmp_path / "m.json"
    code, out, _ = run(["train", "--data", str(data / "train.jsonl"), "--test", str(data / "test.jsonl"),
                        "--epochs", "2", "--out", str(model)], capsys)
    assert code == EXIT_OK
    report = json.loads(out)
    assert len(report["train_mae_per_epoch"]) == 2 and "test_mae" in report
    code, out, _ = run(["plan", "--env-seed", "3", "--task", _some_task_for_seed(3), "--estimator", "learned",
                        "--model", str(model)], capsys)
    assert code == EXIT_OK


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "antiplan.cli", "generate-envs", "--seeds", "1",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "env_1.json").exists()
    proc = subprocess.run([sys.executable, "-m", "antiplan.cli", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 1 and "usage" in proc.stderr
