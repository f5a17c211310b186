import json
import os

import numpy as np
import pytest

from contention_lqg.cli import (CSV_HEADER, ConfigError, RunManifest,
                                emit_results, load_config, main, rows_to_csv)
from contention_lqg.simulator import SweepRow

MINIMAL = """
[[loop]]
A = 0.9
B = 1.0
C = 1.5
W = 1.0
V = 1.5
Q = 1.0
R = 0.1
"""


def _write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_minimal_config_defaults(tmp_path):
    loaded = load_config(_write(tmp_path, MINIMAL))
    exp = loaded.experiment
    assert exp.horizon == 100_000
    assert exp.runs == 10
    assert exp.record_level == "costs"
    assert exp.loops[0].policy == "pst"
    assert exp.network.mode == "abstracted"


def test_config_digest_stable(tmp_path):
    path = _write(tmp_path, MINIMAL)
    assert load_config(path).digest == load_config(path).digest
    other = _write(tmp_path, "master_seed = 5\n" + MINIMAL, "other.toml")
    assert load_config(path).digest != load_config(other).digest


def test_builtin_preset_expands():
    loaded = load_config("paper-example")
    spec = loaded.experiment.loops[0]
    assert float(spec.params.A[0, 0]) == 0.9
    assert float(spec.params.Q[0, 0]) == 1.0
    assert float(spec.params.R[0, 0]) == 0.1
    assert loaded.sweep.grid_p == [float(f"0.{i}") for i in range(1, 10)]
    assert loaded.sweep.grid_q == [0.5, 1.0]


def test_unknown_keys_listed(tmp_path):
    path = _write(tmp_path, MINIMAL + "\nhorizonn = 3\nbogus = 1\n")
    with pytest.raises(ConfigError) as err:
        load_config(path)
    assert "bogus" in str(err.value) and "horizonn" in str(err.value)


def test_missing_loop_section(tmp_path):
    with pytest.raises(ConfigError, match="loop"):
        load_config(_write(tmp_path, "master_seed = 1\n"))


def test_out_of_range_probability_rejected(tmp_path):
    path = _write(tmp_path, MINIMAL.replace("A = 0.9", "A = 0.9\np = 1.3"))
    with pytest.raises(ConfigError, match=r"\[0, 1\]"):
        load_config(path)


def test_env_var_seed_default(tmp_path, monkeypatch):
    monkeypatch.setenv("CONTENTION_LQG_SEED", "42")
    loaded = load_config(_write(tmp_path, MINIMAL))
    assert loaded.experiment.master_seed == 42
    # an explicit config value still wins over the environment
    explicit = _write(tmp_path, "master_seed = 7\n" + MINIMAL, "e.toml")
    assert load_config(explicit).experiment.master_seed == 7


def test_gains_command_prints_benchmark_values(capsys):
    assert main(["gains", "--config", "paper-example"]) == 0
    out = capsys.readouterr().out
    assert "K = -0.8233" in out
    assert "L = 0.4476" in out


def test_check_command_reports_stability(capsys):
    assert main(["check", "--config", "paper-example"]) == 0
    out = capsys.readouterr().out
    assert "plant ok" in out
    assert "yes" in out


def test_tune_command_equal_priorities(tmp_path, capsys):
    path = _write(tmp_path, MINIMAL + "\n[priorities]\nm = 4\n")
    assert main(["tune", "--config", path]) == 0
    out = capsys.readouterr().out
    assert out.count("p* = 0.25") == 4


def test_invalid_config_exit_code(tmp_path, capsys):
    path = _write(tmp_path, MINIMAL + "\nnonsense = true\n")
    assert main(["check", "--config", path]) == 2


def test_cost_single_point_divergence_exit(tmp_path, capsys):
    text = MINIMAL.replace("A = 0.9", "A = 1.2\np = 0.4")
    text += "\n[network]\nq = 0.5\n"
    assert main(["cost", "--config", _write(tmp_path, text)]) == 4


def test_simulate_repeatability(tmp_path, capsys):
    args = ["simulate", "--config", "paper-example", "--runs", "1",
            "--horizon", "100", "--seed", "7", "--grid-p", "0.5",
            "--grid-q", "1.0"]
    with pytest.warns(RuntimeWarning):
        assert main(list(args)) == 0
    first = capsys.readouterr().out
    with pytest.warns(RuntimeWarning):
        assert main(list(args)) == 0
    second = capsys.readouterr().out
    assert first == second
    assert first.splitlines()[0] == CSV_HEADER


def test_flag_overrides_config_with_warning(tmp_path, capsys):
    path = _write(tmp_path, "horizon = 500\nruns = 2\n" + MINIMAL)
    with pytest.warns(RuntimeWarning, match="override"):
        assert main(["simulate", "--config", path, "--horizon", "200"]) == 0


def test_emit_results_header_only(tmp_path):
    out = tmp_path / "empty.csv"
    emit_results([], str(out))
    assert out.read_text() == CSV_HEADER + "\n"


def test_emit_results_with_manifest(tmp_path):
    rows = [SweepRow(policy="pst", p=0.5, q=1.0, J_mean=1.23456789012,
                     J_stderr=0.01, trigger_freq=0.5, success_freq=0.5,
                     gain_pct=0.0, gain_stderr=0.0, diverged_runs=0)]
    out = tmp_path / "rows.csv"
    manifest = RunManifest(config_digest="d" * 64, master_seed=3,
                           tool_version="0.1.0",
                           started_at="2026-01-01T00:00:00+00:00",
                           finished_at="2026-01-01T00:00:01+00:00")
    emit_results(rows, str(out), manifest)
    text = out.read_text()
    assert "1.23456789" in text  # ten significant digits
    side = json.loads((tmp_path / "rows.csv.manifest.json").read_text())
    assert side["config_digest"] == "d" * 64
    assert side["master_seed"] == 3


def test_emit_results_unwritable_path():
    rows = []
    with pytest.raises(ConfigError, match="cannot write"):
        emit_results(rows, "/nonexistent-dir/out.csv")


def test_rows_to_csv_ten_significant_digits():
    row = SweepRow(policy="pst", p=0.1, q=0.5, J_mean=4.431755789876543,
                   J_stderr=0.0, trigger_freq=0.1, success_freq=0.05,
                   gain_pct=0.0, gain_stderr=0.0, diverged_runs=0)
    line = rows_to_csv([row]).splitlines()[1]
    assert line.split(",")[3] == "%.10g" % 4.431755789876543
    assert line.split(",")[3].startswith("4.43175579")


def test_simulate_writes_csv_and_manifest(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    args = ["simulate", "--config", "paper-example", "--runs", "2",
            "--horizon", "200", "--grid-p", "0.4,0.6", "--grid-q", "1.0",
            "--out", str(out)]
    with pytest.warns(RuntimeWarning):
        assert main(args) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 2 * 2 * 1  # two policies, two p values, one q
    manifest = json.loads((tmp_path / "sweep.csv.manifest.json").read_text())
    assert len(manifest["config_digest"]) == 64
    assert manifest["tool_version"]
