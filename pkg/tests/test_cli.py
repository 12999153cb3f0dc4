import json

import numpy as np
import pytest

from mtident import write_matrix, write_vector
from mtident.cli import main


def _write_cfg(path, **over):
    raw = {
        "horizon": 12,
        "seed": 4,
        "system": {
            "kind": "generated",
            "seed": 11,
            "n": 10,
            "l": 2,
            "spectral_radius": [0.55, 0.9],
        },
        "schedule": {"period": 5, "key": "cli-key"},
    }
    raw.update(over)
    path.write_text(json.dumps(raw))
    return path


def test_gen_system_analyze_simulate_round_trip(tmp_path, capsys):
    sysdir = tmp_path / "sys"
    assert main(
        ["gen-system", "--seed", "5", "--out-dir", str(sysdir), "--n", "10", "--l", "2", "--period", "6"]
    ) == 0
    for name in ("A_0.txt", "A_1.txt", "C_0.txt", "C_1.txt", "Q.txt", "R.txt", "x0_mean.txt", "P0.txt", "config.json"):
        assert (sysdir / name).exists()
    cfg = json.loads((sysdir / "config.json").read_text())
    assert cfg["horizon"] == 60 and cfg["system"]["kind"] == "explicit"
    capsys.readouterr()

    assert main(["analyze", "--config", str(sysdir / "config.json")]) == 0
    out = capsys.readouterr().out
    assert "sparse observability margins" in out
    assert "configurations: 2, state dimension: 10, sensors: 10" in out

    simdir = tmp_path / "sim"
    assert main(
        ["simulate", "--config", str(sysdir / "config.json"), "--out-dir", str(simdir)]
    ) == 0
    lines = (simdir / "metrics.csv").read_text().splitlines()
    assert lines[0] == "# mtident-metrics-v1"
    assert len(lines) == 2 + 60  # schema + header + one row per step
    assert (simdir / "events.csv").exists() and (simdir / "summary.json").exists()


def test_simulate_is_reproducible_and_seed_override_changes_output(tmp_path):
    cfg = _write_cfg(tmp_path / "cfg.json")
    for d in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()
    assert main(
        ["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / "c"), "--seed-override", "999"]
    ) == 0
    assert (tmp_path / "a" / "metrics.csv").read_bytes() != (tmp_path / "c" / "metrics.csv").read_bytes()


def test_simulate_jsonl_format(tmp_path):
    cfg = _write_cfg(tmp_path / "cfg.json")
    out = tmp_path / "out"
    assert main(
        ["simulate", "--config", str(cfg), "--out-dir", str(out), "--format", "jsonl"]
    ) == 0
    lines = (out / "metrics.jsonl").read_text().splitlines()
    assert len(lines) == 12
    json.loads(lines[0])


def test_montecarlo_cli(tmp_path, capsys):
    cfg = _write_cfg(tmp_path / "cfg.json", horizon=10)
    out = tmp_path / "mc"
    assert main(
        ["montecarlo", "--config", str(cfg), "--out-dir", str(out), "--trials", "2"]
    ) == 0
    assert "2 trial(s)" in capsys.readouterr().out
    assert (out / "trials.csv").exists()
    agg = json.loads((out / "aggregate.json").read_text())
    assert agg["trials"] == 2


def test_configuration_problems_exit_with_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"horizon": 10, "seed": 1, "oops": True}))
    assert main(["simulate", "--config", str(bad), "--out-dir", str(tmp_path / "o")]) == 2
    assert "configuration error" in capsys.readouterr().err
    assert main(
        ["simulate", "--config", str(tmp_path / "missing.json"), "--out-dir", str(tmp_path / "o")]
    ) == 2


def test_numerical_failures_exit_with_3(tmp_path, capsys):
    # explicit system with a singular measurement covariance
    rng = np.random.default_rng(3)
    A = 0.5 * np.eye(2)
    C = np.eye(2)
    write_matrix(tmp_path / "A.txt", A)
    write_matrix(tmp_path / "C.txt", C)
    write_matrix(tmp_path / "Q.txt", np.eye(2))
    write_matrix(tmp_path / "R.txt", np.zeros((2, 2)))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "horizon": 5,
                "seed": 1,
                "system": {
                    "kind": "explicit",
                    "pairs": [{"A": "A.txt", "C": "C.txt"}],
                    "Q": "Q.txt",
                    "R": "R.txt",
                },
            }
        )
    )
    assert main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 3
    assert "numerical failure" in capsys.readouterr().err
