"""CLI behavior: artifacts, exit codes, determinism, sweep resilience."""

import csv
import json
import os

import numpy as np
import pytest

from certitrain.cli import (
    EXIT_CONFIG,
    EXIT_DIVERGENCE,
    EXIT_ERROR,
    EXIT_OK,
    EXIT_ORACLE,
    main,
)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip().startswith("{") else out


def test_gen_data_and_idempotent_rerun(tmp_path, capsys):
    out = str(tmp_path / "data")
    code, summary = run_cli(capsys, "gen-data", "--out", out, "--seed", "0")
    assert code == EXIT_OK
    assert summary["sizes"] == {"train": 1000, "val": 200, "test": 200}
    first = (tmp_path / "data" / "two_moons.npz").read_bytes()
    code, _ = run_cli(capsys, "gen-data", "--out", out, "--seed", "0")
    assert code == EXIT_OK
    assert (tmp_path / "data" / "two_moons.npz").read_bytes() == first


def test_train_eps_zero_smoke(tmp_path, capsys):
    out = str(tmp_path / "run")
    code, metrics = run_cli(
        capsys, "train", "--out", out, "--epochs", "3", "--eps", "0", "--eps-test", "0",
    )
    assert code == EXIT_OK
    assert metrics["final_max_radius"] == 0.0
    # with zero radii everywhere, certified accuracy equals clean accuracy
    assert metrics["certified_accuracy_test"] == metrics["clean_accuracy_test"]
    assert os.path.exists(metrics["checkpoint"])
    assert os.path.exists(os.path.join(out, "metrics.json"))


def test_train_determinism(tmp_path, capsys):
    code1, m1 = run_cli(capsys, "train", "--out", str(tmp_path / "a"), "--epochs", "5", "--seed", "3")
    code2, m2 = run_cli(capsys, "train", "--out", str(tmp_path / "b"), "--epochs", "5", "--seed", "3")
    assert code1 == code2 == EXIT_OK
    assert m1["certified_accuracy_test"] == m2["certified_accuracy_test"]
    assert m1["final_max_radius"] == m2["final_max_radius"]


def test_train_divergence_exit_code(tmp_path, capsys):
    code, payload = run_cli(
        capsys, "train", "--out", str(tmp_path / "div"), "--epochs", "60",
        "--eps", "0.3", "--lr", "5.0",
    )
    assert code == EXIT_DIVERGENCE
    assert payload["error"] == "divergence"
    assert os.path.exists(payload["checkpoint"])


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense_key": 1}))
    code = main(["train", "--config", str(bad), "--out", str(tmp_path / "x")])
    assert code == EXIT_CONFIG
    code = main(["train", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x")])
    assert code == EXIT_CONFIG


def test_missing_dataset_is_an_error(tmp_path, capsys):
    code = main(
        ["train", "--dataset", "mnist17", "--out", str(tmp_path / "m"),
         "--data-dir", str(tmp_path / "nowhere")]
    )
    assert code == EXIT_ERROR


def test_certify_and_oracle_round_trip(tmp_path, capsys):
    out = str(tmp_path / "run")
    code, metrics = run_cli(
        capsys, "train", "--out", out, "--epochs", "8", "--eps", "1e-3", "--seed", "1",
    )
    assert code == EXIT_OK
    ck = metrics["checkpoint"]

    code, summary = run_cli(capsys, "certify", "--checkpoint", ck, "--out", str(tmp_path / "cert"))
    assert code == EXIT_OK
    assert summary["certified_accuracy"] == metrics["certified_accuracy_test"]
    with open(summary["per_sample_csv"]) as fh:
        assert len(list(csv.DictReader(fh))) == summary["n_samples"]

    # eps_test = 0 reduces to clean accuracy of the interval model's center
    code, clean = run_cli(
        capsys, "certify", "--checkpoint", ck, "--eps-test", "0", "--out", str(tmp_path / "c0"),
    )
    assert code == EXIT_OK
    assert clean["certified_accuracy"] >= summary["certified_accuracy"]

    code, report = run_cli(
        capsys, "oracle", "--checkpoint", ck, "--samples", "3",
        "--out", str(tmp_path / "oracle"),
    )
    assert code == EXIT_OK
    assert report["passed"] and report["violations"] == 0
    assert os.path.exists(tmp_path / "oracle" / "oracle_report.json")

    code, report = run_cli(
        capsys, "oracle", "--checkpoint", ck, "--samples", "2", "--fault-injection",
    )
    assert code == EXIT_ORACLE
    assert report["violations"] > 0


def test_missing_checkpoint_error(tmp_path, capsys):
    code = main(["certify", "--checkpoint", str(tmp_path / "no.npz"), "--out", str(tmp_path / "o")])
    assert code == EXIT_ERROR


def test_sweep_grid_with_partial_failures(tmp_path, capsys):
    spec = {
        "dataset": "two-moons",
        "base": {"epochs": 4, "batch_size": 100},
        "grid": {"eps": [0.001, 0.4], "lr": [0.01, 5.0]},
        "seeds": [0, 1],
    }
    cfg_path = tmp_path / "grid.json"
    cfg_path.write_text(json.dumps(spec))
    code, summary = run_cli(
        capsys, "sweep", "--config", str(cfg_path), "--out", str(tmp_path / "sweep"),
    )
    assert code == EXIT_OK
    assert summary["rows"] == 8
    with open(summary["csv"]) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 8
    statuses = {r["status"] for r in rows}
    assert any(s.startswith("diverged") for s in statuses)  # eps=0.4, lr=5 blows up
    assert "ok" in statuses
    cells = summary["cells"]
    assert len(cells) == 4
    for cell in cells:
        assert cell["n_runs"] == 2


def test_sweep_rejects_unknown_axis(tmp_path, capsys):
    cfg_path = tmp_path / "grid.json"
    cfg_path.write_text(json.dumps({"grid": {"momentum": [0.9]}}))
    code = main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "s")])
    assert code == EXIT_CONFIG


def test_sweep_explicit_cells(tmp_path, capsys):
    spec = {
        "dataset": "two-moons",
        "base": {"eps": 0.001, "eps_test": 0.001},
        "cells": [
            {"lr": 0.01, "epochs": 3, "batch_size": 100},
            {"lr": 1.0, "epochs": 1, "batch_size": 1000},
        ],
        "seeds": [0],
    }
    cfg_path = tmp_path / "cells.json"
    cfg_path.write_text(json.dumps(spec))
    code, summary = run_cli(
        capsys, "sweep", "--config", str(cfg_path), "--out", str(tmp_path / "s"),
    )
    assert code == EXIT_OK
    assert summary["rows"] == 2
    assert {c["lr"] for c in summary["cells"]} == {0.01, 1.0}


def test_sweep_rejects_unknown_base_key(tmp_path, capsys):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps({"base": {"momentum": 0.9}, "grid": {"eps": [0.001]}}))
    code = main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "s")])
    assert code == EXIT_CONFIG


def test_shipped_sweep_configs_are_wellformed():
    import pathlib

    cfg_dir = pathlib.Path(__file__).resolve().parents[1] / "configs"
    specs = sorted(cfg_dir.glob("*.json"))
    assert len(specs) >= 4
    for path in specs:
        spec = json.loads(path.read_text())
        assert "grid" in spec or "cells" in spec
        assert spec.get("dataset", "two-moons") in ("two-moons", "mnist17")


def test_train_with_pretraining(tmp_path, capsys):
    code, metrics = run_cli(
        capsys, "train", "--out", str(tmp_path / "p"), "--epochs", "5",
        "--pretrain-target", "0.8", "--seed", "2",
    )
    assert code == EXIT_OK
    pre = metrics["pretrain"]
    assert pre["target"] == 0.8
    assert 0.0 <= pre["achieved"] <= 1.0
    assert isinstance(pre["below_target"], bool)
    assert "clean_test_accuracy" in pre


def test_train_mnist17_on_synthetic_cache(tmp_path, capsys):
    from test_data import synth_mnist_cache

    cache = synth_mnist_cache(tmp_path, n_train=120, n_test=40)
    cfg = tmp_path / "mnist_cfg.json"
    cfg.write_text(json.dumps({"val_size": 5, "epochs": 2, "batch_size": 10}))
    code, metrics = run_cli(
        capsys, "train", "--dataset", "mnist17", "--config", str(cfg),
        "--data-dir", str(cache), "--out", str(tmp_path / "m"),
    )
    assert code == EXIT_OK
    assert "certified_accuracy_test" in metrics
    assert os.path.exists(metrics["checkpoint"])


def test_sweep_parallel_matches_serial(tmp_path, capsys):
    spec = {
        "dataset": "two-moons",
        "base": {"epochs": 3},
        "grid": {"eps": [0.001, 0.01]},
        "seeds": [0, 1],
    }
    cfg_path = tmp_path / "grid.json"
    cfg_path.write_text(json.dumps(spec))
    code, _ = run_cli(capsys, "sweep", "--config", str(cfg_path), "--out", str(tmp_path / "ser"))
    assert code == EXIT_OK
    code, _ = run_cli(
        capsys, "sweep", "--config", str(cfg_path), "--out", str(tmp_path / "par"), "--workers", "4",
    )
    assert code == EXIT_OK

    def strip_runtime(path):
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        for r in rows:
            r.pop("runtime_s")
        return rows

    assert strip_runtime(tmp_path / "ser" / "sweep.csv") == strip_runtime(tmp_path / "par" / "sweep.csv")


def test_summaries_carry_resolved_config(tmp_path, capsys):
    code, metrics = run_cli(capsys, "train", "--out", str(tmp_path / "t"), "--epochs", "2", "--lr-decay", "0.01")
    assert code == EXIT_OK
    assert metrics["config"]["lr_decay"] == 0.01
    code, summary = run_cli(
        capsys, "certify", "--checkpoint", metrics["checkpoint"], "--out", str(tmp_path / "c"),
    )
    assert code == EXIT_OK
    assert summary["config"]["epochs"] == 2
