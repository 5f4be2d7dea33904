"""Command-line front end: dataset prep, training, certification, sweeps, oracle runs.

Configs are JSON files overridable by flags; every command prints a JSON
summary to stdout and writes artifacts (checkpoints, CSV tables, reports)
into the output directory together with the fully resolved config.

Exit codes: 0 success, 1 IO/parse failure, 2 invalid config, 3 training
divergence, 4 oracle violation.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor, as_completed

import numpy as np

from . import data as data_mod
from .certifier import certified_accuracy, write_results_csv
from .checkpoint import load_checkpoint, save_checkpoint
from .losses import BINARY_CROSS_ENTROPY
from .model import build_model
from .oracle import replay_containment
from .trainer import (
    DivergenceError,
    PerturbedDataset,
    TrainConfig,
    accuracy,
    lift_to_interval,
    pretrain_concrete,
    train_certified,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_ORACLE = 4

# Default profiles; the two-moons noise level and layer width are the values
# the bundled result tables were produced with.
PROFILES = {
    "two-moons": {
        "dataset": "two-moons",
        "eps": 1e-3,
        "eps_test": 1e-3,
        "lr": 0.01,
        "lr_decay": 0.0,
        "batch_size": 100,
        "epochs": 100,
        "hidden": [20],
        "loss": BINARY_CROSS_ENTROPY,
        "seed": 0,
        "data_seed": 0,
        "noise": 0.1,
        "train_size": 1000,
        "val_size": 200,
        "test_size": 200,
        "pretrain_target": None,
        "pretrain_subset": 100,
        "pretrain_lr": 5.0,
        "pretrain_epochs": 300,
        "divergence_ceiling": 1e3,
        "data_dir": None,
    },
    "mnist17": {
        "dataset": "mnist17",
        "eps": 1e-4,
        "eps_test": 1e-4,
        "lr": 0.05,
        "lr_decay": 0.0,
        "batch_size": 100,
        "epochs": 100,
        "hidden": [20],
        "loss": BINARY_CROSS_ENTROPY,
        "seed": 0,
        "data_seed": 0,
        "val_size": 2000,
        "pretrain_target": None,
        "pretrain_subset": 100,
        "pretrain_lr": 5.0,
        "pretrain_epochs": 300,
        "divergence_ceiling": 1e3,
        "data_dir": None,
    },
}


class ConfigError(ValueError):
    pass


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e


def resolve_config(args) -> dict:
    """Profile defaults <- config file <- CLI flag overrides."""
    file_cfg = _load_json(args.config) if getattr(args, "config", None) else {}
    dataset = getattr(args, "dataset", None) or file_cfg.get("dataset") or "two-moons"
    if dataset not in PROFILES:
        raise ConfigError(f"unknown dataset {dataset!r}; choose from {sorted(PROFILES)}")
    cfg = copy.deepcopy(PROFILES[dataset])
    unknown = set(file_cfg) - set(cfg)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg.update(file_cfg)
    cfg["dataset"] = dataset
    for flag, key in (
        ("seed", "seed"),
        ("eps", "eps"),
        ("eps_test", "eps_test"),
        ("lr", "lr"),
        ("lr_decay", "lr_decay"),
        ("batch_size", "batch_size"),
        ("epochs", "epochs"),
        ("pretrain_target", "pretrain_target"),
        ("data_dir", "data_dir"),
    ):
        val = getattr(args, flag, None)
        if val is not None:
            cfg[key] = val
    hidden = getattr(args, "hidden", None)
    if hidden is not None:
        try:
            cfg["hidden"] = [int(h) for h in hidden.split(",") if h.strip()]
        except ValueError as e:
            raise ConfigError(f"--hidden expects comma-separated integers: {hidden!r}") from e
    try:
        _ = train_config_from(cfg)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return cfg


def train_config_from(cfg: dict, **overrides) -> TrainConfig:
    base = dict(
        learning_rate=cfg["lr"],
        batch_size=cfg["batch_size"],
        max_epochs=cfg["epochs"],
        seed=cfg["seed"],
        hidden_sizes=tuple(cfg["hidden"]),
        loss=cfg["loss"],
        lr_decay=cfg.get("lr_decay", 0.0),
        divergence_ceiling=cfg.get("divergence_ceiling", 1e3),
    )
    base.update(overrides)
    return TrainConfig(**base)


def load_splits(cfg: dict):
    """(train, val, test) Datasets for the resolved config."""
    if cfg["dataset"] == "two-moons":
        n = cfg["train_size"] + cfg["val_size"] + cfg["test_size"]
        ds = data_mod.gen_two_moons(n, noise_std=cfg["noise"], seed=cfg["data_seed"])
        return data_mod.split_dataset(
            ds, (cfg["train_size"], cfg["val_size"], cfg["test_size"]), seed=cfg["data_seed"]
        )
    return data_mod.load_mnist17(
        cfg.get("data_dir"), val_size=cfg["val_size"], seed=cfg["data_seed"]
    )


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, default=float)
    sys.stdout.write("\n")


def run_training(cfg: dict):
    """Shared train pipeline; returns (model, trace, metrics dict)."""
    train, val, test = load_splits(cfg)
    dataset = PerturbedDataset(train.features, train.labels, cfg["eps"], cfg["eps_test"])
    tc = train_config_from(cfg)
    metrics = {"config": cfg}

    t0 = time.time()
    if cfg.get("pretrain_target"):
        pc = train_config_from(
            cfg, learning_rate=cfg["pretrain_lr"], max_epochs=cfg["pretrain_epochs"]
        )
        params, achieved = pretrain_concrete(
            dataset,
            pc,
            subset_size=cfg["pretrain_subset"],
            target_accuracy=cfg["pretrain_target"],
            eval_features=val.features,
            eval_labels=val.labels,
        )
        model = lift_to_interval(params, tc.loss)
        metrics["pretrain"] = {
            "target": cfg["pretrain_target"],
            "achieved": achieved,
            "below_target": achieved < cfg["pretrain_target"],
            "clean_test_accuracy": accuracy(model, test.features, test.labels),
        }
    else:
        out_dim = 1 if tc.loss == BINARY_CROSS_ENTROPY else int(dataset.labels.max()) + 1
        rng = np.random.default_rng([tc.seed, 0])
        model = build_model(dataset.n_features, tc.hidden_sizes, out_dim, tc.loss, rng)

    model, trace = train_certified(model, dataset, tc)
    metrics["train_seconds"] = time.time() - t0
    metrics["steps"] = trace.n_steps
    metrics["final_max_radius"] = trace.max_radius[-1] if trace.max_radius else 0.0

    for tag, split in (("val", val), ("test", test)):
        res = certified_accuracy(model, split.features, split.labels, cfg["eps_test"])
        metrics[f"certified_accuracy_{tag}"] = res.certified_accuracy
        metrics[f"counts_{tag}"] = res.counts
        metrics[f"clean_accuracy_{tag}"] = accuracy(model, split.features, split.labels)
    return model, trace, metrics


def cmd_gen_data(args) -> int:
    cfg = resolve_config(args)
    if cfg["dataset"] != "two-moons":
        raise ConfigError("gen-data synthesizes two-moons; use fetch-mnist for MNIST")
    os.makedirs(args.out, exist_ok=True)
    train, val, test = load_splits(cfg)
    path = os.path.join(args.out, "two_moons.npz")
    np.savez_compressed(
        path,
        train_features=train.features,
        train_labels=train.labels,
        val_features=val.features,
        val_labels=val.labels,
        test_features=test.features,
        test_labels=test.labels,
        meta=np.frombuffer(json.dumps(cfg).encode(), dtype=np.uint8),
    )
    _emit(
        {
            "dataset": "two-moons",
            "path": path,
            "sizes": {"train": train.n_samples, "val": val.n_samples, "test": test.n_samples},
            "noise": cfg["noise"],
            "data_seed": cfg["data_seed"],
        }
    )
    return EXIT_OK


def cmd_fetch_mnist(args) -> int:
    paths = data_mod.fetch_mnist(args.data_dir)
    _emit({"fetched": {k: str(v) for k, v in paths.items()}})
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    os.makedirs(args.out, exist_ok=True)
    try:
        model, trace, metrics = run_training(cfg)
    except DivergenceError as e:
        ck = os.path.join(args.out, "checkpoint_diverged.npz")
        save_checkpoint(ck, e.model, e.trace, cfg)
        _emit({"error": "divergence", "step": e.step, "message": str(e), "checkpoint": ck})
        return EXIT_DIVERGENCE
    ck = os.path.join(args.out, "checkpoint.npz")
    save_checkpoint(ck, model, trace, cfg)
    metrics["checkpoint"] = ck
    with open(os.path.join(args.out, "metrics.json"), "w") as fh:
        json.dump(metrics, fh, indent=2, default=float)
    _emit(metrics)
    return EXIT_OK


def cmd_certify(args) -> int:
    model, trace, cfg = load_checkpoint(args.checkpoint)
    if args.eps_test is not None:
        cfg["eps_test"] = args.eps_test
    if args.data_dir is not None:
        cfg["data_dir"] = args.data_dir
    _, _, test = load_splits(cfg)
    res = certified_accuracy(model, test.features, test.labels, cfg["eps_test"])
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "per_sample.csv")
    write_results_csv(res, csv_path)
    summary = {
        "checkpoint": args.checkpoint,
        "eps_test": cfg["eps_test"],
        **res.summary(),
        "per_sample_csv": csv_path,
        "config": cfg,
    }
    with open(os.path.join(args.out, "certify_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, default=float)
    _emit(summary)
    return EXIT_OK


def cmd_oracle(args) -> int:
    model, trace, cfg = load_checkpoint(args.checkpoint)
    train, _, _ = load_splits(cfg)
    dataset = PerturbedDataset(train.features, train.labels, cfg["eps"], cfg["eps_test"])
    tc = train_config_from(cfg, divergence_ceiling=float("inf"))
    tamper = None
    if args.fault_injection:
        from .interval import IntervalTensor

        def tamper(step, m):
            # Shrink the first layer's weight interval toward its center; a
            # sound run must then report containment violations.
            layer = m.linear_layers[0]
            w = layer.weights
            c, r = w.center, w.radius
            layer.weights = IntervalTensor(c - 0.2 * r, c + 0.2 * r)

    report = replay_containment(
        trace, dataset, tc, samples=args.samples, slack=args.slack, tamper=tamper
    )
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "oracle_report.json"), "w") as fh:
            json.dump(report, fh, indent=2, default=float)
    _emit(report)
    return EXIT_OK if report["passed"] else EXIT_ORACLE


def _sweep_cell(cell_cfg: dict) -> dict:
    row = {
        "seed": cell_cfg["seed"],
        "eps": cell_cfg["eps"],
        "lr": cell_cfg["lr"],
        "batch_size": cell_cfg["batch_size"],
        "epochs": cell_cfg["epochs"],
        "hidden": "x".join(str(h) for h in cell_cfg["hidden"]),
        "pretrain_target": cell_cfg.get("pretrain_target") or "",
    }
    t0 = time.time()
    try:
        _, _, metrics = run_training(cell_cfg)
        row.update(
            status="ok",
            certified_accuracy=metrics["certified_accuracy_test"],
            clean_accuracy=metrics["clean_accuracy_test"],
            pretrain_accuracy=metrics.get("pretrain", {}).get("clean_test_accuracy", ""),
        )
    except DivergenceError as e:
        row.update(status=f"diverged@{e.step}", certified_accuracy=0.0, clean_accuracy="")
    except Exception as e:  # record the failure, keep sweeping
        row.update(status=f"error:{type(e).__name__}", certified_accuracy="", clean_accuracy="")
    row["runtime_s"] = round(time.time() - t0, 3)
    return row


def cmd_sweep(args) -> int:
    spec = _load_json(args.config)
    base_args = argparse.Namespace(config=None, dataset=spec.get("dataset"))
    base = resolve_config(base_args)
    base_overrides = spec.get("base", {})
    unknown = set(base_overrides) - set(base)
    if unknown:
        raise ConfigError(f"unknown base config keys: {sorted(unknown)}")
    base.update(base_overrides)
    grid = spec.get("grid", {})
    seeds = spec.get("seeds") or list(range(spec.get("n_seeds", 1)))
    allowed = {"eps", "eps_test", "lr", "batch_size", "epochs", "hidden", "pretrain_target", "lr_decay"}

    if "cells" in spec:
        # explicit list of cell overrides (for paired settings a cartesian
        # grid cannot express, e.g. epochs matched to the learning rate)
        cells = spec["cells"]
        for cell in cells:
            unknown = set(cell) - allowed
            if unknown:
                raise ConfigError(f"unknown cell keys: {sorted(unknown)}; allowed {sorted(allowed)}")
    else:
        unknown = set(grid) - allowed
        if unknown:
            raise ConfigError(f"unknown grid axes: {sorted(unknown)}; allowed {sorted(allowed)}")
        axes = sorted(grid)
        cells = [{}]
        for axis in axes:
            cells = [dict(c, **{axis: v}) for c in cells for v in grid[axis]]
    jobs = []
    for cell in cells:
        for seed in seeds:
            cc = copy.deepcopy(base)
            cc.update(cell)
            cc["seed"] = int(seed)
            if "eps" in cell and "eps_test" not in cell:
                cc["eps_test"] = cell["eps"]
            jobs.append(cc)

    rows = []
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            futs = {pool.submit(_sweep_cell, j): j for j in jobs}
            for fut in as_completed(futs):
                rows.append(fut.result())
    else:
        rows = [_sweep_cell(j) for j in jobs]
    rows.sort(key=lambda r: (str(r["eps"]), str(r["lr"]), str(r["batch_size"]), r["seed"]))

    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "sweep.csv")
    fields = [
        "seed", "eps", "lr", "batch_size", "epochs", "hidden", "pretrain_target",
        "status", "certified_accuracy", "clean_accuracy", "pretrain_accuracy", "runtime_s",
    ]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)

    # Aggregate mean +- std per grid cell over seeds.
    cells_summary = {}
    for row in rows:
        key = tuple((a, row[a]) for a in ("eps", "lr", "batch_size", "epochs", "hidden", "pretrain_target"))
        cells_summary.setdefault(key, []).append(row)
    aggregates = []
    for key, cell_rows in sorted(cells_summary.items(), key=str):
        accs = [r["certified_accuracy"] for r in cell_rows if isinstance(r["certified_accuracy"], float)]
        aggregates.append(
            {
                **dict(key),
                "n_runs": len(cell_rows),
                "n_failed": sum(1 for r in cell_rows if r["status"] != "ok"),
                "certified_accuracy_mean": float(np.mean(accs)) if accs else None,
                "certified_accuracy_std": float(np.std(accs)) if accs else None,
            }
        )
    summary = {"rows": len(rows), "csv": csv_path, "cells": aggregates, "base_config": base, "seeds": [int(s) for s in seeds]}
    with open(os.path.join(args.out, "sweep_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, default=float)
    _emit(summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="certitrain",
        description="Interval-bound certified training and end-to-end robustness certification.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--dataset", choices=sorted(PROFILES))
        sp.add_argument("--seed", type=int)
        sp.add_argument("--eps", type=float, help="training perturbation radius")
        sp.add_argument("--eps-test", dest="eps_test", type=float, help="test perturbation radius")
        sp.add_argument("--lr", type=float)
        sp.add_argument("--lr-decay", dest="lr_decay", type=float)
        sp.add_argument("--batch-size", dest="batch_size", type=int)
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--hidden", help="comma-separated hidden layer sizes, e.g. 20,20")
        sp.add_argument("--pretrain-target", dest="pretrain_target", type=float)
        sp.add_argument("--data-dir", dest="data_dir", help="dataset cache directory")

    sp = sub.add_parser("gen-data", help="materialize a two-moons dataset")
    add_common(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("fetch-mnist", help="download and verify the MNIST archives")
    sp.add_argument("--data-dir", dest="data_dir", default=None)
    sp.set_defaults(func=cmd_fetch_mnist)

    sp = sub.add_parser("train", help="certified training run")
    add_common(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("certify", help="certify a test set against a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--eps-test", dest="eps_test", type=float)
    sp.add_argument("--data-dir", dest="data_dir")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("sweep", help="grid of runs; emits CSV + aggregates")
    sp.add_argument("--config", required=True, help="JSON sweep spec: {base, grid, seeds}")
    sp.add_argument("--out", required=True)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("oracle", help="trajectory-containment replay check")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--samples", type=int, default=20)
    sp.add_argument("--slack", type=float, default=1e-7)
    sp.add_argument("--fault-injection", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
