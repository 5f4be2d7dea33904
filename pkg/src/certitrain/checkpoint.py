"""Checkpoint files: model, training trace and resolved config in one archive.

Format (stable, versioned): a numpy ``.npz`` archive containing

* ``meta`` -- UTF-8 JSON with ``format_version``, the loss kind, the layer
  architecture, the resolved run config and trace scalars (seed, eps,
  learning rate, decay, batch size, divergence flags),
* per linear layer ``i``: ``lin{i}_w_lower/upper`` and ``lin{i}_b_lower/upper``
  plus matching ``init{i}_*`` arrays for the pre-training-state snapshot,
* trace series: ``loss_lower``, ``loss_upper``, ``max_radius`` (one per step)
  and ``layer_radius`` (steps x linear layers),
* the replayable batch schedule as ``schedule_idx`` (concatenated sample
  indices) with ``schedule_off`` offsets (CSR style).
"""

from __future__ import annotations

import json

import numpy as np

from .interval import IntervalTensor
from .layers import ActivationLayer, LinearLayer
from .model import IntervalModel
from .trainer import TrainTrace

__all__ = ["save_checkpoint", "load_checkpoint", "FORMAT_VERSION"]

FORMAT_VERSION = 1


def save_checkpoint(path, model: IntervalModel, trace: TrainTrace, config: dict) -> None:
    arrays = {}
    for i, (w, b) in enumerate(model.parameters()):
        arrays[f"lin{i}_w_lower"] = w.lower
        arrays[f"lin{i}_w_upper"] = w.upper
        arrays[f"lin{i}_b_lower"] = b.lower
        arrays[f"lin{i}_b_upper"] = b.upper
    for i, (w, b) in enumerate(trace.init_params):
        arrays[f"init{i}_w_lower"] = w.lower
        arrays[f"init{i}_w_upper"] = w.upper
        arrays[f"init{i}_b_lower"] = b.lower
        arrays[f"init{i}_b_upper"] = b.upper
    arrays["loss_lower"] = np.asarray(trace.loss_lower, dtype=np.float64)
    arrays["loss_upper"] = np.asarray(trace.loss_upper, dtype=np.float64)
    arrays["max_radius"] = np.asarray(trace.max_radius, dtype=np.float64)
    arrays["layer_radius"] = (
        np.asarray(trace.layer_radii, dtype=np.float64)
        if trace.layer_radii
        else np.zeros((0, len(model.linear_layers)))
    )
    if trace.schedule:
        arrays["schedule_idx"] = np.concatenate(trace.schedule).astype(np.int64)
        arrays["schedule_off"] = np.cumsum([0] + [len(s) for s in trace.schedule]).astype(np.int64)
    else:
        arrays["schedule_idx"] = np.zeros(0, dtype=np.int64)
        arrays["schedule_off"] = np.zeros(1, dtype=np.int64)
    meta = {
        "format_version": FORMAT_VERSION,
        "loss": model.loss,
        "architecture": model.architecture(),
        "config": config,
        "trace": {
            "seed": trace.seed,
            "eps": trace.eps,
            "learning_rate": trace.learning_rate,
            "lr_decay": trace.lr_decay,
            "batch_size": trace.batch_size,
            "diverged": trace.diverged,
            "divergence_step": trace.divergence_step,
        },
    }
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez_compressed(path, **arrays)


def _interval_pairs(archive, prefix: str, n_layers: int):
    pairs = []
    for i in range(n_layers):
        w = IntervalTensor(archive[f"{prefix}{i}_w_lower"], archive[f"{prefix}{i}_w_upper"])
        b = IntervalTensor(archive[f"{prefix}{i}_b_lower"], archive[f"{prefix}{i}_b_upper"])
        pairs.append((w, b))
    return pairs


def load_checkpoint(path):
    """Returns (model, trace, config). Rejects unknown format versions."""
    with np.load(path) as archive:
        meta = json.loads(bytes(archive["meta"]).decode("utf-8"))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(
                f"unsupported checkpoint format version {meta.get('format_version')}"
            )
        arch = meta["architecture"]
        n_linear = sum(1 for spec in arch if spec["kind"] == "linear")
        layer_params = _interval_pairs(archive, "lin", n_linear)
        init_params = _interval_pairs(archive, "init", n_linear)
        layers = []
        li = 0
        for spec in arch:
            if spec["kind"] == "linear":
                w, b = layer_params[li]
                layers.append(LinearLayer(w, b))
                li += 1
            else:
                layers.append(ActivationLayer(spec["kind"]))
        model = IntervalModel(layers, meta["loss"])

        off = archive["schedule_off"]
        idx = archive["schedule_idx"]
        schedule = [idx[off[i] : off[i + 1]].copy() for i in range(len(off) - 1)]
        tmeta = meta["trace"]
        trace = TrainTrace(
            seed=tmeta["seed"],
            eps=tmeta["eps"],
            learning_rate=tmeta["learning_rate"],
            lr_decay=tmeta["lr_decay"],
            batch_size=tmeta["batch_size"],
            init_params=init_params,
            schedule=schedule,
        )
        trace.loss_lower = archive["loss_lower"].tolist()
        trace.loss_upper = archive["loss_upper"].tolist()
        trace.max_radius = archive["max_radius"].tolist()
        trace.layer_radii = archive["layer_radius"].tolist()
        trace.diverged = bool(tmeta["diverged"])
        trace.divergence_step = tmeta["divergence_step"]
    return model, trace, meta["config"]
