"""Independent verification machinery for the interval engine.

Everything here is written against plain numpy on concrete values (or
brute-force enumeration), deliberately not sharing code with the interval
layers, so a bug in the engine cannot hide in its own checker:

* exact interval matmul hulls to bound-check the midpoint-radius product,
* concrete SGD replays on sampled perturbed datasets to check trajectory
  containment end to end,
* central finite differences to check the backward rules at zero radius.
"""

from __future__ import annotations

import numpy as np

from .interval import IntervalTensor
from .losses import BINARY_CROSS_ENTROPY
from .model import model_from_params
from .trainer import (
    _STREAM_REPLAY,
    _STREAM_SCHEDULE,
    PerturbedDataset,
    TrainConfig,
    TrainTrace,
    make_schedule,
    train_certified,
)

__all__ = [
    "exact_matmul_hull",
    "replay_containment",
    "finite_diff_check",
    "concrete_forward",
    "concrete_loss_grad",
    "concrete_sgd_step",
]

MAX_HULL_DIM = 8


def exact_matmul_hull(a: IntervalTensor, b: IntervalTensor) -> IntervalTensor:
    """Exact interval hull of a matrix product by endpoint enumeration.

    Each output entry is a sum over k of scalar interval products; entries of
    the operands are independent variables, so summing the exact per-product
    hulls gives the exact hull of the entry. Intended for small operands.
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"incompatible shapes {a.shape} @ {b.shape}")
    if max(*a.shape, *b.shape) > MAX_HULL_DIM:
        raise ValueError(f"exact hull is for dims <= {MAX_HULL_DIM}")
    al = a.lower[:, :, None]
    au = a.upper[:, :, None]
    bl = b.lower[None, :, :]
    bu = b.upper[None, :, :]
    p1, p2, p3, p4 = al * bl, al * bu, au * bl, au * bu
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4)).sum(axis=1)
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4)).sum(axis=1)
    return IntervalTensor(lo, hi)


# ----------------------------------------------------------------------
# Concrete reference network (plain SGD on points).


def _sigmoid_ref(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def concrete_forward(params: list, x: np.ndarray):
    """Forward pass of a point-weight ReLU MLP; returns (logits, preactivations)."""
    pre = []
    h = x
    for i, (w, b) in enumerate(params):
        z = h @ w.T + b
        pre.append((h, z))
        h = np.maximum(z, 0.0) if i < len(params) - 1 else z
    return h, pre


def concrete_loss(logits: np.ndarray, y: np.ndarray, loss_kind: str) -> float:
    """Mean loss of concrete logits (stable shifted forms)."""
    if loss_kind == BINARY_CROSS_ENTROPY:
        z = logits[:, 0]
        a = np.maximum(-z, 0.0)
        per = z - z * y + a + np.log(np.exp(-a) + np.exp(-z - a))
    else:
        shift = logits.max(axis=1, keepdims=True)
        log_probs = logits - shift - np.log(np.exp(logits - shift).sum(axis=1, keepdims=True))
        per = -log_probs[np.arange(len(y)), np.asarray(y, dtype=int)]
    return float(per.mean())


def concrete_loss_grad(logits: np.ndarray, y: np.ndarray, loss_kind: str) -> np.ndarray:
    """Per-sample gradient of the loss wrt the logits."""
    if loss_kind == BINARY_CROSS_ENTROPY:
        return _sigmoid_ref(logits[:, 0]).reshape(-1, 1) - np.asarray(y, dtype=float).reshape(-1, 1)
    shift = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - shift)
    probs = e / e.sum(axis=1, keepdims=True)
    grad = probs.copy()
    grad[np.arange(len(y)), np.asarray(y, dtype=int)] -= 1.0
    return grad


def concrete_sgd_step(params: list, x: np.ndarray, y: np.ndarray, lr: float, loss_kind: str) -> float:
    """One plain SGD step, updating ``params`` in place; returns the mean loss.

    Parameter gradients are batch means; the inter-layer signal carries raw
    per-sample gradients.
    """
    logits, pre = concrete_forward(params, x)
    loss = concrete_loss(logits, y, loss_kind)
    delta = concrete_loss_grad(logits, y, loss_kind)
    batch = x.shape[0]
    for i in reversed(range(len(params))):
        inp, z = pre[i]
        if i < len(params) - 1:
            delta = delta * (z > 0.0)
        w, b = params[i]
        dw = (delta.T @ inp) / batch
        db = delta.sum(axis=0) / batch
        if i > 0:
            delta = delta @ w
        params[i] = (w - lr * dw, b - lr * db)
    return loss


# ----------------------------------------------------------------------
# Trajectory containment replay.


def _rel_violation(value: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> float:
    """Worst containment violation, scaled by max(1, |bound|); <= 0 means inside."""
    scale = np.maximum(1.0, np.maximum(np.abs(lower), np.abs(upper)))
    margin = np.maximum(lower - value, value - upper) / scale
    return float(margin.max()) if margin.size else float("-inf")


def replay_containment(
    trace: TrainTrace,
    dataset: PerturbedDataset,
    config: TrainConfig,
    samples: int = 20,
    slack: float = 1e-7,
    prediction_points: int = 64,
    tamper=None,
) -> dict:
    """Check that concrete SGD trajectories stay inside the interval run.

    Draws ``samples`` concrete datasets with i.i.d. per-feature offsets in
    [-eps, eps], trains each with plain SGD from the recorded initialization
    along the recorded batch schedule, and asserts after every step that all
    concrete parameters and the batch loss lie inside the recomputed interval
    quantities (relative slack ``slack``). Finishes by checking the replayed
    models' logits on perturbed held-in points against the interval forward
    pass. Returns a JSON-ready report with violation counts and margins.

    ``tamper(step, model)``, if given, mutates the interval model after each
    step; used for fault-injection tests of this very check.
    """
    if samples <= 0:
        raise ValueError("need at least one replay sample")
    eps = dataset.train_eps
    for w_iv, b_iv in trace.init_params:
        if w_iv.max_radius() > 0 or b_iv.max_radius() > 0:
            raise ValueError("replay assumes a zero-radius initialization")
    init_centers = [(w.center, b.center) for (w, b) in trace.init_params]

    expected = make_schedule(
        dataset.n_samples,
        config.batch_size,
        config.max_epochs,
        config.shuffle,
        np.random.default_rng([config.seed, _STREAM_SCHEDULE]),
    )
    if len(expected) != len(trace.schedule) or any(
        not np.array_equal(a, b) for a, b in zip(expected, trace.schedule)
    ):
        raise ValueError("recorded batch schedule does not match config and dataset")

    interval_model = model_from_params(init_centers, config.loss)
    rng = np.random.default_rng([config.seed, _STREAM_REPLAY])
    # float32 storage keeps large replays affordable; _offset_rows re-clips in
    # float64 so cast rounding cannot push a value outside the eps box.
    offsets = [
        rng.uniform(-eps, eps, size=dataset.features.shape).astype(np.float32)
        for _ in range(samples)
    ]

    def _offset_rows(k: int, idx) -> np.ndarray:
        return np.clip(offsets[k][idx].astype(np.float64), -eps, eps)

    replicas = [[(w.copy(), b.copy()) for (w, b) in init_centers] for _ in range(samples)]

    report = {
        "samples": samples,
        "slack": slack,
        "steps": len(trace.schedule),
        "param_checks": 0,
        "loss_checks": 0,
        "prediction_checks": 0,
        "violations": 0,
        "worst_margin": None,
        "first_violations": [],
    }

    def note(margin: float, step: int, kind: str, which: str) -> None:
        if report["worst_margin"] is None or margin > report["worst_margin"]:
            report["worst_margin"] = margin
        if margin > slack:
            report["violations"] += 1
            if len(report["first_violations"]) < 50:
                report["first_violations"].append(
                    {"step": step, "kind": kind, "where": which, "margin": margin}
                )

    def check_step(step: int, model, idx) -> None:
        if tamper is not None:
            tamper(step, model)
        lr = config.lr_at(step)
        bounds = model.parameters()
        for k, replica in enumerate(replicas):
            x = dataset.features[idx] + _offset_rows(k, idx)
            loss = concrete_sgd_step(replica, x, dataset.labels[idx], lr, config.loss)
            note(
                max(trace.loss_lower[step] - loss, loss - trace.loss_upper[step])
                / max(1.0, abs(trace.loss_lower[step]), abs(trace.loss_upper[step])),
                step,
                "loss",
                f"replica{k}",
            )
            report["loss_checks"] += 1
            for li, ((w, b), (wi, bi)) in enumerate(zip(replica, bounds)):
                note(_rel_violation(w, wi.lower, wi.upper), step, "weight", f"replica{k}/layer{li}")
                note(_rel_violation(b, bi.lower, bi.upper), step, "bias", f"replica{k}/layer{li}")
                report["param_checks"] += 2

    model, _ = train_certified(interval_model, dataset, config, step_callback=check_step)

    # Final predictions: perturbed models on perturbed inputs must land in the
    # interval logits of the eps-inflated points.
    n_pts = min(prediction_points, dataset.n_samples)
    pts = dataset.features[:n_pts]
    box_logits = model.forward(IntervalTensor.inflate(pts, eps), remember=False)
    for k, replica in enumerate(replicas):
        logits, _ = concrete_forward(replica, pts + _offset_rows(k, np.arange(n_pts)))
        note(
            _rel_violation(logits, box_logits.lower, box_logits.upper),
            len(trace.schedule),
            "prediction",
            f"replica{k}",
        )
        report["prediction_checks"] += 1

    report["passed"] = report["violations"] == 0
    return report


# ----------------------------------------------------------------------
# Finite-difference gradient check.


def finite_diff_check(
    params: list,
    x: np.ndarray,
    y: np.ndarray,
    loss_kind: str,
    h: float = 1e-5,
) -> float:
    """Max relative error between engine gradients and central differences.

    The engine side runs the interval backward pass at zero radius; the
    finite-difference side evaluates only the concrete forward loss defined in
    this module. Relative error uses a unit floor: |fd - g| / max(1, |fd|, |g|).
    Inputs near ReLU kinks are the caller's responsibility.
    """
    model = model_from_params([(w.copy(), b.copy()) for w, b in params], loss_kind)
    logits = model.forward(IntervalTensor.from_point(x))
    delta = model.loss_grad(logits, y)
    grads = model.backward(delta)
    engine = [(dw.center, db.center) for dw, db in grads]

    worst = 0.0
    work = [(w.copy(), b.copy()) for w, b in params]
    for li in range(len(work)):
        for which in (0, 1):
            arr = work[li][which]
            g = engine[li][which]
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                orig = arr[ix]
                arr[ix] = orig + h
                up = concrete_loss(concrete_forward(work, x)[0], y, loss_kind)
                arr[ix] = orig - h
                down = concrete_loss(concrete_forward(work, x)[0], y, loss_kind)
                arr[ix] = orig
                fd = (up - down) / (2.0 * h)
                err = abs(fd - g[ix]) / max(1.0, abs(fd), abs(g[ix]))
                worst = max(worst, err)
    return worst
