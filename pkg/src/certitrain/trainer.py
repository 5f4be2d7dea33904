"""Certified training: interval SGD over a perturbed dataset.

Each step inflates the concrete batch features into boxes, runs the interval
forward/backward pass and applies the update through interval subtraction,
so parameter radii grow monotonically by the learning rate times the gradient
radius. Concrete pretraining and lifting to zero-radius intervals are provided
for warm starts. A run is fully determined by (config, dataset): three
dedicated RNG streams derived from the seed drive initialization, the batch
schedule and pretraining.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interval import IntervalTensor
from .losses import BINARY_CROSS_ENTROPY, LOSS_KINDS
from .model import IntervalModel, build_model, model_from_params

__all__ = [
    "PerturbedDataset",
    "TrainConfig",
    "TrainTrace",
    "DivergenceError",
    "make_schedule",
    "sgd_step",
    "train_certified",
    "pretrain_concrete",
    "lift_to_interval",
    "accuracy",
]

# RNG stream tags, combined with the seed as default_rng([seed, tag]).
_STREAM_INIT = 0
_STREAM_SCHEDULE = 1
_STREAM_PRETRAIN = 2
_STREAM_REPLAY = 3


@dataclass
class PerturbedDataset:
    """Concrete samples plus the elementwise perturbation radii of the threat model.

    ``train_eps`` bounds the adversary's change to every training feature,
    ``test_eps`` the change to every test feature. Labels are never perturbed.
    """

    features: np.ndarray
    labels: np.ndarray
    train_eps: float
    test_eps: float

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features must be (N, d) with one label per row")
        if self.features.shape[0] == 0:
            raise ValueError("dataset is empty")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values")
        if self.train_eps < 0 or self.test_eps < 0:
            raise ValueError("perturbation radii must be nonnegative")
        if np.any(self.labels < 0):
            raise ValueError("labels must be nonnegative class indices")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 100
    max_epochs: int = 100
    seed: int = 0
    hidden_sizes: tuple = (20,)
    shuffle: bool = True
    loss: str = BINARY_CROSS_ENTROPY
    lr_decay: float = 0.0  # lambda_t = lr / (1 + lr_decay * t); 0 keeps it constant
    divergence_ceiling: float = 1e3

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size <= 0 or self.max_epochs <= 0:
            raise ValueError("batch_size and max_epochs must be positive")
        if any(h <= 0 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be positive")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss!r}")
        if self.lr_decay < 0:
            raise ValueError("lr_decay must be nonnegative")
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)

    def lr_at(self, step: int) -> float:
        return self.learning_rate / (1.0 + self.lr_decay * step)


class DivergenceError(RuntimeError):
    """Raised when certified training blows up.

    Carries the step index, the partial trace and the model state at abort so
    callers (sweeps, CLI) can still inspect or report the run.
    """

    def __init__(self, message: str, step: int, trace: "TrainTrace", model: IntervalModel):
        super().__init__(message)
        self.step = step
        self.trace = trace
        self.model = model


class TrainTrace:
    """Per-step diagnostics plus everything needed to replay a run exactly.

    Stores the initial parameter intervals, the full batch schedule (global
    sample indices per step) and, per step: the batch-mean loss interval, the
    maximum parameter radius and per-layer maximum radii.
    """

    def __init__(
        self,
        seed: int,
        eps: float,
        learning_rate: float,
        lr_decay: float,
        batch_size: int,
        init_params: list,
        schedule: list,
    ):
        self.seed = seed
        self.eps = eps
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.batch_size = batch_size
        self.init_params = init_params  # [(IntervalTensor w, IntervalTensor b), ...]
        self.schedule = schedule  # [np.ndarray of sample indices, ...] one per step
        self.loss_lower: list = []
        self.loss_upper: list = []
        self.max_radius: list = []
        self.layer_radii: list = []
        self.diverged = False
        self.divergence_step: int | None = None

    @property
    def n_steps(self) -> int:
        return len(self.max_radius)

    def record_step(self, loss_lo: float, loss_hi: float, max_radius: float, layer_radii: list) -> None:
        self.loss_lower.append(loss_lo)
        self.loss_upper.append(loss_hi)
        self.max_radius.append(max_radius)
        self.layer_radii.append(list(layer_radii))

    def mark_diverged(self, step: int) -> None:
        self.diverged = True
        self.divergence_step = step


def make_schedule(
    n_samples: int,
    batch_size: int,
    n_epochs: int,
    shuffle: bool,
    rng: np.random.Generator,
) -> list:
    """Global sample indices per step; a seeded permutation per epoch."""
    steps = []
    for _ in range(n_epochs):
        order = rng.permutation(n_samples) if shuffle else np.arange(n_samples)
        for start in range(0, n_samples, batch_size):
            steps.append(order[start : start + batch_size].copy())
    return steps


def sgd_step(model: IntervalModel, batch_x: IntervalTensor, batch_y: np.ndarray, lr: float):
    """One interval SGD step; returns (model, (mean_loss_lower, mean_loss_upper)).

    Full interval forward, loss, loss gradient, layer backwards, then the
    parameter update theta - lr * grad through interval subtraction.
    """
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    logits = model.forward(batch_x)
    loss = model.loss_interval(logits, batch_y)
    delta = model.loss_grad(logits, batch_y)
    grads = model.backward(delta)
    model.apply_gradients(grads, lr)
    mean_loss = loss.mean(axis=0)
    return model, (float(mean_loss.lower[0]), float(mean_loss.upper[0]))


def train_certified(
    model: IntervalModel,
    dataset: PerturbedDataset,
    config: TrainConfig,
    step_callback=None,
):
    """Interval SGD over the perturbed dataset; returns (model, trace).

    Every epoch re-inflates each concrete batch by ``train_eps`` (labels stay
    exact) and runs one interval step per batch. Deterministic given the seed.
    Raises DivergenceError when the mean-loss upper bound crosses the
    configured ceiling or any quantity turns non-finite.

    ``step_callback(step_index, model, batch_indices)`` runs after each
    update; the replay oracle uses it to advance concrete runs in lockstep.
    """
    rng = np.random.default_rng([config.seed, _STREAM_SCHEDULE])
    schedule = make_schedule(
        dataset.n_samples, config.batch_size, config.max_epochs, config.shuffle, rng
    )
    trace = TrainTrace(
        seed=config.seed,
        eps=dataset.train_eps,
        learning_rate=config.learning_rate,
        lr_decay=config.lr_decay,
        batch_size=config.batch_size,
        init_params=model.parameters(),
        schedule=schedule,
    )
    eps = dataset.train_eps
    for step, idx in enumerate(schedule):
        batch_x = IntervalTensor.inflate(dataset.features[idx], eps)
        batch_y = dataset.labels[idx]
        model, (loss_lo, loss_hi) = sgd_step(model, batch_x, batch_y, config.lr_at(step))
        trace.record_step(loss_lo, loss_hi, model.max_param_radius(), model.layer_radii())
        if not np.isfinite(loss_lo) or not np.isfinite(loss_hi) or not model.params_finite():
            trace.mark_diverged(step)
            raise DivergenceError(
                f"non-finite loss or parameters at step {step}", step, trace, model
            )
        if loss_hi > config.divergence_ceiling:
            trace.mark_diverged(step)
            raise DivergenceError(
                f"mean-loss upper bound {loss_hi:.3g} exceeded ceiling "
                f"{config.divergence_ceiling:.3g} at step {step}",
                step,
                trace,
                model,
            )
        if step_callback is not None:
            step_callback(step, model, idx)
    return model, trace


def accuracy(model: IntervalModel, features: np.ndarray, labels: np.ndarray) -> float:
    """Plain classification accuracy of the center model."""
    preds = model.predict(features)
    return float(np.mean(preds == np.asarray(labels)))


def pretrain_concrete(
    dataset: PerturbedDataset,
    config: TrainConfig,
    subset_size: int,
    target_accuracy: float,
    eval_features: np.ndarray | None = None,
    eval_labels: np.ndarray | None = None,
):
    """Plain SGD warm-up on the first ``subset_size`` unperturbed samples.

    Runs the engine with zero-radius inputs until accuracy on the evaluation
    set (the subset itself by default) reaches ``target_accuracy``, or
    ``max_epochs`` runs out. Returns (params, achieved_accuracy) where params
    are the concrete (weights, bias) pairs of the best epoch seen; the caller
    checks ``achieved < target`` for below-target outcomes.
    """
    if not 0.5 <= target_accuracy <= 1.0:
        raise ValueError("target accuracy must lie in [0.5, 1]")
    if subset_size <= 0 or subset_size > dataset.n_samples:
        raise ValueError("subset_size must be in [1, N]")
    sub_x = dataset.features[:subset_size]
    sub_y = dataset.labels[:subset_size]
    if eval_features is None:
        eval_features, eval_labels = sub_x, sub_y
    out_dim = 1 if config.loss == BINARY_CROSS_ENTROPY else int(dataset.labels.max()) + 1
    rng_init = np.random.default_rng([config.seed, _STREAM_INIT])
    model = build_model(dataset.n_features, config.hidden_sizes, out_dim, config.loss, rng_init)

    best_params = model.point_parameters()
    best_acc = accuracy(model, eval_features, eval_labels)
    if best_acc >= target_accuracy:
        return best_params, best_acc

    rng = np.random.default_rng([config.seed, _STREAM_PRETRAIN])
    step = 0
    for _ in range(config.max_epochs):
        order = rng.permutation(subset_size) if config.shuffle else np.arange(subset_size)
        for start in range(0, subset_size, config.batch_size):
            idx = order[start : start + config.batch_size]
            batch_x = IntervalTensor.from_point(sub_x[idx])
            sgd_step(model, batch_x, sub_y[idx], config.lr_at(step))
            step += 1
        acc = accuracy(model, eval_features, eval_labels)
        if acc > best_acc:
            best_acc = acc
            best_params = model.point_parameters()
        if best_acc >= target_accuracy:
            break
    return best_params, best_acc


def lift_to_interval(params: list, loss: str) -> IntervalModel:
    """Embed concrete parameters as a zero-radius interval model."""
    return model_from_params(params, loss)
