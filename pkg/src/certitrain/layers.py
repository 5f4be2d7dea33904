"""Interval-valued network layers with explicit forward and backward rules.

There is no generic autodiff: each layer knows its own derivative bounds.
Forward passes cache their input for the following backward pass; applying a
parameter update invalidates the cache.
"""

from __future__ import annotations

import numpy as np

from .interval import INCREASING, IntervalTensor, apply_monotonic, rump_matmul
from .losses import _sigmoid

__all__ = ["LinearLayer", "ActivationLayer", "RELU", "SIGMOID"]

RELU = "relu"
SIGMOID = "sigmoid"


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _relu_step(x: np.ndarray) -> np.ndarray:
    # Subgradient choice: derivative at exactly 0 is 0.
    return (x > 0.0).astype(np.float64)


class LinearLayer:
    """Affine layer ``y = x @ W^T + b`` with interval weights and bias.

    ``weights`` has shape (out, in) and ``bias`` shape (out,).
    """

    def __init__(self, weights: IntervalTensor, bias: IntervalTensor):
        if weights.ndim != 2:
            raise ValueError("weights must be 2-d (out, in)")
        if bias.shape != (weights.shape[0],):
            raise ValueError(
                f"bias shape {bias.shape} does not match {weights.shape[0]} outputs"
            )
        self.weights = weights
        self.bias = bias
        self.cached_input: IntervalTensor | None = None

    @classmethod
    def from_point(cls, weights, bias) -> "LinearLayer":
        return cls(IntervalTensor.from_point(weights), IntervalTensor.from_point(bias))

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def forward(self, x: IntervalTensor, remember: bool = True) -> IntervalTensor:
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"input shape {x.shape} does not match in_dim {self.in_dim}")
        if remember:
            self.cached_input = x
        return rump_matmul(x, self.weights.transpose()) + self.bias

    def backward(self, delta: IntervalTensor, need_input_grad: bool = True):
        """Propagate per-sample output gradients; returns (dx, dw, db).

        ``dw`` and ``db`` are averaged over the batch (mean reduction); ``dx``
        carries the raw per-sample gradients for the upstream layer. ``dx`` is
        None when ``need_input_grad`` is false (first layer of a network).
        """
        if self.cached_input is None:
            raise RuntimeError("backward called without a cached forward input")
        if delta.ndim != 2 or delta.shape[1] != self.out_dim:
            raise ValueError(f"delta shape {delta.shape} does not match out_dim {self.out_dim}")
        batch = delta.shape[0]
        dw = rump_matmul(delta.transpose(), self.cached_input).scale(1.0 / batch)
        db = delta.mean(axis=0)
        dx = rump_matmul(delta, self.weights) if need_input_grad else None
        return dx, dw, db

    def apply_update(self, dw: IntervalTensor, db: IntervalTensor, lr: float) -> None:
        # Interval subtraction: parameter radii grow by lr * gradient radius.
        self.weights = self.weights - dw.scale(lr)
        self.bias = self.bias - db.scale(lr)
        self.cached_input = None

    def max_param_radius(self) -> float:
        return max(self.weights.max_radius(), self.bias.max_radius())


class ActivationLayer:
    """Elementwise ReLU or sigmoid with monotone endpoint bounds."""

    def __init__(self, kind: str):
        if kind not in (RELU, SIGMOID):
            raise ValueError(f"unknown activation kind {kind!r}")
        self.kind = kind
        self.cached_input: IntervalTensor | None = None

    def forward(self, x: IntervalTensor, remember: bool = True) -> IntervalTensor:
        if remember:
            self.cached_input = x
        f = _relu if self.kind == RELU else _sigmoid
        return apply_monotonic(x, f, INCREASING)

    def backward(self, delta: IntervalTensor) -> IntervalTensor:
        if self.cached_input is None:
            raise RuntimeError("backward called without a cached forward input")
        x = self.cached_input
        if self.kind == RELU:
            deriv = IntervalTensor._wrap(_relu_step(x.lower), _relu_step(x.upper))
        else:
            deriv = _sigmoid_deriv_interval(x)
        return delta * deriv


def _sigmoid_deriv_interval(x: IntervalTensor) -> IntervalTensor:
    """Sound bounds on sigmoid'(x) = s(x)(1-s(x)) over an interval.

    The derivative peaks at 0, so the maximum is 0.25 whenever the interval
    straddles zero and an endpoint value otherwise; the minimum is always at
    an endpoint.
    """
    s_lo = _sigmoid(x.lower)
    s_hi = _sigmoid(x.upper)
    d_lo = s_lo * (1.0 - s_lo)
    d_hi = s_hi * (1.0 - s_hi)
    lower = np.minimum(d_lo, d_hi)
    upper = np.maximum(d_lo, d_hi)
    straddles = (x.lower <= 0.0) & (x.upper >= 0.0)
    upper = np.where(straddles, 0.25, upper)
    return IntervalTensor._wrap(lower, upper)
