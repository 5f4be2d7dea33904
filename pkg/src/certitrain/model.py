"""Sequential interval models: layer stacks plus a loss head."""

from __future__ import annotations

import numpy as np

from .interval import IntervalTensor
from .layers import RELU, ActivationLayer, LinearLayer
from .losses import (
    BINARY_CROSS_ENTROPY,
    CROSS_ENTROPY,
    LOSS_KINDS,
    bce_grad_interval,
    bce_loss_interval,
    ce_grad_interval,
    ce_loss_interval,
    one_hot,
)

__all__ = ["IntervalModel", "build_model", "model_from_params"]


class IntervalModel:
    """An ordered stack of linear/activation layers with a loss choice.

    The loss head consumes raw logits: binary cross-entropy expects exactly
    one output logit, cross-entropy at least two.
    """

    def __init__(self, layers: list, loss: str):
        if loss not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {loss!r}")
        linear = [l for l in layers if isinstance(l, LinearLayer)]
        if not linear:
            raise ValueError("model needs at least one linear layer")
        prev_out = None
        for layer in layers:
            if isinstance(layer, LinearLayer):
                if prev_out is not None and layer.in_dim != prev_out:
                    raise ValueError(
                        f"layer dims disagree: {prev_out} feeds into {layer.in_dim}"
                    )
                prev_out = layer.out_dim
        out_dim = linear[-1].out_dim
        if loss == BINARY_CROSS_ENTROPY and out_dim != 1:
            raise ValueError("binary cross-entropy requires exactly one output logit")
        if loss == CROSS_ENTROPY and out_dim < 2:
            raise ValueError("cross-entropy requires at least two output logits")
        self.layers = list(layers)
        self.loss = loss

    @property
    def linear_layers(self) -> list:
        return [l for l in self.layers if isinstance(l, LinearLayer)]

    @property
    def in_dim(self) -> int:
        return self.linear_layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.linear_layers[-1].out_dim

    def forward(self, x: IntervalTensor, remember: bool = True) -> IntervalTensor:
        for layer in self.layers:
            x = layer.forward(x, remember=remember)
        return x

    def loss_interval(self, logits: IntervalTensor, labels: np.ndarray) -> IntervalTensor:
        """Per-sample loss bounds, shape (batch, 1)."""
        if self.loss == BINARY_CROSS_ENTROPY:
            return bce_loss_interval(logits, labels)
        return ce_loss_interval(logits, one_hot(labels, self.out_dim))

    def loss_grad(self, logits: IntervalTensor, labels: np.ndarray) -> IntervalTensor:
        """Per-sample gradient bounds wrt the logits."""
        if self.loss == BINARY_CROSS_ENTROPY:
            return bce_grad_interval(logits, labels)
        return ce_grad_interval(logits, one_hot(labels, self.out_dim))

    def backward(self, delta: IntervalTensor) -> list:
        """Run the backward rules; returns [(dW, dB), ...] per linear layer."""
        grads = []
        for pos in reversed(range(len(self.layers))):
            layer = self.layers[pos]
            if isinstance(layer, LinearLayer):
                # the input gradient is only needed while layers remain below
                delta, dw, db = layer.backward(delta, need_input_grad=pos > 0)
                grads.append((dw, db))
            else:
                delta = layer.backward(delta)
        grads.reverse()
        return grads

    def apply_gradients(self, grads: list, lr: float) -> None:
        linear = self.linear_layers
        if len(grads) != len(linear):
            raise ValueError("one gradient pair per linear layer expected")
        for layer, (dw, db) in zip(linear, grads):
            layer.apply_update(dw, db, lr)

    def parameters(self) -> list:
        """[(weights, bias), ...] as IntervalTensors, in layer order."""
        return [(l.weights, l.bias) for l in self.linear_layers]

    def point_parameters(self) -> list:
        """[(weights, bias), ...] as concrete center arrays."""
        return [(l.weights.center, l.bias.center) for l in self.linear_layers]

    def max_param_radius(self) -> float:
        return max(l.max_param_radius() for l in self.linear_layers)

    def layer_radii(self) -> list:
        return [l.max_param_radius() for l in self.linear_layers]

    def params_finite(self) -> bool:
        return all(
            np.all(np.isfinite(l.weights.lower))
            and np.all(np.isfinite(l.weights.upper))
            and np.all(np.isfinite(l.bias.lower))
            and np.all(np.isfinite(l.bias.upper))
            for l in self.linear_layers
        )

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Class predictions of the center model on concrete inputs."""
        logits = self.forward(
            IntervalTensor.from_point(np.asarray(features, dtype=np.float64)),
            remember=False,
        ).center
        if self.out_dim == 1:
            return (logits[:, 0] > 0.0).astype(np.int64)
        return np.argmax(logits, axis=1)

    def architecture(self) -> list:
        """Serializable layer description, e.g. [{"kind": "linear", ...}, ...]."""
        desc = []
        for layer in self.layers:
            if isinstance(layer, LinearLayer):
                desc.append({"kind": "linear", "in": layer.in_dim, "out": layer.out_dim})
            else:
                desc.append({"kind": layer.kind})
        return desc


def build_model(
    in_dim: int,
    hidden_sizes,
    out_dim: int,
    loss: str,
    rng: np.random.Generator,
    activation: str = RELU,
) -> IntervalModel:
    """Fresh zero-radius MLP with uniform fan-in-scaled initialization."""
    dims = [in_dim, *hidden_sizes, out_dim]
    layers = []
    for i in range(len(dims) - 1):
        fan_in = dims[i]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(dims[i + 1], fan_in))
        b = rng.uniform(-bound, bound, size=dims[i + 1])
        layers.append(LinearLayer.from_point(w, b))
        if i < len(dims) - 2:
            layers.append(ActivationLayer(activation))
    return IntervalModel(layers, loss)


def model_from_params(params: list, loss: str, activation: str = RELU) -> IntervalModel:
    """Assemble an MLP from concrete (weights, bias) pairs as zero-radius intervals."""
    layers = []
    for i, (w, b) in enumerate(params):
        layers.append(LinearLayer.from_point(w, b))
        if i < len(params) - 1:
            layers.append(ActivationLayer(activation))
    return IntervalModel(layers, loss)
