"""Interval loss functions and their interval derivatives.

Cross-entropy is computed through per-class log-softmax bounds and binary
cross-entropy through the shifted softplus form, so all bounds stay finite for
logit magnitudes and radii far beyond overflow range. Loss bounds are tight:
each endpoint is attained at a corner of the input box. Gradients are
per-sample (batch averaging happens in the layer backward rules).
"""

from __future__ import annotations

import numpy as np

from .interval import IntervalTensor

__all__ = [
    "CROSS_ENTROPY",
    "BINARY_CROSS_ENTROPY",
    "one_hot",
    "logsoftmax_interval",
    "softmax_interval",
    "ce_loss_interval",
    "ce_grad_interval",
    "bce_loss_interval",
    "bce_grad_interval",
]

CROSS_ENTROPY = "cross_entropy"
BINARY_CROSS_ENTROPY = "binary_cross_entropy"
LOSS_KINDS = (CROSS_ENTROPY, BINARY_CROSS_ENTROPY)


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ValueError("labels must be a 1-d integer vector")
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise ValueError("label outside class range")
    out = np.zeros((labels.shape[0], num_classes), dtype=np.float64)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _classes_from_one_hot(y: np.ndarray, num_classes: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != num_classes:
        raise ValueError(f"one-hot labels must have shape (batch, {num_classes})")
    if not np.all((y == 0.0) | (y == 1.0)) or not np.all(y.sum(axis=1) == 1.0):
        raise ValueError("labels are not one-hot")
    return np.argmax(y, axis=1)


def _class_index_vector(c, batch: int, num_classes: int) -> np.ndarray:
    c = np.asarray(c, dtype=np.int64)
    if c.ndim == 0:
        c = np.full(batch, int(c), dtype=np.int64)
    if c.shape != (batch,):
        raise ValueError("class index must be a scalar or one index per sample")
    if np.any(c < 0) or np.any(c >= num_classes):
        raise ValueError("class index out of range")
    return c


def _corner_logits(z: IntervalTensor, c: np.ndarray, side: str) -> np.ndarray:
    """Concrete logit matrix at the box corner that extremizes class ``c``.

    ``side="lower"``: class logit at its lower bound, competitors at their
    upper bounds (worst case for the class). ``side="upper"``: the opposite.
    """
    rows = np.arange(z.shape[0])
    if side == "lower":
        corner = z.upper.copy()
        corner[rows, c] = z.lower[rows, c]
    else:
        corner = z.lower.copy()
        corner[rows, c] = z.upper[rows, c]
    return corner


def _logsoftmax_at(corner: np.ndarray, c: np.ndarray) -> np.ndarray:
    # Shift by the row max so every exponent is <= 0.
    a = corner.max(axis=1, keepdims=True)
    shifted = corner - a
    rows = np.arange(corner.shape[0])
    return shifted[rows, c] - np.log(np.exp(shifted).sum(axis=1))


def _softmax_at(corner: np.ndarray, c: np.ndarray) -> np.ndarray:
    a = corner.max(axis=1, keepdims=True)
    e = np.exp(corner - a)
    rows = np.arange(corner.shape[0])
    return e[rows, c] / e.sum(axis=1)


def _check_multiclass(z: IntervalTensor) -> None:
    if z.ndim != 2 or z.shape[1] < 2:
        raise ValueError("multiclass bounds require logits of shape (batch, m) with m >= 2")


def logsoftmax_interval(z: IntervalTensor, c) -> IntervalTensor:
    """Sound, tight bounds on log-softmax of class ``c``, shape (batch, 1).

    The lower bound evaluates log-softmax at the corner where the class logit
    is lowest and all competitors are highest; the upper bound at the opposite
    corner. Each corner is stabilized by its own shift, so results stay finite
    for arbitrarily large logit magnitudes.
    """
    _check_multiclass(z)
    c = _class_index_vector(c, z.shape[0], z.shape[1])
    lo = _logsoftmax_at(_corner_logits(z, c, "lower"), c)
    hi = _logsoftmax_at(_corner_logits(z, c, "upper"), c)
    return IntervalTensor._wrap(lo.reshape(-1, 1), hi.reshape(-1, 1))


def softmax_interval(z: IntervalTensor, c) -> IntervalTensor:
    """Sound, tight per-class softmax probability bounds, shape (batch, 1)."""
    _check_multiclass(z)
    c = _class_index_vector(c, z.shape[0], z.shape[1])
    lo = _softmax_at(_corner_logits(z, c, "lower"), c)
    hi = _softmax_at(_corner_logits(z, c, "upper"), c)
    return IntervalTensor._wrap(lo.reshape(-1, 1), hi.reshape(-1, 1))


def ce_loss_interval(z: IntervalTensor, y: np.ndarray) -> IntervalTensor:
    """Cross-entropy bounds per sample, shape (batch, 1). ``y`` is one-hot."""
    _check_multiclass(z)
    c = _classes_from_one_hot(y, z.shape[1])
    ls = logsoftmax_interval(z, c)
    return -ls


def ce_grad_interval(z: IntervalTensor, y: np.ndarray) -> IntervalTensor:
    """Bounds on the per-sample cross-entropy gradient wrt logits, (batch, m).

    The concrete derivative is softmax(z) - y; each class probability gets its
    own tight bounds, then the one-hot shift is exact. Components lie in
    [-1, 1] by construction.
    """
    _check_multiclass(z)
    batch, m = z.shape
    c = _classes_from_one_hot(y, m)
    lo = np.empty((batch, m), dtype=np.float64)
    hi = np.empty((batch, m), dtype=np.float64)
    for i in range(m):
        p = softmax_interval(z, i)
        lo[:, i] = p.lower[:, 0]
        hi[:, i] = p.upper[:, 0]
    y_arr = one_hot(c, m)
    return IntervalTensor._wrap(lo - y_arr, hi - y_arr)


def _check_binary(z: IntervalTensor) -> None:
    if z.ndim != 2 or z.shape[1] != 1:
        raise ValueError("binary cross-entropy requires logits of shape (batch, 1)")


def _binary_labels(y: np.ndarray, batch: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape != (batch,):
        raise ValueError("need one 0/1 label per sample")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("binary labels must be 0 or 1")
    return y


def _bce_with_logits(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    # z - z*y + a + log(exp(-a) + exp(-z - a)) with a = max(-z, 0); every
    # exponent is <= 0 so the evaluation cannot overflow.
    a = np.maximum(-z, 0.0)
    return z - z * y + a + np.log(np.exp(-a) + np.exp(-z - a))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def bce_loss_interval(z: IntervalTensor, y: np.ndarray) -> IntervalTensor:
    """Binary cross-entropy-with-logits bounds per sample, shape (batch, 1).

    The loss is monotone in the logit (direction depends on the label), so
    evaluating the stabilized scalar form at both endpoints and sorting gives
    tight, sound bounds.
    """
    _check_binary(z)
    y = _binary_labels(y, z.shape[0]).reshape(-1, 1)
    at_lower = _bce_with_logits(z.lower, y)
    at_upper = _bce_with_logits(z.upper, y)
    return IntervalTensor._wrap(
        np.minimum(at_lower, at_upper), np.maximum(at_lower, at_upper)
    )


def bce_grad_interval(z: IntervalTensor, y: np.ndarray) -> IntervalTensor:
    """Bounds on the per-sample BCE gradient wrt the logit, shape (batch, 1).

    The concrete derivative sigmoid(z) - y is increasing in z, so the bounds
    are simply the endpoint evaluations; components lie in [-1, 1].
    """
    _check_binary(z)
    y = _binary_labels(y, z.shape[0]).reshape(-1, 1)
    return IntervalTensor._wrap(_sigmoid(z.lower) - y, _sigmoid(z.upper) - y)
