"""Elementwise and matrix interval arithmetic on n-d arrays of [lower, upper] bounds.

Every operation returns a sound enclosure: for any concrete operands drawn
from the input intervals, the concrete result lies inside the output interval.
Bounds are stored as the canonical representation; center/radius views are
computed on demand. Tensors are immutable values (the bound arrays are marked
read-only), so they are safe to share across threads.

Floating-point ops round to nearest; directed outward rounding is not applied.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = [
    "IntervalTensor",
    "rump_matmul",
    "apply_monotonic",
]

INCREASING = "increasing"
DECREASING = "decreasing"


def _as_float_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    return arr


def _check_elementwise_shapes(a_shape: tuple, b_shape: tuple) -> None:
    """Reject shape pairs other than exact match or bias-style broadcast.

    Bias-style means a 1-d vector combined with a 2-d matrix whose second
    dimension matches, i.e. the vector is applied to every row. General
    broadcasting is deliberately unsupported.
    """
    if a_shape == b_shape:
        return
    if len(a_shape) == 2 and b_shape == (a_shape[1],):
        return
    if len(b_shape) == 2 and a_shape == (b_shape[1],):
        return
    raise ValueError(
        f"incompatible interval shapes {a_shape} and {b_shape}: only equal "
        "shapes or bias-style (vector over matrix rows) broadcasting is supported"
    )


class IntervalTensor:
    """An n-dimensional array of closed real intervals.

    Invariant: ``lower <= upper`` elementwise, enforced at construction and
    preserved by every operation.
    """

    __slots__ = ("lower", "upper")

    def __init__(self, lower, upper):
        lower = _as_float_array(lower)
        upper = _as_float_array(upper)
        if lower.shape != upper.shape:
            raise ValueError(
                f"bound shapes differ: {lower.shape} vs {upper.shape}"
            )
        if not bool(np.all(lower <= upper)):
            raise ValueError("interval bounds out of order (lower > upper somewhere)")
        lower.setflags(write=False)
        upper.setflags(write=False)
        self.lower = lower
        self.upper = upper

    @classmethod
    def _wrap(cls, lower: np.ndarray, upper: np.ndarray) -> "IntervalTensor":
        # Fast path for arrays produced internally; invariant checked in debug builds.
        assert lower.shape == upper.shape
        assert bool(np.all(lower <= upper)), "operation produced lower > upper"
        obj = cls.__new__(cls)
        lower.setflags(write=False)
        upper.setflags(write=False)
        obj.lower = lower
        obj.upper = upper
        return obj

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def from_point(cls, values) -> "IntervalTensor":
        """Embed concrete values as degenerate (zero-radius) intervals."""
        arr = _as_float_array(values)
        return cls._wrap(arr, arr.copy())

    @classmethod
    def from_center_radius(cls, center, radius) -> "IntervalTensor":
        center = _as_float_array(center)
        radius = _as_float_array(radius)
        if np.any(radius < 0):
            raise ValueError("radius must be nonnegative")
        return cls._wrap(center - radius, center + radius)

    @classmethod
    def inflate(cls, values, eps: float) -> "IntervalTensor":
        """Surround concrete values with a symmetric box of half-width ``eps``."""
        if eps < 0:
            raise ValueError(f"eps must be nonnegative, got {eps}")
        arr = _as_float_array(values)
        return cls._wrap(arr - eps, arr + eps)

    # ------------------------------------------------------------------
    # views

    @property
    def shape(self) -> tuple:
        return self.lower.shape

    @property
    def ndim(self) -> int:
        return self.lower.ndim

    @property
    def size(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return (self.lower + self.upper) / 2.0

    @property
    def radius(self) -> np.ndarray:
        return (self.upper - self.lower) / 2.0

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def max_radius(self) -> float:
        """Largest interval radius in the tensor (0.0 for empty tensors)."""
        if self.size == 0:
            return 0.0
        return float(np.max(self.radius))

    def max_width(self) -> float:
        if self.size == 0:
            return 0.0
        return float(np.max(self.width))

    # ------------------------------------------------------------------
    # arithmetic

    def __add__(self, other: "IntervalTensor") -> "IntervalTensor":
        if not isinstance(other, IntervalTensor):
            return NotImplemented
        _check_elementwise_shapes(self.shape, other.shape)
        return IntervalTensor._wrap(self.lower + other.lower, self.upper + other.upper)

    def __sub__(self, other: "IntervalTensor") -> "IntervalTensor":
        if not isinstance(other, IntervalTensor):
            return NotImplemented
        _check_elementwise_shapes(self.shape, other.shape)
        return IntervalTensor._wrap(self.lower - other.upper, self.upper - other.lower)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(float(other))
        if not isinstance(other, IntervalTensor):
            return NotImplemented
        _check_elementwise_shapes(self.shape, other.shape)
        p1 = self.lower * other.lower
        p2 = self.lower * other.upper
        p3 = self.upper * other.lower
        p4 = self.upper * other.upper
        lower = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
        upper = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
        return IntervalTensor._wrap(lower, upper)

    def __rmul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(float(other))
        return NotImplemented

    def reciprocal(self) -> "IntervalTensor":
        """1 / interval; defined only when no element interval contains zero."""
        contains_zero = (self.lower <= 0.0) & (self.upper >= 0.0)
        if bool(np.any(contains_zero)):
            raise ZeroDivisionError("division by an interval containing zero")
        return IntervalTensor._wrap(1.0 / self.upper, 1.0 / self.lower)

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            s = float(other)
            if s == 0.0:
                raise ZeroDivisionError("division by zero scalar")
            return self.scale(1.0 / s)
        if not isinstance(other, IntervalTensor):
            return NotImplemented
        _check_elementwise_shapes(self.shape, other.shape)
        return self * other.reciprocal()

    def __neg__(self) -> "IntervalTensor":
        return IntervalTensor._wrap(-self.upper, -self.lower)

    def scale(self, s: float) -> "IntervalTensor":
        """Multiply by a concrete scalar (sign decides which bound maps where)."""
        if s >= 0.0:
            return IntervalTensor._wrap(self.lower * s, self.upper * s)
        return IntervalTensor._wrap(self.upper * s, self.lower * s)

    # ------------------------------------------------------------------
    # structural ops

    def transpose(self) -> "IntervalTensor":
        if self.ndim != 2:
            raise ValueError(f"transpose expects a 2-d tensor, got shape {self.shape}")
        return IntervalTensor._wrap(
            np.ascontiguousarray(self.lower.T), np.ascontiguousarray(self.upper.T)
        )

    def sum(self, axis: int) -> "IntervalTensor":
        # Interval addition is exact, so summing the bounds gives the exact hull.
        return IntervalTensor._wrap(self.lower.sum(axis=axis), self.upper.sum(axis=axis))

    def mean(self, axis: int) -> "IntervalTensor":
        n = self.shape[axis]
        if n == 0:
            raise ValueError("mean over an empty axis")
        return self.sum(axis).scale(1.0 / n)

    def reshape(self, *shape) -> "IntervalTensor":
        return IntervalTensor._wrap(
            self.lower.reshape(*shape), self.upper.reshape(*shape)
        )

    # ------------------------------------------------------------------
    # predicates

    def contains(self, values, slack: float = 0.0) -> bool:
        """True iff ``lower - slack <= values <= upper + slack`` elementwise."""
        arr = _as_float_array(values)
        if arr.shape != self.shape:
            raise ValueError(f"shape mismatch: {arr.shape} vs {self.shape}")
        if slack < 0:
            raise ValueError("slack must be nonnegative")
        return bool(np.all((self.lower - slack <= arr) & (arr <= self.upper + slack)))

    def __repr__(self) -> str:
        if self.size == 1 and self.ndim <= 1:
            return f"IntervalTensor([{float(self.lower.ravel()[0])!r}, {float(self.upper.ravel()[0])!r}])"
        return f"IntervalTensor(shape={self.shape}, max_width={self.max_width():.3g})"


def rump_matmul(a: IntervalTensor, b: IntervalTensor) -> IntervalTensor:
    """Interval matrix product via the midpoint-radius scheme.

    ``m_C = m_A @ m_B`` and ``r_C = (|m_A| + r_A) @ r_B + r_A @ |m_B|``, which
    costs three concrete matmuls. The result is a sound over-approximation of
    the exact interval product and collapses to the concrete product when
    either operand has zero radius.
    """
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("rump_matmul expects 2-d operands")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions disagree: {a.shape} @ {b.shape}")
    ma, ra = a.center, a.radius
    mb, rb = b.center, b.radius
    mc = ma @ mb
    rc = (np.abs(ma) + ra) @ rb + ra @ np.abs(mb)
    return IntervalTensor._wrap(mc - rc, mc + rc)


def apply_monotonic(
    a: IntervalTensor, f: Callable[[np.ndarray], np.ndarray], direction: str
) -> IntervalTensor:
    """Tight bounds for an elementwise monotone function.

    The caller asserts that ``f`` is monotone in the declared direction over
    each element interval; the bounds are then attained at the endpoints.
    """
    if direction == INCREASING:
        return IntervalTensor._wrap(f(a.lower), f(a.upper))
    if direction == DECREASING:
        return IntervalTensor._wrap(f(a.upper), f(a.lower))
    raise ValueError(f"direction must be '{INCREASING}' or '{DECREASING}', got {direction!r}")
