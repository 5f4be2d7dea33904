"""Interval arithmetic: exactness, soundness by sampling, matmul containment."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from certitrain.interval import INCREASING, DECREASING, IntervalTensor, apply_monotonic, rump_matmul
from certitrain.oracle import exact_matmul_hull

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


def iv(lo, hi):
    return IntervalTensor(np.atleast_1d(lo), np.atleast_1d(hi))


def scalar_interval_op_hull(al, au, bl, bu, op):
    """Endpoint-enumeration oracle for exact scalar interval ops."""
    vals = [op(a, b) for a in (al, au) for b in (bl, bu)]
    return min(vals), max(vals)


# ---------------------------------------------------------------- construction


def test_from_point_degenerate():
    t = IntervalTensor.from_point([2.0])
    assert t.lower[0] == 2.0 and t.upper[0] == 2.0
    assert t.max_radius() == 0.0


def test_from_point_empty():
    t = IntervalTensor.from_point([])
    assert t.shape == (0,)
    assert t.max_radius() == 0.0


def test_from_point_vector():
    t = IntervalTensor.from_point([-1.0, 3.0])
    np.testing.assert_array_equal(t.lower, [-1.0, 3.0])
    np.testing.assert_array_equal(t.upper, [-1.0, 3.0])


def test_constructor_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        IntervalTensor([1.0], [0.0])
    with pytest.raises(ValueError):
        IntervalTensor([np.nan], [1.0])


def test_constructor_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        IntervalTensor([1.0, 2.0], [3.0])


def test_bounds_are_immutable():
    t = IntervalTensor.from_point([1.0])
    with pytest.raises(ValueError):
        t.lower[0] = 5.0


def test_inflate_basic():
    t = IntervalTensor.inflate([0.5], 0.1)
    np.testing.assert_allclose(t.lower, [0.4])
    np.testing.assert_allclose(t.upper, [0.6])


def test_inflate_zero_eps_degenerate():
    t = IntervalTensor.inflate([0.5], 0.0)
    np.testing.assert_array_equal(t.lower, t.upper)


def test_inflate_no_clamping():
    t = IntervalTensor.inflate([0.0, 1.0], 1e-3)
    np.testing.assert_allclose(t.lower, [-0.001, 0.999])
    np.testing.assert_allclose(t.upper, [0.001, 1.001])


def test_inflate_rejects_negative_eps():
    with pytest.raises(ValueError):
        IntervalTensor.inflate([0.5], -0.1)


def test_center_radius_round_trip():
    t = IntervalTensor([[-1.0, 0.5]], [[2.0, 0.5]])
    back = IntervalTensor.from_center_radius(t.center, t.radius)
    np.testing.assert_allclose(back.lower, t.lower, rtol=0, atol=1e-15)
    np.testing.assert_allclose(back.upper, t.upper, rtol=0, atol=1e-15)
    assert np.all(t.radius >= 0)


# ---------------------------------------------------------------- elementwise ops


def test_add_examples():
    r = iv(1, 2) + iv(3, 4)
    assert (r.lower[0], r.upper[0]) == (4.0, 6.0)
    r = iv(0, 0) + iv(-1, 1)
    assert (r.lower[0], r.upper[0]) == (-1.0, 1.0)
    r = iv(-1, 1) + iv(-1, 1)
    assert (r.lower[0], r.upper[0]) == (-2.0, 2.0)


def test_sub_examples():
    r = iv(4, 6) - iv(1, 2)
    assert (r.lower[0], r.upper[0]) == (2.0, 5.0)
    a = iv(0, 1)
    r = a - a  # dependency loss: A - A is not [0, 0]
    assert (r.lower[0], r.upper[0]) == (-1.0, 1.0)
    r = iv(3, 3) - iv(1, 1)
    assert (r.lower[0], r.upper[0]) == (2.0, 2.0)


def test_mul_examples():
    # endpoint products of [-1,2]*[3,4] are {-3,-4,6,8}
    assert scalar_interval_op_hull(-1, 2, 3, 4, lambda a, b: a * b) == (-4, 8)
    r = iv(-1, 2) * iv(3, 4)
    assert (r.lower[0], r.upper[0]) == (-4.0, 8.0)
    r = iv(0, 0) * iv(-5, 5)
    assert (r.lower[0], r.upper[0]) == (0.0, 0.0)
    r = iv(2, 2) * iv(3, 3)
    assert (r.lower[0], r.upper[0]) == (6.0, 6.0)


def test_div_examples():
    r = iv(1, 1) / iv(2, 4)
    np.testing.assert_allclose([r.lower[0], r.upper[0]], [0.25, 0.5])
    r = iv(1, 1) / iv(1, 1)
    assert (r.lower[0], r.upper[0]) == (1.0, 1.0)
    with pytest.raises(ZeroDivisionError):
        iv(-2, 2) / iv(-1, 1)


@given(
    st.tuples(finite, finite).map(sorted),
    st.tuples(finite, finite).map(sorted),
)
def test_add_sub_mul_match_endpoint_hull(ab, cd):
    al, au = ab
    bl, bu = cd
    a, b = iv(al, au), iv(bl, bu)
    for op, f in ((a + b, lambda x, y: x + y), (a - b, lambda x, y: x - y), (a * b, lambda x, y: x * y)):
        lo, hi = scalar_interval_op_hull(al, au, bl, bu, f)
        assert op.lower[0] == lo
        assert op.upper[0] == hi


@given(
    st.tuples(finite, finite).map(sorted),
    st.tuples(
        st.floats(min_value=0.1, max_value=1e6),
        st.floats(min_value=0.1, max_value=1e6),
    ).map(sorted),
    st.booleans(),
)
def test_div_matches_endpoint_hull(ab, cd, negate):
    al, au = ab
    bl, bu = cd
    if negate:
        bl, bu = -bu, -bl
    a, b = iv(al, au), iv(bl, bu)
    r = a / b
    lo, hi = scalar_interval_op_hull(al, au, bl, bu, lambda x, y: x / y)
    np.testing.assert_allclose([r.lower[0], r.upper[0]], [lo, hi], rtol=1e-12)


def _random_intervals(rng, n, scale=10.0):
    centers = rng.uniform(-scale, scale, n)
    radii = rng.uniform(0.0, scale, n)
    return IntervalTensor(centers - radii, centers + radii)


def test_binary_op_soundness_sampling(rng):
    """10^4 interval pairs x 10^2 interior points: concrete results contained."""
    n, k = 10_000, 100
    a = _random_intervals(rng, n)
    b = _random_intervals(rng, n)
    # keep divisors away from zero for the division case
    b_div_center = rng.uniform(1.0, 10.0, n) * rng.choice([-1.0, 1.0], n)
    b_div_radius = rng.uniform(0.0, 0.9, n)
    b_div = IntervalTensor(b_div_center - b_div_radius, b_div_center + b_div_radius)

    ua = rng.uniform(0.0, 1.0, (k, n))
    ub = rng.uniform(0.0, 1.0, (k, n))
    xa = a.lower + ua * (a.upper - a.lower)
    xb = b.lower + ub * (b.upper - b.lower)
    xb_div = b_div.lower + ub * (b_div.upper - b_div.lower)

    cases = [
        (a + b, xa + xb),
        (a - b, xa - xb),
        (a * b, xa * xb),
        (a / b_div, xa / xb_div),
    ]
    for out, concrete in cases:
        slack = 1e-9 * np.maximum(1.0, np.maximum(np.abs(out.lower), np.abs(out.upper)))
        assert np.all(concrete >= out.lower - slack)
        assert np.all(concrete <= out.upper + slack)


def test_subtraction_radius_law_exact():
    # dyadic bounds make the floating-point arithmetic exact
    rng = np.random.default_rng(7)
    k = 1000
    scale = 2.0 ** -20
    al = rng.integers(-1000, 1000, k) * scale
    au = al + rng.integers(0, 1000, k) * scale
    bl = rng.integers(-1000, 1000, k) * scale
    bu = bl + rng.integers(0, 1000, k) * scale
    a, b = IntervalTensor(al, au), IntervalTensor(bl, bu)
    r = a - b
    np.testing.assert_array_equal(r.radius, a.radius + b.radius)


# ---------------------------------------------------------------- rump matmul


def test_rump_1x1_spec_cases():
    a = IntervalTensor([[-1.0]], [[1.0]])
    b = IntervalTensor([[2.0]], [[4.0]])
    r = rump_matmul(a, b)
    # coincides with the exact hull here
    assert (r.lower[0, 0], r.upper[0, 0]) == (-4.0, 4.0)

    c = IntervalTensor([[1.0]], [[2.0]])
    r = rump_matmul(c, c)
    # strict superset of the exact hull [1, 4]
    assert (r.lower[0, 0], r.upper[0, 0]) == (0.5, 4.0)
    h = exact_matmul_hull(c, c)
    assert (h.lower[0, 0], h.upper[0, 0]) == (1.0, 4.0)


def test_rump_zero_radius_equals_concrete():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(3, 4))
    y = rng.normal(size=(4, 2))
    r = rump_matmul(IntervalTensor.from_point(x), IntervalTensor.from_point(y))
    np.testing.assert_array_equal(r.lower, x @ y)
    np.testing.assert_array_equal(r.upper, x @ y)
    assert r.max_radius() == 0.0


def test_rump_contains_exact_hull_random(rng):
    # tolerance covers round-to-nearest noise only (the two sides use
    # different summation orders); real over-tightness would be macroscopic
    for _ in range(300):
        m, n, p = rng.integers(1, 5, 3)
        ac = rng.uniform(-2, 2, (m, n))
        ar = rng.uniform(0, 2, (m, n))
        bc = rng.uniform(-2, 2, (n, p))
        br = rng.uniform(0, 2, (n, p))
        a = IntervalTensor(ac - ar, ac + ar)
        b = IntervalTensor(bc - br, bc + br)
        r = rump_matmul(a, b)
        h = exact_matmul_hull(a, b)
        tol = 1e-12 * np.maximum(1.0, np.abs(h.lower))
        assert np.all(r.lower <= h.lower + tol)
        assert np.all(r.upper >= h.upper - tol)


def test_rump_sound_by_sampling(rng):
    a = _random_intervals(rng, 12, scale=3.0).reshape(3, 4)
    b = _random_intervals(rng, 8, scale=3.0).reshape(4, 2)
    out = rump_matmul(a, b)
    for _ in range(200):
        xa = a.lower + rng.uniform(0, 1, a.shape) * a.width
        xb = b.lower + rng.uniform(0, 1, b.shape) * b.width
        assert out.contains(xa @ xb, slack=1e-9 * max(1.0, out.max_width()))


def test_rump_dimension_mismatch():
    a = IntervalTensor.from_point(np.zeros((2, 3)))
    b = IntervalTensor.from_point(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        rump_matmul(a, b)


# ---------------------------------------------------------------- monotone map


def test_apply_monotonic_examples():
    r = apply_monotonic(iv(0, 1), np.exp, INCREASING)
    np.testing.assert_allclose([r.lower[0], r.upper[0]], [1.0, np.e])
    r = apply_monotonic(iv(1, 3), lambda x: -x, DECREASING)
    np.testing.assert_allclose([r.lower[0], r.upper[0]], [-3.0, -1.0])
    sig = lambda x: 1.0 / (1.0 + np.exp(-x))
    r = apply_monotonic(iv(0, 0), sig, INCREASING)
    np.testing.assert_allclose([r.lower[0], r.upper[0]], [0.5, 0.5])


def test_apply_monotonic_rejects_bad_direction():
    with pytest.raises(ValueError):
        apply_monotonic(iv(0, 1), np.exp, "sideways")


# ---------------------------------------------------------------- plumbing ops


def test_contains_boundary_and_slack():
    a = iv(0, 1)
    assert a.contains([0.5])
    assert not a.contains([1.0000001])
    assert a.contains([1.0000001], slack=1e-6)
    assert iv(2, 2).contains([2.0])
    with pytest.raises(ValueError):
        a.contains([[0.5]])


def test_neg_scale_transpose():
    t = IntervalTensor([[-1.0, 0.0]], [[2.0, 3.0]])
    n = -t
    np.testing.assert_array_equal(n.lower, [[-2.0, -3.0]])
    np.testing.assert_array_equal(n.upper, [[1.0, 0.0]])
    s = t.scale(-2.0)
    np.testing.assert_array_equal(s.lower, [[-4.0, -6.0]])
    np.testing.assert_array_equal(s.upper, [[2.0, 0.0]])
    assert (2.0 * iv(1, 2)).upper[0] == 4.0
    tt = t.transpose()
    assert tt.shape == (2, 1)
    with pytest.raises(ValueError):
        iv(0, 1).transpose()


def test_reduce_sum_mean_exact():
    t = IntervalTensor([[1.0, 2.0], [3.0, 4.0]], [[2.0, 3.0], [4.0, 5.0]])
    s = t.sum(axis=0)
    np.testing.assert_array_equal(s.lower, [4.0, 6.0])
    np.testing.assert_array_equal(s.upper, [6.0, 8.0])
    m = t.mean(axis=1)
    np.testing.assert_allclose(m.lower, [1.5, 3.5])
    np.testing.assert_allclose(m.upper, [2.5, 4.5])


def test_max_radius_width_stats():
    t = IntervalTensor([[0.0, 1.0]], [[1.0, 1.5]])
    assert t.max_radius() == 0.5
    assert t.max_width() == 1.0


def test_bias_broadcast_allowed_general_rejected():
    mat = IntervalTensor.from_point(np.zeros((3, 2)))
    vec = IntervalTensor([-1.0, 0.0], [1.0, 2.0])
    r = mat + vec
    assert r.shape == (3, 2)
    np.testing.assert_array_equal(r.lower, np.tile([-1.0, 0.0], (3, 1)))
    col = IntervalTensor.from_point(np.zeros((3, 1)))
    with pytest.raises(ValueError):
        mat + col  # general broadcasting is not supported
    with pytest.raises(ValueError):
        mat + IntervalTensor.from_point(np.zeros(3))


def test_empty_tensors_propagate():
    e = IntervalTensor.from_point(np.zeros((0, 2)))
    assert (e + e).shape == (0, 2)
    assert (e * e).shape == (0, 2)
    r = rump_matmul(e, IntervalTensor.from_point(np.zeros((2, 3))))
    assert r.shape == (0, 3)


@given(st.lists(st.tuples(finite, finite).map(sorted), min_size=1, max_size=8))
def test_lower_le_upper_preserved(pairs):
    lo = np.array([p[0] for p in pairs])
    hi = np.array([p[1] for p in pairs])
    t = IntervalTensor(lo, hi)
    for out in (t + t, t - t, t * t, -t, t.scale(-3.0), t.sum(axis=0)):
        assert np.all(out.lower <= out.upper)


def test_inclusion_monotonicity_of_ops(rng):
    """Shrinking the operands can only shrink the result box (the property
    test-radius monotonicity of certification rests on)."""
    for _ in range(200):
        c = rng.uniform(-3, 3, 6)
        r_big = rng.uniform(0.1, 2.0, 6)
        r_small = r_big * rng.uniform(0, 1, 6)
        off = (r_big - r_small) * rng.uniform(-1, 1, 6)
        big = IntervalTensor(c - r_big, c + r_big)
        small = IntervalTensor(c + off - r_small, c + off + r_small)

        pairs = [
            (small + small, big + big),
            (small - small, big - big),
            (small * small, big * big),
            (-small, -big),
            (small.scale(-2.5), big.scale(-2.5)),
            (
                rump_matmul(small.reshape(2, 3), small.reshape(3, 2)),
                rump_matmul(big.reshape(2, 3), big.reshape(3, 2)),
            ),
        ]
        for inner, outer in pairs:
            assert np.all(outer.lower <= inner.lower + 1e-12)
            assert np.all(outer.upper >= inner.upper - 1e-12)
