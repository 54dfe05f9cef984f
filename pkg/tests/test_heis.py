import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from heislift.heis import (
    GAMMA_H,
    HorizontalPath,
    HPoint,
    batch_lift,
    connect_batch,
    connect_points,
    dilate,
    group_inv,
    group_mul,
    koranyi_dist,
    koranyi_norm,
    lift_increment,
    path_length,
    vertical_defect,
)

coord = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
hpoint = arrays(np.float64, 3, elements=coord)
hpoint2 = arrays(np.float64, 5, elements=coord)


def test_group_law_examples():
    assert np.array_equal(group_mul([1, 2, 3], [0, 0, 0]), [1, 2, 3])
    assert np.array_equal(group_mul([1, 0, 0], [0, 1, 0]), [1, 1, -2])
    assert np.array_equal(group_inv([0, 0, 0]), [0, 0, 0])
    assert np.array_equal(group_inv([1, 1, -2]), [-1, -1, 2])
    assert np.array_equal(group_mul([1, 1, -2], [-1, -1, 2]), [0, 0, 0])


def test_koranyi_examples():
    assert koranyi_dist([3, 4, 0], [0, 0, 0]) == pytest.approx(5.0, abs=1e-12)
    assert koranyi_dist([0, 0, 9], [0, 0, 0]) == pytest.approx(3.0, abs=1e-12)
    assert koranyi_dist([1, 2, 3], [1, 2, 3]) == 0.0


def test_lift_increment_examples():
    assert lift_increment([0, 0], [1, 0]) == 0.0
    assert lift_increment([1, 0], [1, 1]) == -2.0
    square = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]], dtype=float)
    assert sum(lift_increment(a, b) for a, b in zip(square[:-1], square[1:])) == -4.0


def test_path_length_examples():
    assert path_length(HorizontalPath(np.array([[0.0, 0.0], [3.0, 4.0]]), 0.0)) == 5.0
    assert path_length(HorizontalPath(np.array([[1.0, 2.0]]), 0.0)) == 0.0
    square = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]], dtype=float)
    assert path_length(HorizontalPath(square, 0.0)) == 4.0


def test_connect_examples():
    seg = connect_points([0, 0, 0], [1, 0, 0])
    assert len(seg.vertices) == 2
    assert seg.length() == pytest.approx(1.0)
    assert np.allclose(seg.end(), [1, 0, 0], atol=1e-12)

    loop = connect_points([0, 0, 0], [0, 0, -4])
    assert loop.length() == pytest.approx(4.0)
    assert np.allclose(loop.end(), [0, 0, -4], atol=1e-12)
    sides = loop.segment_lengths
    assert np.allclose(sides, 1.0)

    still = connect_points([1, 2, 3], [1, 2, 3])
    assert still.length() == 0.0
    assert np.array_equal(still.end(), [1, 2, 3])


@settings(max_examples=200, deadline=None)
@given(hpoint, hpoint, hpoint)
def test_group_axioms(p, q, r):
    e = np.zeros(3)
    assert np.allclose(group_mul(p, e), p)
    assert np.allclose(group_mul(e, p), p)
    scale = 1 + np.max(np.abs(np.concatenate([p, q, r]))) ** 2
    assert np.allclose(group_mul(p, group_inv(p)), e, atol=1e-12 * scale)
    lhs = group_mul(group_mul(p, q), r)
    rhs = group_mul(p, group_mul(q, r))
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-10 * scale)
    assert np.array_equal(group_inv(group_inv(p)), p)


@settings(max_examples=200, deadline=None)
@given(hpoint2, hpoint2, hpoint2)
def test_left_invariance(g, p, q):
    d = koranyi_dist(p, q)
    dg = koranyi_dist(group_mul(g, p), group_mul(g, q))
    # rounding of the height (size eps * scale^2) enters the norm under a square root
    scale = 1 + np.max(np.abs(np.concatenate([g, p, q])))
    assert dg == pytest.approx(d, rel=1e-9, abs=4e-8 * scale)


@settings(max_examples=200, deadline=None)
@given(hpoint, hpoint, st.floats(0.01, 100))
def test_dilation_homogeneity(p, q, lam):
    d = koranyi_dist(p, q)
    assert koranyi_dist(dilate(p, lam), dilate(q, lam)) == pytest.approx(lam * d, rel=1e-10, abs=1e-12)


def test_koranyi_triangle_inequality_random():
    rng = np.random.default_rng(0)
    p, q, r = (rng.normal(size=(10_000, 3)) * 3 for _ in range(3))
    assert np.all(koranyi_dist(p, r) <= koranyi_dist(p, q) + koranyi_dist(q, r) + 1e-12)


def _quadrature_lift(vertices, t0, sub=128):
    """Composite midpoint rule for dt = 2 sum(y dx - x dy), ``sub`` steps per segment."""
    t = [t0]
    for a, b in zip(vertices[:-1], vertices[1:]):
        s = (np.arange(sub) + 0.5) / sub
        pts = a + s[:, None] * (b - a)
        d = (b - a) / sub
        x, y = pts[:, 0::2], pts[:, 1::2]
        dx, dy = d[0::2], d[1::2]
        t.append(t[-1] + 2 * np.sum(y * dx - x * dy))
    return np.array(t)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (6, 2), elements=st.floats(-5, 5)), st.floats(-5, 5))
def test_lift_matches_quadrature(verts, t0):
    path = HorizontalPath(verts, t0)
    assert np.allclose(path.lifted_t, _quadrature_lift(verts, t0), rtol=0, atol=1e-9)


def test_lifted_heights_are_exact_increments():
    rng = np.random.default_rng(1)
    v = rng.normal(size=(7, 4))
    path = HorizontalPath(v, 0.5)
    assert path.lifted_t[0] == 0.5
    inc = np.diff(path.lifted_t)
    assert np.allclose(inc, lift_increment(v[:-1], v[1:]), rtol=0, atol=1e-15)


def test_connect_endpoint_and_length_bound_10k_pairs():
    rng = np.random.default_rng(2)
    p = rng.normal(size=(10_000, 3)) * rng.uniform(0.01, 10, size=(10_000, 1))
    q = rng.normal(size=(10_000, 3)) * rng.uniform(0.01, 10, size=(10_000, 1))
    verts, t0 = connect_batch(p, q)
    lifted = batch_lift(verts, t0)
    end = np.concatenate([verts[:, -1], lifted[:, -1:]], axis=1)
    assert np.max(np.abs(end - q)) <= 1e-9 * max(1.0, np.max(np.abs(q)))
    length = np.sum(np.linalg.norm(np.diff(verts, axis=1), axis=2), axis=1)
    ratio = length / koranyi_dist(p, q)
    assert ratio.max() <= GAMMA_H * (1 + 1e-12)
    # the CC distance dominates Koranyi, so no horizontal path can be shorter
    assert ratio.min() >= 1 - 1e-12


def test_gamma_h_is_attained():
    # equality in Hoelder needs sqrt|t| = 2^(1/3) |xy|
    a = 1.0
    t = 2.0 ** (2.0 / 3.0) * a * a
    path = connect_points([0, 0, 0], [a, 0, t])
    ratio = path.length() / koranyi_dist([a, 0, t], [0, 0, 0])
    assert ratio == pytest.approx(GAMMA_H, rel=1e-9)


def test_height_term_bounded_by_koranyi():
    # |vertical defect|^(1/2) <= d_K, with constant exactly 1
    rng = np.random.default_rng(3)
    p, q = rng.normal(size=(2, 10_000, 3)) * 4
    assert np.all(np.sqrt(np.abs(vertical_defect(p, q))) <= koranyi_dist(p, q) * (1 + 1e-12))


def test_connect_higher_n():
    rng = np.random.default_rng(4)
    p, q = rng.normal(size=(2, 5))
    path = connect_points(p, q)
    assert np.allclose(path.start(), p, atol=1e-12)
    assert np.allclose(path.end(), q, atol=1e-9)
    assert path.length() <= GAMMA_H * koranyi_dist(p, q) * (1 + 1e-12)


def test_left_translation_of_paths():
    path = connect_points([0.2, -0.1, 0.4], [1.0, 0.5, -2.0])
    g = np.array([0.3, 0.7, -1.1])
    moved = path.translated(g)
    assert np.allclose(moved.points(), group_mul(g, path.points()), atol=1e-12)
    assert moved.length() == pytest.approx(path.length())


def test_path_at_constant_speed():
    path = connect_points([0, 0, 0], [0, 0, -4])
    assert np.allclose(path.at(0.0), [0, 0, 0])
    assert np.allclose(path.at(1.0), [0, 0, -4], atol=1e-12)
    # a quarter of the way round the unit square is the first corner
    assert np.allclose(path.at(0.25)[:2], path.vertices[1], atol=1e-12)


def test_path_json_round_trip_and_tamper_check():
    path = connect_points([0.1, 0.2, 0.3], [1.0, -1.0, 2.0])
    obj = path.to_json()
    again = HorizontalPath.from_json(obj)
    assert np.array_equal(again.points(), path.points())
    obj["lifted_t"][-1] += 1e-3
    with pytest.raises(ValueError):
        HorizontalPath.from_json(obj)


def test_hpoint_wrapper():
    p = HPoint.from_array([1, 0, 0])
    q = HPoint.from_array([0, 1, 0])
    assert np.array_equal((p * q).to_array(), [1, 1, -2])
    assert np.array_equal(p.inv().to_array(), [-1, 0, 0])
    assert HPoint.identity().to_array().tolist() == [0, 0, 0]
    assert p.dist(p) == 0.0
    with pytest.raises(ValueError):
        HPoint.from_array([1, 2, 3, 4])


def test_mismatched_dimensions_rejected():
    with pytest.raises(ValueError):
        group_mul([1, 2, 3], [1, 2, 3, 4, 5])


def test_gamma_closed_form():
    assert GAMMA_H == pytest.approx((1 + 2 ** (4 / 3)) ** 0.75)
    assert 2.5 < GAMMA_H < 2.6
    assert koranyi_norm([0, 0, 0]) == 0.0
    assert math.isfinite(GAMMA_H)
