import math

import numpy as np
import pytest

from heislift.samples import random_sites
from heislift.whitney import CompactSet, Decomposition, decompose, root_cube, verify_whitney


def brute_box_distance(points, lo, hi):
    gap = np.maximum(np.maximum(lo[:, None] - points[None], points[None] - hi[:, None]), 0)
    return np.sqrt(np.min(np.sum(gap**2, axis=2), axis=1))


def test_compact_set_nearest_and_ties():
    Z = CompactSet([[1.0, 0.0], [-1.0, 0.0], [0.0, 3.0]])
    d, i = Z.nearest([[0.0, 0.0], [0.9, 0.1]])
    assert d[0] == 1.0 and i[0] == 0  # equidistant: lowest index
    assert i[1] == 0
    with pytest.raises(ValueError):
        CompactSet(np.zeros((0, 2)))


def test_distance_is_exact_and_1_lipschitz():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(50, 3))
    Z = CompactSet(pts)
    x = rng.normal(size=(2000, 3)) * 2
    brute = np.sqrt(np.min(np.sum((x[:, None] - pts[None]) ** 2, axis=2), axis=1))
    assert np.array_equal(Z.distance(x), brute)
    y = x + rng.normal(size=x.shape) * 0.1
    assert np.all(np.abs(Z.distance(x) - Z.distance(y)) <= np.linalg.norm(x - y, axis=1) + 1e-12)


def test_root_cube_leaves_an_eighth_margin():
    lo, side = root_cube([-1.0, -1.0], [1.0, 1.0])
    assert side == 4.0 and np.array_equal(lo, [-2.0, -2.0])
    lo, side = root_cube([0.0, 0.0, 0.0], [3.0, 1.0, 1.0])
    assert side >= 3.0 * 4 / 3 and math.log2(side).is_integer()


def test_single_point_annuli():
    Z = CompactSet([[0.0, 0.0]])
    dec = decompose(Z, [-1, -1], [1, 1], 9)
    lo, hi = dec.bounds()
    d = brute_box_distance(Z.points, lo, hi)
    diam = dec.diam()
    assert np.all(diam <= d * (1 + 1e-12))
    assert np.all(d <= 4 * diam * (1 + 1e-12))
    rep = verify_whitney(dec, Z)
    assert rep["passed"] and rep["ratio_max"] <= 4 and rep["ratio_min"] >= 1
    assert rep["max_neighbors"] <= 12**2
    # dyadic annuli: the generation grows as the cubes approach the point
    centre_dist = np.linalg.norm(0.5 * (lo + hi), axis=1)
    assert np.corrcoef(centre_dist, dec.gen)[0, 1] < -0.5


def test_root_unresolved_at_generation_zero():
    lo, side = root_cube([-1, -1], [1, 1])
    Z = CompactSet([lo + side / 2 + 1e-3])
    dec = decompose(Z, [-1, -1], [1, 1], 0)
    assert len(dec) == 0 and len(dec.unresolved) == 1


def test_two_points_cover():
    Z = CompactSet([[-0.5, 0.1], [0.4, -0.3]])
    G = 7
    dec = decompose(Z, [-1, -1], [1, 1], G)
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, size=(100_000, 2))
    # the root here has side 4, so the finest cubes have side 4 * 2^-G
    far = Z.distance(x) > 2.0 * dec.diam(np.array([G]))[0]
    lo, hi = dec.bounds()
    x = x[far]
    # brute-force membership in closed cubes, chunked
    hits = np.zeros(len(x), dtype=int)
    for s in range(0, len(lo), 256):
        inside = np.all((x[:, None] >= lo[None, s:s + 256]) & (x[:, None] < hi[None, s:s + 256]), axis=2)
        hits += inside.sum(axis=1)
    assert np.all(hits == 1)
    found = dec.find_cube(x)
    assert np.all(found >= 0)


@pytest.mark.parametrize("m,count,seed", [(2, 10, 0), (2, 200, 1), (3, 50, 2)])
def test_random_instances_pass_verification(m, count, seed):
    Z = CompactSet(random_sites(m, count, seed))
    dec = decompose(Z, -np.ones(m), np.ones(m), 7 if m == 2 else 5)
    rep = verify_whitney(dec, Z)
    assert rep["passed"], rep
    assert rep["max_generation_jump"] <= 1
    assert rep["max_neighbors"] <= 12**m


def test_determinism_and_refinement_monotonicity():
    Z = CompactSet(random_sites(2, 30, 5))
    a = decompose(Z, [-1, -1], [1, 1], 6)
    b = decompose(Z, [-1, -1], [1, 1], 6)
    assert np.array_equal(a.gen, b.gen) and np.array_equal(a.lattice, b.lattice)
    c = decompose(Z, [-1, -1], [1, 1], 8)
    old = {(g, tuple(l)) for g, l in zip(a.gen, a.lattice)}
    new = {(g, tuple(l)) for g, l in zip(c.gen, c.lattice)}
    assert old <= new
    assert all(g > 6 for g, _ in new - old)


def test_cubes_have_disjoint_interiors():
    Z = CompactSet(random_sites(2, 15, 6))
    dec = decompose(Z, [-1, -1], [1, 1], 7)
    # a point lies in exactly one half-open cube
    rng = np.random.default_rng(2)
    x = rng.uniform(-1, 1, size=(20_000, 2))
    lo, hi = dec.bounds()
    inside = np.all((x[:, None] >= lo[None]) & (x[:, None] < hi[None]), axis=2)
    assert inside.sum(axis=1).max() == 1


def test_json_round_trip():
    Z = CompactSet(random_sites(2, 10, 7))
    dec = decompose(Z, [-1, -1], [1, 1], 6)
    again = Decomposition.from_json(dec.to_json())
    assert np.array_equal(again.gen, dec.gen)
    assert np.array_equal(again.lattice, dec.lattice)
    assert np.array_equal(again.unresolved_lattice, dec.unresolved_lattice)


def test_rejects_sites_outside_omega():
    Z = CompactSet([[2.0, 0.0]])
    with pytest.raises(ValueError, match="site 0"):
        decompose(Z, [-1, -1], [1, 1], 4)
