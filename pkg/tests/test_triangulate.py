import math

import numpy as np
import pytest
from conftest import single_cube

from heislift.samples import random_sites
from heislift.triangulate import (
    SimplicialComplex,
    build_complex,
    flatness,
    quality_report,
    validate_complex,
)
from heislift.whitney import CompactSet, Decomposition, decompose


def two_squares() -> Decomposition:
    return Decomposition(
        root_lo=np.zeros(2),
        root_side=2.0,
        omega_lo=np.zeros(2),
        omega_hi=np.array([2.0, 1.0]),
        max_generation=1,
        gen=np.array([1, 1]),
        lattice=np.array([[0, 0], [1, 0]]),
        unresolved_gen=np.zeros(0, dtype=np.int64),
        unresolved_lattice=np.zeros((0, 2), dtype=np.int64),
    )


@pytest.mark.parametrize("m,expected", [(2, 8), (3, 48)])
def test_single_cube_counts(m, expected):
    cx = build_complex(single_cube(m))
    assert len(cx.top) == expected
    assert validate_complex(cx) == []
    assert np.isclose(cx.volumes().sum(), 1.0)


def test_single_square_is_one_similarity_class():
    q = quality_report(build_complex(single_cube(2)))
    assert q["similarity_classes"] == 1
    assert q["beta_le_B_le_diam"]


def test_two_adjacent_squares_share_edges():
    cx = build_complex(two_squares())
    assert len(cx.top) == 16
    assert validate_complex(cx) == []
    # the shared edge x = 1 is split at its midpoint, each half stored once
    E = cx.vertices[cx.simplices[1]]
    on_shared = np.all(np.isclose(E[:, :, 0], 1.0), axis=1)
    assert on_shared.sum() == 2


def test_locate_examples():
    cx = build_complex(single_cube(2))
    P = cx.simplex_coords()
    sid, bary = cx.locate(P[3].mean(axis=0))
    assert sid == 3 and np.allclose(bary, 1 / 3)
    v = cx.vertices[cx.top[5, 1]]
    sid, bary = cx.locate(v)
    assert cx.top[sid].tolist().count(cx.top[5, 1]) == 1
    assert np.isclose(bary.max(), 1.0)


@pytest.fixture(scope="module")
def complex2():
    Z = CompactSet(random_sites(2, 60, 3))
    dec = decompose(Z, [-1, -1], [1, 1], 8)
    return Z, build_complex(dec)


def test_locate_round_trip(complex2):
    _, cx = complex2
    rng = np.random.default_rng(0)
    lo, hi = cx.dec.bounds()
    k = rng.integers(0, len(lo), size=100_000)
    x = lo[k] + rng.random((100_000, 2)) * (hi[k] - lo[k])
    sid, bary = cx.locate_many(x)
    assert np.all(sid >= 0)
    back = np.einsum("ni,nid->nd", bary, cx.vertices[cx.top[sid]])
    assert np.max(np.abs(back - x)) <= 1e-10


def test_locate_hint_does_not_change_the_answer(complex2):
    _, cx = complex2
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, size=(5000, 2))
    sid, bary = cx.locate_many(x)
    wrong = rng.integers(0, len(cx.top), size=len(x))
    sid2, bary2 = cx.locate_many(x, hint=wrong)
    assert np.array_equal(sid, sid2)
    sid3, _ = cx.locate_many(x, hint=np.where(sid >= 0, sid, -1))
    assert np.array_equal(sid, sid3)


def test_complex_validity_and_size(complex2):
    Z, cx = complex2
    assert validate_complex(cx) == []
    q = quality_report(cx, Z)
    assert q["size_lower_violations"] == 0
    assert q["size_upper_violations"] == 0
    assert q["size_ratio_min"] >= 1.0
    assert q["size_ratio_max"] <= 12 * math.sqrt(2)
    assert all(np.isfinite(c["diam_over_beta"]) and c["diam_over_beta"] > 0 for c in q["per_class"])


def test_closure_every_face_is_stored(complex2):
    _, cx = complex2
    for k in range(1, cx.m + 1):
        F = cx.facets[k]
        assert F.min() >= 0 and F.max() < len(cx.simplices[k - 1])
        for i in range(k + 1):
            assert np.array_equal(cx.simplices[k - 1][F[:, i]], np.delete(cx.simplices[k], i, axis=1))


def test_union_is_the_cube_union(complex2):
    _, cx = complex2
    vol = np.bincount(cx.parent_cube, weights=cx.volumes(), minlength=len(cx.dec))
    lo, hi = cx.dec.bounds()
    assert np.allclose(vol, np.prod(hi - lo, axis=1), rtol=1e-9)


def test_similarity_classes_stable_under_refinement():
    Z = CompactSet(random_sites(2, 25, 4))
    counts = set()
    for G in (6, 8, 10):
        cx = build_complex(decompose(Z, [-1, -1], [1, 1], G))
        counts.add(quality_report(cx)["similarity_classes"])
    assert len(counts) == 1


def test_flatness_of_a_right_triangle():
    P = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
    beta, B = flatness(P)
    # faces of every dimension count: the triangle's barycentre is 1/(3 sqrt 2)
    # from the hypotenuse, the hypotenuse midpoint is sqrt(2)/2 from its ends
    assert beta[0] == pytest.approx(1 / (3 * math.sqrt(2)))
    assert B[0] == pytest.approx(math.sqrt(2) / 2)


def test_json_round_trip(complex2):
    _, cx = complex2
    again = SimplicialComplex.from_json(cx.to_json(), cx.dec)
    for a, b in zip(cx.simplices, again.simplices):
        assert np.array_equal(a, b)
    assert np.array_equal(cx.vertices, again.vertices)


def test_off_export():
    text = build_complex(single_cube(2)).to_off()
    lines = text.splitlines()
    assert lines[0] == "OFF" and lines[1] == "9 8 0"


def test_three_dimensional_instance_is_valid():
    Z = CompactSet(random_sites(3, 20, 5))
    cx = build_complex(decompose(Z, -np.ones(3), np.ones(3), 5))
    assert validate_complex(cx) == []
    q = quality_report(cx, Z)
    assert q["size_lower_violations"] == q["size_upper_violations"] == 0
