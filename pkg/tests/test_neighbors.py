import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from manifoldron.errors import InputError
from manifoldron.neighbors import build, knn, unique_points

from oracles import knn_brute


def test_single_point():
    tree = build(np.array([[1.0, 2.0]]))
    assert tree.depth == 0
    assert knn(tree, [0.0, 0.0], 1) == [(0, pytest.approx(np.sqrt(5)))]


def test_every_point_findable(rng):
    pts = rng.random((1000, 3))
    tree = build(pts)
    ids, dist = tree.query_many(pts, 1)
    assert np.array_equal(ids[:, 0], np.arange(1000))
    assert np.all(dist == 0)


def test_duplicates_both_retrievable():
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]])
    ids, dist = build(pts).query([0.0, 0.0], 2)
    assert ids.tolist() == [0, 2]
    assert dist.tolist() == [0.0, 0.0]


def test_line_example():
    tree = build(np.array([[0.0], [1.0], [2.0], [3.0]]))
    assert [i for i, _ in knn(tree, [1.1], 2)] == [1, 2]


def test_stored_point_k1():
    pts = np.random.default_rng(1).random((50, 2))
    assert knn(build(pts), pts[17], 1) == [(17, 0.0)]


def test_matches_linear_scan_6d(rng):
    pts = rng.random((500, 6))
    tree = build(pts)
    queries = rng.random((100, 6))
    ids, _ = tree.query_many(queries, 14)
    for q, got in zip(queries, ids):
        assert np.array_equal(got, knn_brute(pts, q, 14))


def test_ties_broken_by_lower_id():
    g = np.stack(np.meshgrid(np.arange(4.0), np.arange(4.0)), -1).reshape(-1, 2)
    order = np.random.default_rng(0).permutation(16)
    pts = g[order]
    tree = build(pts, leaf_size=2)
    for q in pts:
        ids, _ = tree.query(q, 5)
        assert np.array_equal(ids, knn_brute(pts, q, 5))


def test_errors():
    with pytest.raises(InputError):
        build(np.zeros((0, 2)))
    tree = build(np.zeros((3, 2)) + np.arange(3)[:, None])
    with pytest.raises(InputError):
        tree.query([0.0, 0.0], 4)
    with pytest.raises(InputError):
        tree.query([0.0, 0.0, 0.0], 1)


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 80), st.integers(1, 20),
       st.integers(1, 8))
def test_exact_and_monotone(seed, dim, n, k, leaf):
    rng = np.random.default_rng(seed)
    # coarse grid values create many exact distance ties
    pts = rng.integers(0, 4, size=(n, dim)).astype(float)
    k = min(k, n)
    tree = build(pts, leaf_size=leaf)
    q = rng.integers(0, 4, size=dim) + rng.choice([0.0, 0.5])
    ids, dist = tree.query(q, k)
    assert np.array_equal(ids, knn_brute(pts, q, k))
    assert np.all(np.diff(dist) >= 0)
    if k < n:
        more, _ = tree.query(q, k + 1)
        assert set(ids) <= set(more)


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.5))
def test_radius_query(seed, r):
    rng = np.random.default_rng(seed)
    pts = rng.random((60, 2))
    q = rng.random(2)
    got = build(pts, leaf_size=4).query_radius(q, r)
    expected = np.flatnonzero(np.linalg.norm(pts - q, axis=1) <= r)
    assert np.array_equal(got, expected)


def test_unique_points_merges_to_lowest_id():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [1.0, 1e-15], [2.0, 2.0]])
    assert unique_points(pts).tolist() == [0, 1, 0, 1, 4]
