import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from manifoldron.datagen import gen_toy2d
from manifoldron.delaunay import triangulate
from manifoldron.errors import EmptyManifold, InputError, NotEnoughPoints
from manifoldron.manifold import (
    JITTER,
    SimplicialComplex,
    build_complex,
    envelope,
    facet_incidence,
    fit_class_manifold,
    jitter_if_degenerate,
    trim,
)
from manifoldron.neighbors import KdTree

from oracles import hull_facets_brute

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def as_set(simplices):
    return {tuple(int(v) for v in row) for row in simplices}


def untrimmed(points, seed=0):
    tri = triangulate(points, seed)
    tree = KdTree(points)
    return tri, tree


class TestJitter:
    def test_full_rank_unchanged(self, rng):
        pts = rng.normal(size=(20, 3))
        assert np.array_equal(jitter_if_degenerate(pts), pts)

    def test_diagonal_line_becomes_full_rank(self):
        t = np.linspace(0, 1, 30)
        pts = np.column_stack([t, t])
        out = jitter_if_degenerate(pts, seed=1)
        assert np.linalg.matrix_rank(out - out.mean(0), tol=0) == 2
        assert np.abs(out - pts).max() <= JITTER * 1.0

    def test_constant_column(self, rng):
        pts = np.column_stack([rng.random(10), np.full(10, 3.0)])
        out = jitter_if_degenerate(pts)
        assert 0 < np.abs(out[:, 1] - 3.0).max() <= 1e-8


class TestTrim:
    def two_clusters(self, rng):
        a = rng.random((20, 2))
        b = rng.random((20, 2)) + [10.0, 0.0]
        return np.vstack([a, b])

    @pytest.mark.parametrize("mutual", [True, False])
    def test_clusters_not_bridged(self, rng, mutual):
        pts = self.two_clusters(rng)
        tri, tree = untrimmed(pts)
        cx = trim(tri, tree, 5, mutual)
        assert len(cx) > 0
        side = cx.simplices >= 20
        assert np.all(side.all(axis=1) | (~side).all(axis=1))
        # the raw triangulation does bridge them
        raw = tri.simplices >= 20
        assert not np.all(raw.all(axis=1) | (~raw).all(axis=1))

    @pytest.mark.parametrize("mutual", [True, False])
    def test_k_n_minus_1_keeps_everything(self, rng, mutual):
        pts = rng.random((25, 2))
        tri, tree = untrimmed(pts)
        assert as_set(trim(tri, tree, 24, mutual).simplices) == tri.as_set()

    def test_k1_mutual_leaves_nothing(self, rng):
        pts = rng.random((40, 2))
        tri, tree = untrimmed(pts)
        assert len(trim(tri, tree, 1)) == 0

    def test_k_larger_than_n(self, rng):
        pts = rng.random((10, 2))
        tri, tree = untrimmed(pts)
        with pytest.raises(InputError):
            trim(tri, tree, 11)

    def test_mutual_is_subset_of_either(self, rng):
        pts = rng.random((80, 2))
        tri, tree = untrimmed(pts)
        assert as_set(trim(tri, tree, 6, True).simplices) <= as_set(trim(tri, tree, 6, False).simplices)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.booleans())
    def test_monotone_in_k(self, seed, dim, mutual):
        rng = np.random.default_rng(seed)
        pts = rng.random((60, dim))
        tri, tree = untrimmed(pts, seed)
        kept = [as_set(trim(tri, tree, k, mutual).simplices) for k in (4, 8, 14, 30)]
        for small, big in zip(kept, kept[1:]):
            assert small <= big

    def test_pairwise_rule_against_brute_force(self, rng):
        pts = rng.random((50, 2))
        tri, tree = untrimmed(pts)
        k = 7
        d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        np.fill_diagonal(d, np.inf)
        knn = [set(np.argsort(row, kind="stable")[:k]) for row in d]
        expected = {
            tuple(s) for s in tri.simplices.tolist()
            if all(v in knn[u] and u in knn[v] for i, u in enumerate(s) for v in s[i + 1:])
        }
        assert as_set(trim(tri, tree, k).simplices) == expected


class TestEnvelope:
    def test_single_triangle(self):
        env = envelope(SimplicialComplex(np.array([[0, 1, 2]]), 2), SQUARE)
        assert as_set(env.facets) == {(0, 1), (0, 2), (1, 2)}

    def test_two_triangles_share_an_edge(self):
        env = envelope(SimplicialComplex(np.array([[0, 1, 2], [0, 2, 3]]), 2), SQUARE)
        assert len(env) == 4
        assert (0, 2) not in as_set(env.facets)

    def test_empty_complex(self):
        with pytest.raises(EmptyManifold):
            envelope(SimplicialComplex(np.zeros((0, 3), dtype=np.int64), 2), SQUARE)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.integers(6, 40))
    def test_untrimmed_envelope_is_convex_hull(self, seed, dim, n):
        pts = np.random.default_rng(seed).random((n, dim))
        tri, tree = untrimmed(pts, seed)
        cx = trim(tri, tree, n - 1)
        env = envelope(cx, pts)
        assert as_set(env.facets) == hull_facets_brute(pts)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 4))
    def test_facets_owned_once_and_planes_pass_through(self, seed, dim):
        pts = np.random.default_rng(seed).normal(size=(50, dim))
        _, p, cx = build_complex(pts, 8 * (dim - 1), seed)
        env = envelope(cx, p)
        uniq, counts, _ = facet_incidence(cx.simplices)
        boundary = as_set(uniq[counts == 1])
        assert as_set(env.facets) == boundary
        # each envelope facet appears in exactly one retained simplex
        for f, owner in zip(env.facets, env.owners):
            assert set(f) <= set(cx.simplices[owner])
            holders = [s for s in cx.simplices if set(f) <= set(s)]
            assert len(holders) == 1
        ok = ~env.degenerate
        resid = np.einsum("fvd,fd->fv", p[env.facets[ok]], env.normals[ok]) + env.offsets[ok, None]
        assert np.abs(resid).max() <= 1e-9
        np.testing.assert_allclose(np.linalg.norm(env.normals[ok], axis=1), 1.0, atol=1e-12)


class TestEnvelopeDistance:
    def square_model(self):
        return fit_class_manifold(SQUARE, k=3)

    def test_unit_square_example(self):
        env = self.square_model().envelope
        assert len(env) == 4
        assert env.distance([0.5, 2.0], "plane") == pytest.approx(1.0)
        assert env.distance([0.5, 2.0], "point") == pytest.approx(np.sqrt(1.25))

    def test_on_facet_is_zero(self):
        env = self.square_model().envelope
        assert env.distance([0.3, 0.0], "plane") == pytest.approx(0.0, abs=1e-12)

    def test_unknown_mode(self):
        with pytest.raises(InputError):
            self.square_model().envelope.distance([0.0, 0.0], "nearest")

    def test_equals_exhaustive_scan(self):
        for seed in range(200):
            rng = np.random.default_rng(seed)
            dim = 2 + seed % 2
            pts = rng.normal(size=(40 + seed % 60, dim))
            model = fit_class_manifold(pts, k=10, seed=seed)
            q = rng.normal(scale=2.0, size=(1, dim))
            fast = model.envelope.distance_many(q, "plane")[0]
            assert fast == pytest.approx(model.envelope.exhaustive_distance(q[0]), abs=1e-12)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 4))
    def test_plane_at_most_point(self, seed, dim):
        rng = np.random.default_rng(seed)
        model = fit_class_manifold(rng.normal(size=(60, dim)), k=8 * (dim - 1), seed=seed)
        q = rng.normal(scale=2.0, size=(20, dim))
        plane = model.envelope.distance_many(q, "plane")
        point = model.envelope.distance_many(q, "point")
        assert np.all(plane <= point + 1e-12)


class TestFitClassManifold:
    def test_ring_has_two_envelope_loops(self):
        rng = np.random.default_rng(0)
        theta = rng.uniform(0, 2 * np.pi, 200)
        radius = rng.uniform(1.0, 1.3, 200)
        pts = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
        model = fit_class_manifold(pts, k=14)
        assert model.envelope.loops() == 2
        assert model.containment_depth([0.0, 0.0]) == -np.inf
        assert np.isfinite(model.containment_depth([1.15, 0.0]))

    def test_minimal_input_is_one_simplex(self):
        model = fit_class_manifold(SQUARE[:3], k=14)
        assert len(model.complex) == 1
        assert len(model.envelope) == 3

    def test_not_enough_points(self):
        with pytest.raises(NotEnoughPoints):
            fit_class_manifold(SQUARE[:2])

    def test_empty_manifold_advises_larger_k(self, rng):
        with pytest.raises(EmptyManifold, match="increase k"):
            fit_class_manifold(rng.random((40, 2)), k=1)

    def test_duplicates_dropped(self):
        model = fit_class_manifold(np.vstack([SQUARE, SQUARE]), k=3)
        assert len(model.points) == 4

    def test_deterministic(self, rng):
        pts = rng.normal(size=(100, 3))
        a = fit_class_manifold(pts, seed=4)
        b = fit_class_manifold(pts, seed=4)
        assert np.array_equal(a.complex.simplices, b.complex.simplices)

    def test_spiral_counts_grow_with_k(self):
        ds = gen_toy2d("spirals", 400, seed=0)
        pts = ds.features[ds.labels == 0]
        counts = [len(build_complex(pts, k)[2]) for k in (4, 8, 14, 30)]
        assert counts == sorted(counts)

    def test_containment_depth_matches_full_scan(self, rng):
        model = fit_class_manifold(rng.normal(size=(300, 2)), k=14)
        q = rng.normal(scale=1.5, size=(300, 2))
        got = model.containment_depth_many(q)
        xi = np.stack([model.frames.coords(p) for p in q]).min(axis=2).max(axis=1)
        expected = np.where(xi >= -1e-9, xi, -np.inf)
        np.testing.assert_array_equal(got, expected)
