from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manifoldron.classifier import (
    BaseManifoldron,
    FitConfig,
    ManifoldronEnsemble,
    draw_masks,
    feature_coverage_probability,
    fit,
    point_envelope_distance,
    predict,
    predict_base,
    predict_base_many,
    predict_many,
    resolve_mode,
    vote,
)
from manifoldron.datagen import gen_toy2d, split
from manifoldron.errors import InputError, NotEnoughPoints
from manifoldron.io import Dataset, load_csv
from manifoldron.manifold import fit_class_manifold

DATA = Path(__file__).parent / "data"


def grid(x0, y0, n=5, step=0.25):
    g = np.stack(np.meshgrid(np.arange(n) * step, np.arange(n) * step), -1).reshape(-1, 2)
    return g + [x0, y0]


@pytest.fixture(scope="module")
def squares():
    a, b = grid(0.0, 0.0), grid(3.0, 0.0)
    ds = Dataset(np.vstack([a, b]), np.repeat([0, 1], len(a)))
    return fit(ds, FitConfig(processes=1))


@pytest.fixture(scope="module")
def moons():
    train, test = split(gen_toy2d("moons", 300, seed=2), 0.7, 2)
    return fit(train, FitConfig(processes=1)), train, test


class TestFit:
    def test_two_features_single_base(self, squares):
        assert len(squares.bases) == 1
        assert squares.masks == [(0, 1)]

    def test_iris_uses_all_four_features(self):
        ds = load_csv(DATA / "iris.csv", has_header=True)
        ens = fit(ds, FitConfig(nf_range=(4, 4), n_estimators=1, processes=1))
        assert ens.masks == [(0, 1, 2, 3)]
        assert ens.label_names == ["setosa", "versicolor", "virginica"]
        acc = np.mean(predict_many(ens, ds.features) == ds.labels)
        assert acc > 0.9

    def test_masks_deterministic_per_seed(self):
        cfg = FitConfig(nf_range=(5, 5), n_estimators=40, seed=1)
        a, b = draw_masks(30, cfg), draw_masks(30, cfg)
        c = draw_masks(30, FitConfig(nf_range=(5, 5), n_estimators=40, seed=2))
        assert a == b
        assert sorted(a) != sorted(c)
        assert all(len(m) == 5 == len(set(m)) and list(m) == sorted(m) for m in a)

    def test_default_feature_range(self):
        masks = draw_masks(12, FitConfig(seed=3))
        assert len(masks) == 10
        assert all(4 <= len(m) <= 7 for m in masks)

    def test_errors(self):
        ds = Dataset(np.random.default_rng(0).random((20, 2)), np.repeat([0, 1], 10))
        with pytest.raises(InputError):
            fit(ds, FitConfig(nf_range=(3, 3)))
        with pytest.raises(InputError):
            fit(Dataset(ds.features, np.zeros(20, dtype=np.int64)))
        small = Dataset(np.random.default_rng(0).random((12, 2)), np.array([0] * 10 + [1] * 2))
        with pytest.raises(NotEnoughPoints, match="class 1"):
            fit(small, FitConfig(processes=1))
        with pytest.raises(InputError):
            FitConfig(k=0)
        with pytest.raises(InputError):
            FitConfig(distance_mode="cosine")

    def test_parallel_equals_serial(self, rng):
        x = rng.normal(size=(200, 6))
        y = (x[:, 0] + x[:, 1] > 0).astype(np.int64)
        ds = Dataset(x, y)
        a = fit(ds, FitConfig(nf_range=(2, 3), n_estimators=4, processes=1, seed=9))
        b = fit(ds, FitConfig(nf_range=(2, 3), n_estimators=4, processes=3, seed=9))
        assert a.masks == b.masks
        for ba, bb in zip(a.bases, b.bases):
            for c in ba.class_models:
                assert np.array_equal(ba.class_models[c].complex.simplices, bb.class_models[c].complex.simplices)
        probes = rng.normal(size=(50, 6))
        assert np.array_equal(predict_many(a, probes), predict_many(b, probes))


class TestPredictBase:
    def test_centre_of_class_a_is_interior(self, squares):
        label, diag = predict_base(squares.bases[0], [0.5, 0.5])
        assert label == 0 and diag.interior
        assert np.isfinite(diag.depths[0]) and diag.depths[1] == -np.inf

    def test_far_point_goes_to_nearest_envelope(self, squares):
        base = squares.bases[0]
        p = np.array([-2.0, 3.0])
        label, diag = predict_base(base, p)
        assert not diag.interior and label == 0
        for c, model in base.class_models.items():
            assert diag.distances[c] == pytest.approx(model.envelope.exhaustive_distance(p), abs=1e-12)

    def test_between_classes(self, squares):
        base = squares.bases[0]
        assert predict_base(base, [1.6, 0.5])[0] == 0
        assert predict_base(base, [2.4, 0.5])[0] == 1

    def test_overlap_takes_deepest_then_lower_label(self):
        tri = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
        models = {0: fit_class_manifold(tri, label=0), 1: fit_class_manifold(tri + 0.5, label=1)}
        base = BaseManifoldron(models, (0, 1), 14, "plane")
        # min xi is 0.2 in class 0 and 0.275 in class 1
        assert predict_base(base, [1.6, 1.6])[0] == 1
        assert predict_base(base, [0.7, 0.7])[0] == 0
        twin = BaseManifoldron({0: models[0], 1: fit_class_manifold(tri, label=1)}, (0, 1), 14, "plane")
        assert predict_base(twin, [1.6, 1.6])[0] == 0

    def test_batch_matches_single(self, moons):
        ens, _, test = moons
        labels, inside = predict_base_many(ens.bases[0], test.features)
        for p, lab, flag in zip(test.features[:40], labels, inside):
            single, diag = predict_base(ens.bases[0], p)
            assert single == lab and diag.interior == flag

    def test_training_vertices_get_their_own_class(self, moons):
        ens, train, _ = moons
        base = ens.bases[0]
        for c, model in base.class_models.items():
            verts = np.unique(model.complex.simplices)
            pts = model.points[verts]
            other = [m for d, m in base.class_models.items() if d != c]
            alone = np.all([~np.isfinite(m.containment_depth_many(pts)) for m in other], axis=0)
            labels, _ = predict_base_many(base, pts[alone])
            assert np.all(labels == c)

    @settings(max_examples=15)
    @given(st.floats(0.01, 100.0))
    def test_uniform_scaling_keeps_decisions(self, scale):
        ds = gen_toy2d("circles", 120, seed=4)
        probes = np.random.default_rng(0).uniform(-1.5, 1.5, size=(40, 2))
        a = fit(ds, FitConfig(processes=1))
        b = fit(Dataset(ds.features * scale, ds.labels), FitConfig(processes=1))
        np.testing.assert_array_equal(predict_many(a, probes), predict_many(b, probes * scale))

    def test_point_envelope_distance_modes(self, squares):
        env = squares.bases[0].class_models[0].envelope
        p = [0.5, 2.0]
        assert point_envelope_distance(env, p, "plane") == pytest.approx(1.0)
        assert point_envelope_distance(env, p, "point") == pytest.approx(1.0)
        assert point_envelope_distance(env, p, "auto") == pytest.approx(1.0)
        assert resolve_mode("auto", 9) == "point"


class TestVote:
    def test_majority(self):
        assert vote([[0], [0], [1]]).tolist() == [0]

    def test_tie_goes_to_lower_label(self):
        assert vote([[2], [1]]).tolist() == [1]
        assert vote([[1, 0], [0, 1]]).tolist() == [0, 0]

    @given(st.lists(st.lists(st.integers(0, 3), min_size=5, max_size=5), min_size=1, max_size=9), st.randoms())
    def test_permutation_invariant(self, votes, rnd):
        shuffled = list(votes)
        rnd.shuffle(shuffled)
        assert vote(votes).tolist() == vote(shuffled).tolist()

    def test_single_base_equals_predict_base(self, moons):
        ens, _, test = moons
        for p in test.features[:30]:
            assert predict(ens, p) == predict_base(ens.bases[0], p)[0]

    def test_base_order_does_not_matter(self, rng):
        x = rng.normal(size=(150, 5))
        y = (x[:, 0] * x[:, 1] > 0).astype(np.int64)
        ens = fit(Dataset(x, y), FitConfig(n_estimators=5, nf_range=(3, 4), processes=1))
        rev = ManifoldronEnsemble(ens.bases[::-1], ens.n_features, ens.config)
        probes = rng.normal(size=(60, 5))
        assert np.array_equal(predict_many(ens, probes), predict_many(rev, probes))

    def test_wrong_width(self, squares):
        with pytest.raises(InputError):
            predict(squares, [0.0, 0.0, 0.0])
        with pytest.raises(InputError):
            predict_many(squares, np.zeros((2, 3)))


class TestCoverage:
    def test_examples(self):
        assert feature_coverage_probability(10, 5, 4) == pytest.approx(0.9375)
        assert feature_coverage_probability(7, 7, 1) == 1.0
        assert feature_coverage_probability(7, 7, 50) == 1.0

    @pytest.mark.parametrize("args", [(5, 6, 1), (5, 0, 1), (5, 2, 0), (5, 2.5, 1)])
    def test_domain_errors(self, args):
        with pytest.raises(InputError):
            feature_coverage_probability(*args)

    @given(st.integers(1, 50), st.integers(1, 50), st.integers(1, 100))
    def test_in_unit_interval_and_monotone(self, na, nf, ne):
        nf = min(nf, na)
        p = feature_coverage_probability(na, nf, ne)
        assert 0.0 <= p <= 1.0
        assert feature_coverage_probability(na, nf, ne + 1) >= p
