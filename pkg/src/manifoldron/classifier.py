"""Manifold classifier: per-class envelopes, in-out tests and a feature-bagged vote.

A base model keeps one ``ClassModel`` per label over a subset of features.
A query inside some class complex takes the deepest containing class;
otherwise the class with the nearest envelope wins.  Ties always go to the
lower label.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .errors import InputError, NotEnoughPoints
from .geometry import CONTAINS_TOL
from .io import CLASSIFICATION, Dataset
from .manifold import DEFAULT_K, ClassModel, Envelope, fit_class_manifold

DEFAULT_NF_RANGE = (4, 7)
MANY_BASES = 10
AUTO_PLANE_MAX_DIM = 8
DISTANCE_MODES = ("plane", "point", "auto")


@dataclass(frozen=True)
class FitConfig:
    """Training options.

    Attributes
    ----------
    k : int
        Neighbour count for trimming.
    nf_range : (int, int) or None
        Inclusive range for the number of bagged features per base model.
        ``None`` means 4..7 clipped to the feature count.
    n_estimators : int or None
        Number of base models.  ``None`` means 1 when every base would see
        the same features and 10 otherwise.
    distance_mode : {"plane", "point", "auto"}
        ``auto`` uses plane distances up to 8 bagged features.
    seed : int
        Master seed for feature masks and per-base jitter/insertion order.
    split_seed : int
        Seed used by benchmarking for train/test splits.
    processes : int
        Worker processes for fitting base models.
    mutual : bool
        Trimming keeps an edge only if both endpoints are in each other's
        kNN; ``False`` accepts either direction.
    """

    k: int = DEFAULT_K
    nf_range: Optional[tuple[int, int]] = None
    n_estimators: Optional[int] = None
    distance_mode: str = "auto"
    seed: int = 0
    split_seed: int = 0
    processes: int = 6
    mutual: bool = True

    def __post_init__(self) -> None:
        if self.k < 1:
            raise InputError("k must be >= 1")
        if self.distance_mode not in DISTANCE_MODES:
            raise InputError(f"distance_mode must be one of {DISTANCE_MODES}")
        if self.n_estimators is not None and self.n_estimators < 1:
            raise InputError("n_estimators must be >= 1")
        if self.nf_range is not None:
            lo, hi = self.nf_range
            if not 1 <= lo <= hi:
                raise InputError(f"invalid bagged feature range {lo}..{hi}")
        if self.processes < 1:
            raise InputError("processes must be >= 1")

    def feature_range(self, n_features: int) -> tuple[int, int]:
        if self.nf_range is None:
            lo, hi = DEFAULT_NF_RANGE
            return min(lo, n_features), min(hi, n_features)
        lo, hi = self.nf_range
        if hi > n_features:
            raise InputError(f"cannot bag {hi} features out of {n_features}")
        return lo, hi

    def estimators(self, n_features: int) -> int:
        if self.n_estimators is not None:
            return self.n_estimators
        lo, _ = self.feature_range(n_features)
        return 1 if lo == n_features else MANY_BASES


def resolve_mode(mode: str, dim: int) -> str:
    if mode == "auto":
        return "plane" if dim <= AUTO_PLANE_MAX_DIM else "point"
    return mode


@dataclass
class BaseManifoldron:
    """One class manifold per label over the features in ``feature_mask``."""

    class_models: dict[int, ClassModel]
    feature_mask: tuple[int, ...]
    k: int
    distance_mode: str
    tol: float = CONTAINS_TOL

    @property
    def labels(self) -> list[int]:
        return sorted(self.class_models)

    @property
    def dim(self) -> int:
        return len(self.feature_mask)


@dataclass
class Diagnostics:
    interior: bool
    depths: dict[int, float] = field(default_factory=dict)
    distances: dict[int, float] = field(default_factory=dict)


@dataclass
class ManifoldronEnsemble:
    bases: list[BaseManifoldron]
    n_features: int
    config: FitConfig
    label_names: Optional[list[str]] = None

    @property
    def masks(self) -> list[tuple[int, ...]]:
        return [b.feature_mask for b in self.bases]

    @property
    def labels(self) -> list[int]:
        return sorted({c for b in self.bases for c in b.class_models})


def feature_coverage_probability(n_all: int, n_bagged: int, n_estimators: int) -> float:
    """Chance that a given feature is drawn at least once: ``1 - ((Na - Nf) / Na) ** Ne``."""
    for name, v in (("Na", n_all), ("Nf", n_bagged), ("Ne", n_estimators)):
        if int(v) != v:
            raise InputError(f"{name} must be an integer")
    if not 1 <= n_bagged <= n_all:
        raise InputError("need 1 <= Nf <= Na")
    if n_estimators < 1:
        raise InputError("need Ne >= 1")
    return 1.0 - ((n_all - n_bagged) / n_all) ** n_estimators


def draw_masks(n_features: int, config: FitConfig) -> list[tuple[int, ...]]:
    """Sorted feature subsets, one per base model, sampled without replacement."""
    lo, hi = config.feature_range(n_features)
    rng = np.random.default_rng(config.seed)
    masks = []
    for _ in range(config.estimators(n_features)):
        nf = int(rng.integers(lo, hi + 1))
        masks.append(tuple(int(j) for j in np.sort(rng.choice(n_features, nf, replace=False))))
    return masks


def _fit_base(features: NDArray[np.float64], labels: NDArray[np.int64], mask: tuple[int, ...],
              config: FitConfig, seed: int, index: int) -> BaseManifoldron:
    models = {}
    x = features[:, list(mask)]
    for c in np.unique(labels):
        rows = x[labels == c]
        if len(rows) < len(mask) + 1:
            raise NotEnoughPoints(
                f"class {int(c)} has {len(rows)} samples; base model {index} "
                f"uses {len(mask)} features and needs at least {len(mask) + 1}"
            )
        try:
            models[int(c)] = fit_class_manifold(rows, config.k, seed, int(c), config.mutual)
        except NotEnoughPoints as exc:
            raise NotEnoughPoints(f"base model {index}: {exc}") from None
    return BaseManifoldron(models, mask, config.k, resolve_mode(config.distance_mode, len(mask)))


def _fit_base_star(args) -> BaseManifoldron:
    return _fit_base(*args)


def fit(dataset: Dataset, config: Optional[FitConfig] = None) -> ManifoldronEnsemble:
    """Train ``config.estimators(Na)`` base models, each on its own feature mask.

    Base models are independent, so they are fitted in up to
    ``config.processes`` worker processes; results do not depend on scheduling.
    """
    config = config or FitConfig()
    if dataset.task != CLASSIFICATION:
        raise InputError("fit needs a classification dataset")
    if len(np.unique(dataset.labels)) < 2:
        raise InputError("need at least two classes")
    masks = draw_masks(dataset.n_features, config)
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(config.seed).spawn(len(masks))]
    jobs = [(dataset.features, dataset.labels, m, config, s, i) for i, (m, s) in enumerate(zip(masks, seeds))]
    workers = min(config.processes, len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            bases = list(pool.map(_fit_base_star, jobs))
    else:
        bases = [_fit_base_star(j) for j in jobs]
    return ManifoldronEnsemble(bases, dataset.n_features, config, dataset.label_names)


def point_envelope_distance(env: Envelope, p, mode: str = "plane") -> float:
    """Distance from ``p`` to the envelope: nearest facet (plane) or nearest vertex (point)."""
    return env.distance(p, resolve_mode(mode, env.points.shape[1]))


def predict_base_many(base: BaseManifoldron, features) -> tuple[NDArray[np.int64], NDArray[np.bool_]]:
    """Labels and interior flags of one base model for each row of ``features``."""
    x = np.asarray(features, dtype=float)[:, list(base.feature_mask)]
    labels = base.labels
    depth = np.stack([base.class_models[c].containment_depth_many(x, base.tol) for c in labels])
    interior = np.isfinite(depth).any(axis=0)
    # argmax/argmin return the first hit, i.e. the lower label on ties
    out = np.asarray(labels, dtype=np.int64)[np.argmax(depth, axis=0)]
    outside = np.flatnonzero(~interior)
    if len(outside):
        dist = np.stack([base.class_models[c].distance_many(x[outside], base.distance_mode)
                         for c in labels])
        out[outside] = np.asarray(labels, dtype=np.int64)[np.argmin(dist, axis=0)]
    return out, interior


def predict_base(base: BaseManifoldron, p) -> tuple[int, Diagnostics]:
    """Label from one base model plus the evidence behind it.

    ``p`` is a full-width sample; the base model's feature mask is applied
    here.  Inside some class complex the deepest containment wins; otherwise
    the nearest envelope does.  Ties go to the lower label.
    """
    p = np.asarray(p, dtype=float).reshape(1, -1)
    q = p[:, list(base.feature_mask)]
    labels = base.labels
    depths = {c: float(base.class_models[c].containment_depth_many(q, base.tol)[0]) for c in labels}
    inside = [c for c in labels if np.isfinite(depths[c])]
    if inside:
        best = min(inside, key=lambda c: (-depths[c], c))
        return best, Diagnostics(True, depths)
    dist = {c: float(base.class_models[c].distance_many(q, base.distance_mode)[0]) for c in labels}
    best = min(labels, key=lambda c: (dist[c], c))
    return best, Diagnostics(False, depths, dist)


def vote(votes) -> NDArray[np.int64]:
    """Column-wise majority of a ``(bases, m)`` label matrix; ties to the lower label."""
    votes = np.asarray(votes, dtype=np.int64)
    labels = np.unique(votes)
    counts = np.stack([(votes == c).sum(axis=0) for c in labels])
    return labels[np.argmax(counts, axis=0)]


def predict_many(ens: ManifoldronEnsemble, features) -> NDArray[np.int64]:
    """Majority vote of the base models for each row."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[1] != ens.n_features:
        raise InputError(
            f"data has shape {x.shape}; model expects {ens.n_features} features per row"
        )
    if len(x) == 0:
        return np.zeros(0, dtype=np.int64)
    return vote([predict_base_many(b, x)[0] for b in ens.bases])


def predict(ens: ManifoldronEnsemble, p) -> int:
    """Majority vote of the base models; ties go to the lower label."""
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape[0] != ens.n_features:
        raise InputError(f"sample has {p.shape[0]} features, model expects {ens.n_features}")
    return int(predict_many(ens, p[None, :])[0])
