"""Regression over a single trimmed manifold by barycentric interpolation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateError, InputError
from .geometry import (AffineFrames, barycentric_coords, is_rank_deficient,
                       signed_volume)
from .manifold import DEFAULT_K, SimplicialComplex, build_complex
from .neighbors import KdTree, unique_points

CANDIDATE_VERTICES = 14


@dataclass
class RegressorModel:
    """Trimmed complex over all training points with one target per vertex.

    ``points`` and ``targets`` are the de-duplicated training rows (targets of
    merged duplicates are averaged).
    """

    points: NDArray[np.float64]
    targets: NDArray[np.float64]
    complex: SimplicialComplex
    k: int

    def __post_init__(self) -> None:
        if len(self.targets) != len(self.points):
            raise InputError("one target per training point is required")
        self.frames = AffineFrames(self.points, self.complex.simplices)
        self.vertex_tree = KdTree(self.points)
        # vertex -> incident simplices, CSR layout
        simplices = self.complex.simplices
        owner = np.repeat(np.arange(len(simplices)), simplices.shape[1])
        flat = simplices.reshape(-1)
        order = np.argsort(flat, kind="stable")
        self._incident = owner[order]
        self._offsets = np.searchsorted(flat[order], np.arange(len(self.points) + 1))

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def incident(self, vertex_ids) -> NDArray[np.int64]:
        """Sorted ids of retained simplices touching any of ``vertex_ids``."""
        parts = [self._incident[self._offsets[v]:self._offsets[v + 1]] for v in vertex_ids]
        if not parts:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(parts))


def fit_regressor(points, targets, k: int = DEFAULT_K, seed: int = 0,
                  mutual: bool = True) -> RegressorModel:
    """Jitter, triangulate and trim all training points as one manifold."""
    pts = np.asarray(points, dtype=float)
    y = np.asarray(targets, dtype=float).reshape(-1)
    if pts.ndim != 2 or len(y) != len(pts):
        raise InputError("points must be (n, D) with n targets")
    if not np.all(np.isfinite(y)):
        raise InputError("targets must be finite")
    rep = unique_points(pts)
    kept, jittered, cx = build_complex(pts, k, seed, mutual=mutual)
    sums = np.zeros(len(pts))
    counts = np.zeros(len(pts))
    np.add.at(sums, rep, y)
    np.add.at(counts, rep, 1.0)
    y_kept = sums[kept] / counts[kept]
    return RegressorModel(jittered, y_kept, cx, min(k, len(kept) - 1))


def predict_simplex(model: RegressorModel, simplex, p) -> float:
    """``sum_i xi_i y(v_i)``; ``xi`` may be negative for exterior ``p``."""
    xi = barycentric_coords(simplex, model.points, p)
    if xi is None:
        raise DegenerateError(f"simplex {list(np.asarray(simplex))} is degenerate")
    return float(xi @ model.targets[np.asarray(simplex, dtype=np.int64)])


def predict_full(model: RegressorModel, p) -> float:
    """Average of ``predict_simplex`` over every non-degenerate retained simplex."""
    p = np.asarray(p, dtype=float).reshape(-1)
    ok = np.flatnonzero(~model.frames.degenerate)
    if len(ok) == 0:
        raise DegenerateError("model has no non-degenerate simplex")
    xi = model.frames.coords(p, ok)
    y = model.targets[model.complex.simplices[ok]]
    return float(np.mean(np.einsum("ij,ij->i", xi, y)))


def area_ratio_weights(simplex, store, p) -> NDArray[np.float64]:
    """Signed volume with ``p`` replacing ``v_i``, over the simplex's signed volume."""
    store = np.asarray(store, dtype=float)
    verts = store[np.asarray(simplex, dtype=np.int64)]
    p = np.asarray(p, dtype=float).reshape(-1)
    if verts.shape != (store.shape[1] + 1, store.shape[1]) or p.shape[0] != store.shape[1]:
        raise InputError("need D + 1 vertex ids and a D-dimensional point")
    if is_rank_deficient(verts[1:] - verts[0]):
        raise DegenerateError("degenerate simplex has no area ratios")
    total = signed_volume(verts)
    out = np.empty(len(verts))
    for i in range(len(verts)):
        sub = verts.copy()
        sub[i] = p
        out[i] = signed_volume(sub) / total
    return out


def closest_simplex(model: RegressorModel, p) -> int:
    """Index of the retained simplex nearest to ``p``.

    A containing simplex always wins (ties among several broken by centroid
    distance, then index).  Otherwise the candidates are the simplices
    incident to the 14 nearest training vertices, ranked by centroid
    distance, then index.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape[0] != model.dim:
        raise InputError(f"point has dimension {p.shape[0]}, expected {model.dim}")
    centroids = model.frames.centroids
    nv = min(CANDIDATE_VERTICES, len(model.points))
    near, _ = model.vertex_tree.query(p, nv)
    cand = model.incident(near)
    if len(cand) == 0:
        cand = np.arange(len(model.complex))
    inside = cand[model.frames.coords(p, cand).min(axis=1) >= -1e-9]
    if len(inside) == 0:
        mins = model.frames.coords(p).min(axis=1)
        inside = np.flatnonzero(mins >= -1e-9)
    if len(inside):
        cd = np.linalg.norm(centroids[inside] - p, axis=1)
        return int(inside[np.lexsort((inside, cd))[0]])
    cd = np.linalg.norm(centroids[cand] - p, axis=1)
    return int(cand[np.lexsort((cand, cd))[0]])


def predict_closest(model: RegressorModel, p) -> float:
    """Interpolate with the closest simplex (see ``closest_simplex``)."""
    s = closest_simplex(model, p)
    simplex = model.complex.simplices[s]
    if model.frames.degenerate[s]:
        # a degenerate nearest simplex: fall back to its nearest vertex
        d = np.linalg.norm(model.points[simplex] - np.asarray(p, dtype=float), axis=1)
        return float(model.targets[simplex[int(np.argmin(d))]])
    return predict_simplex(model, simplex, p)


def predict_many(model: RegressorModel, points, how: str = "closest") -> NDArray[np.float64]:
    fn = {"closest": predict_closest, "full": predict_full}.get(how)
    if fn is None:
        raise InputError(f"unknown prediction form {how!r}")
    x = np.asarray(points, dtype=float)
    dim = model.points.shape[1]
    if x.ndim != 2 or x.shape[1] != dim:
        raise InputError(f"data has shape {x.shape}; model expects {dim} features per row")
    return np.array([fn(model, p) for p in x])


def _f1(x):
    return x[..., 0] ** 2 + x[..., 1] ** 2


def _f2(x):
    return np.sin(x[..., 0]) + np.cos(x[..., 1])


def _f3(x):
    return np.exp(x[..., 0] * x[..., 1])


def _f4(x):
    return x[..., 0] ** 2 + x[..., 1] ** 2 + x[..., 2] ** 2


def _f5(x):
    return np.exp(x[..., 0] * x[..., 1] * x[..., 2])


def _f6(x):
    return x[..., 0] ** 2 + x[..., 1] ** 2 - x[..., 2] ** 2


_FUNCTIONS = {"f1": (_f1, 2), "f2": (_f2, 2), "f3": (_f3, 2),
              "f4": (_f4, 3), "f5": (_f5, 3), "f6": (_f6, 3)}


def function_dim(name: str) -> int:
    if name not in _FUNCTIONS:
        raise InputError(f"unknown function {name!r}; choose from f1..f6")
    return _FUNCTIONS[name][1]


def builtin_functions(name: str) -> Callable[..., NDArray[np.float64]]:
    """Benchmark function ``name`` in ``f1..f6``, evaluated on the last axis.

    ``f1(x, y) = x^2 + y^2``, ``f2 = sin x + cos y``, ``f3 = exp(xy)``,
    ``f4 = x^2 + y^2 + z^2``, ``f5 = exp(xyz)``, ``f6 = x^2 + y^2 - z^2``.
    Accepts an array of shape ``(..., d)`` or ``d`` scalar arguments.
    """
    f, dim = _FUNCTIONS[name] if name in _FUNCTIONS else (None, function_dim(name))

    def wrapped(*args):
        x = np.asarray(args[0] if len(args) == 1 else args, dtype=float)
        if x.shape[-1] != dim:
            raise InputError(f"{name} takes {dim} coordinates")
        out = f(x)
        return float(out) if np.ndim(out) == 0 else out

    wrapped.__name__ = name
    return wrapped
