"""Simplex-level linear algebra.

A simplex is a sequence of ``D + 1`` vertex ids into a shared point store
(an ``(n, D)`` float array).  Degenerate linear systems are reported as
``None`` rather than perturbed; callers decide what to do with them.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .errors import InputError

RANK_RTOL = 1e-10
CONTAINS_TOL = 1e-9


@dataclass(frozen=True)
class Hyperplane:
    """Oriented hyperplane ``w . x + b = 0`` with ``||w|| = 1``."""

    w: NDArray[np.float64]
    b: float

    def signed_distance(self, p) -> float:
        return float(np.dot(self.w, p) + self.b)


def _as_point(p, dim: int) -> NDArray[np.float64]:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape[0] != dim:
        raise InputError(f"point has dimension {p.shape[0]}, expected {dim}")
    return p


def _simplex_vertices(simplex, store) -> NDArray[np.float64]:
    store = np.asarray(store, dtype=float)
    if store.ndim != 2:
        raise InputError("point store must be a 2-d array")
    ids = np.asarray(simplex, dtype=np.int64).reshape(-1)
    dim = store.shape[1]
    if ids.shape[0] != dim + 1:
        raise InputError(f"a {dim}-simplex needs {dim + 1} vertices, got {ids.shape[0]}")
    return store[ids]


def is_rank_deficient(matrix, rtol: float = RANK_RTOL) -> bool:
    """True when ``matrix`` has a singular value below ``rtol`` times its largest."""
    m = np.asarray(matrix, dtype=float)
    if m.size == 0:
        return False
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0.0:
        return True
    return len(s) < min(m.shape) or s[-1] < rtol * s[0]


def barycentric_from_vertices(vertices, p) -> Optional[NDArray[np.float64]]:
    """Barycentric coordinates of ``p`` w.r.t. the ``(D+1, D)`` vertex array.

    Returns ``None`` when the vertices are affinely dependent.
    """
    vertices = np.asarray(vertices, dtype=float)
    dim = vertices.shape[1]
    p = _as_point(p, dim)
    edges = (vertices[1:] - vertices[0]).T
    if is_rank_deficient(edges):
        return None
    x = np.linalg.solve(edges, p - vertices[0])
    return np.concatenate(([1.0 - x.sum()], x))


def barycentric_coords(simplex, store, p) -> Optional[NDArray[np.float64]]:
    """Solve ``sum_d xi_d v_d = p`` with ``sum_d xi_d = 1``.

    Parameters
    ----------
    simplex : sequence of int
        ``D + 1`` vertex ids into ``store``.
    store : array_like, shape (n, D)
    p : array_like, shape (D,)

    Returns
    -------
    ndarray of shape (D + 1,) or None
        ``None`` if the vertex matrix is rank-deficient (relative tolerance
        1e-10).  Entries may be negative when ``p`` is outside the simplex.
    """
    return barycentric_from_vertices(_simplex_vertices(simplex, store), p)


def contains(simplex, store, p, tol: float = CONTAINS_TOL) -> bool:
    """In-out test: every barycentric coordinate is at least ``-tol``."""
    if tol < 0:
        raise InputError("tol must be non-negative")
    xi = barycentric_coords(simplex, store, p)
    if xi is None:
        return False
    return bool(np.all(xi >= -tol))


def _canonical_sign(w: NDArray[np.float64], b: float):
    for c in w:
        if abs(c) > 1e-12:
            if c < 0:
                return -w, -b
            break
    return w, b


def facet_hyperplane(facet_vertices) -> Optional[Hyperplane]:
    """Unit-normal hyperplane through ``D`` points in ``R^D``.

    The sign is canonical: the first non-negligible component of ``w`` is
    positive.  Returns ``None`` when the points do not span a ``(D-1)``-flat.
    """
    v = np.asarray(facet_vertices, dtype=float)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise InputError(f"need exactly D points in R^D, got array of shape {v.shape}")
    dim = v.shape[1]
    if dim == 1:
        w = np.ones(1)
        return Hyperplane(w, float(-v[0, 0]))
    edges = v[1:] - v[0]
    _, s, vt = np.linalg.svd(edges, full_matrices=True)
    if s[0] == 0.0 or s[-1] < RANK_RTOL * s[0]:
        return None
    w = vt[-1]
    w = w / np.linalg.norm(w)
    b = -float(np.dot(w, v.mean(axis=0)))
    w, b = _canonical_sign(w, b)
    return Hyperplane(w, b)


def point_plane_distance(h: Hyperplane, p) -> float:
    """Projection distance ``|w . p + b|`` (``w`` is unit norm)."""
    p = _as_point(p, h.w.shape[0])
    return abs(float(np.dot(h.w, p) + h.b))


def facets(simplex) -> list[tuple[int, ...]]:
    """All ``D``-subsets of the vertex ids, each sorted ascending."""
    ids = sorted(int(i) for i in simplex)
    return [tuple(c) for c in combinations(ids, len(ids) - 1)]


def _norm(x) -> float:
    return float(np.sqrt(np.dot(x, x)))


def closest_point_on_simplex(vertices, p) -> NDArray[np.float64]:
    """Closest point to ``p`` in the convex hull of ``vertices`` (k+1 points, any k).

    Projects onto the affine hull; if some affine coordinate is negative the
    minimiser lies on a face dropping one such vertex, so recurse on those.
    Works for degenerate vertex sets (least squares picks a valid projection
    and the recursion covers the Caratheodory reduction).
    """
    vertices = np.asarray(vertices, dtype=float)
    p = np.asarray(p, dtype=float)
    cache: dict[tuple[int, ...], NDArray[np.float64]] = {}

    def solve(idx: tuple[int, ...]) -> NDArray[np.float64]:
        if idx in cache:
            return cache[idx]
        v = vertices[list(idx)]
        if len(idx) == 1:
            q = v[0]
        else:
            a = (v[1:] - v[0]).T
            x, *_ = np.linalg.lstsq(a, p - v[0], rcond=None)
            lam = np.concatenate(([1.0 - x.sum()], x))
            q = v[0] + a @ x
            neg = np.flatnonzero(lam < 0.0)
            if len(neg):
                best, best_d = None, np.inf
                for i in neg:
                    cand = solve(idx[:i] + idx[i + 1:])
                    d = _norm(p - cand)
                    if d < best_d:
                        best, best_d = cand, d
                q = best
        cache[idx] = q
        return q

    return solve(tuple(range(len(vertices))))


def point_simplex_distance(vertices, p) -> float:
    """Euclidean distance from ``p`` to the (possibly lower-dimensional) simplex."""
    p = np.asarray(p, dtype=float)
    return _norm(p - closest_point_on_simplex(vertices, p))


_FACES: dict[int, list[NDArray[np.int64]]] = {}


def _faces(count: int) -> list[NDArray[np.int64]]:
    """Vertex-index arrays of every non-empty face, grouped by face size."""
    if count not in _FACES:
        _FACES[count] = [np.array(list(combinations(range(count), size)), dtype=np.int64)
                         for size in range(1, count + 1)]
    return _FACES[count]


def simplex_distances(vertices, p) -> NDArray[np.float64]:
    """Euclidean distance from ``p`` to each of ``m`` simplices, vectorised.

    ``vertices`` has shape ``(m, s, D)``; ``p`` is one point or one point
    per simplex, shape ``(m, D)``.  The nearest point of a simplex is
    the projection of ``p`` onto the affine hull of some face with all
    barycentric coordinates non-negative, and every such projection lies in
    the simplex, so the minimum over qualifying faces is exact.  Faces with a
    singular Gram matrix are skipped (a sub-face covers them).
    """
    v = np.asarray(vertices, dtype=float)
    m, count, dim = v.shape
    p = np.broadcast_to(np.asarray(p, dtype=float), (m, dim))
    best = np.full(m, np.inf)
    for group in _faces(count):
        size = group.shape[1]
        for face in group:
            fv = v[:, face, :]
            if size == 1:
                d = np.sqrt(((fv[:, 0, :] - p) ** 2).sum(axis=1))
                np.minimum(best, d, out=best)
                continue
            a = fv[:, 1:, :] - fv[:, :1, :]
            gram = np.einsum("kid,kjd->kij", a, a)
            diag = np.einsum("kii->ki", gram)
            ok = np.linalg.det(gram) > 1e-18 * np.prod(diag, axis=1)
            if not ok.any():
                continue
            gram[~ok] = np.eye(size - 1)
            rhs = np.einsum("kid,kd->ki", a, p - fv[:, 0, :])
            x = np.linalg.solve(gram, rhs[..., None])[..., 0]
            lam0 = 1.0 - x.sum(axis=1)
            inside = ok & (lam0 >= -1e-12) & (x.min(axis=1) >= -1e-12)
            if not inside.any():
                continue
            foot = fv[:, 0, :] + np.einsum("ki,kid->kd", x, a)
            d = np.sqrt(((foot - p) ** 2).sum(axis=1))
            best = np.where(inside, np.minimum(best, d), best)
    return best


def signed_volume(vertices) -> float:
    """``det([v_1 - v_0, ..., v_D - v_0]) / D!`` for ``D + 1`` points in ``R^D``."""
    v = np.asarray(vertices, dtype=float)
    dim = v.shape[1]
    return float(np.linalg.det(v[1:] - v[0])) / float(np.prod(np.arange(1, dim + 1)))


class AffineFrames:
    """Batched barycentric solvers for many simplices over one point store.

    Each simplex ``s`` stores ``inv_s`` with ``inv_s @ (p - v_0) = xi[1:]``.
    Rank-deficient simplices are flagged and never report containment.
    """

    def __init__(self, store, simplices) -> None:
        store = np.asarray(store, dtype=float)
        simplices = np.asarray(simplices, dtype=np.int64)
        self.dim = store.shape[1]
        m = simplices.shape[0]
        verts = store[simplices] if m else np.zeros((0, self.dim + 1, self.dim))
        self.origin = verts[:, 0, :].copy()
        edges = np.transpose(verts[:, 1:, :] - verts[:, :1, :], (0, 2, 1))
        self.inv = np.zeros((m, self.dim, self.dim))
        self.degenerate = np.ones(m, dtype=bool)
        if m:
            s = np.linalg.svd(edges, compute_uv=False)
            ok = (s[:, 0] > 0.0) & (s[:, -1] >= RANK_RTOL * s[:, 0])
            self.degenerate = ~ok
            if ok.any():
                self.inv[ok] = np.linalg.inv(edges[ok])
        self.centroids = verts.mean(axis=1) if m else np.zeros((0, self.dim))

    def __len__(self) -> int:
        return self.origin.shape[0]

    def coords_rows(self, points, which) -> NDArray[np.float64]:
        """Barycentric coordinates of ``points[r]`` in simplices ``which[r, :]``.

        ``points`` is ``(m, D)``, ``which`` is ``(m, c)``; returns ``(m, c, D+1)``.
        """
        points = np.asarray(points, dtype=float)
        which = np.asarray(which, dtype=np.int64)
        rel = points[:, None, :] - self.origin[which]
        x = np.einsum("mkij,mkj->mki", self.inv[which], rel)
        xi = np.concatenate((1.0 - x.sum(axis=2, keepdims=True), x), axis=2)
        xi[self.degenerate[which]] = -np.inf
        return xi

    def coords(self, p, which=None) -> NDArray[np.float64]:
        """Barycentric coordinates of ``p`` for the selected simplices, shape (k, D+1).

        Rows for degenerate simplices are filled with ``-inf``.
        """
        p = np.asarray(p, dtype=float)
        sel = slice(None) if which is None else np.asarray(which, dtype=np.int64)
        x = np.einsum("kij,kj->ki", self.inv[sel], p - self.origin[sel])
        xi = np.concatenate((1.0 - x.sum(axis=1, keepdims=True), x), axis=1)
        xi[self.degenerate[sel]] = -np.inf
        return xi


def require_same_dim(p, dim: int) -> NDArray[np.float64]:
    return _as_point(p, dim)


__all__ = [
    "Hyperplane",
    "AffineFrames",
    "barycentric_coords",
    "barycentric_from_vertices",
    "contains",
    "facet_hyperplane",
    "point_plane_distance",
    "facets",
    "closest_point_on_simplex",
    "point_simplex_distance",
    "simplex_distances",
    "signed_volume",
    "is_rank_deficient",
]
