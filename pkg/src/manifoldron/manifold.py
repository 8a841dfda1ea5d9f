"""Per-class manifold construction: triangulate, trim by neighbours, extract the envelope."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .delaunay import Triangulation, triangulate
from .errors import EmptyManifold, InputError, NotEnoughPoints
from .geometry import RANK_RTOL, AffineFrames, simplex_distances
from .neighbors import KdTree, unique_points

DEFAULT_K = 14
JITTER = 1e-8
FACET_CANDIDATES = 50
SIMPLEX_CANDIDATES_PER_VERTEX = 14
NEAR_MISS = 1e-3
QUERY_CHUNK = 512


def jitter_if_degenerate(points, seed: int = 0) -> NDArray[np.float64]:
    """Add 1e-8-relative uniform noise when the centred cloud is rank-deficient.

    Constant columns receive 1e-8 absolute noise.  Full-rank input is
    returned unchanged (as a float copy).
    """
    pts = np.array(points, dtype=float)
    if pts.ndim != 2:
        raise InputError("points must be an (n, D) array")
    n, dim = pts.shape
    centred = pts - pts.mean(axis=0)
    s = np.linalg.svd(centred, compute_uv=False) if n else np.zeros(0)
    full_rank = len(s) >= dim and s[0] > 0.0 and s[dim - 1] >= RANK_RTOL * s[0]
    if full_rank:
        return pts
    rng = np.random.default_rng(seed)
    span = pts.max(axis=0) - pts.min(axis=0) if n else np.zeros(dim)
    scale = np.where(span > 0.0, JITTER * span, JITTER)
    return pts + rng.uniform(-1.0, 1.0, size=pts.shape) * scale


@dataclass(frozen=True)
class SimplicialComplex:
    simplices: NDArray[np.int64]
    dim: int
    class_label: Optional[int] = None

    def __len__(self) -> int:
        return int(self.simplices.shape[0])


def neighbor_pairs(tree: KdTree, k: int, mutual: bool = True) -> NDArray[np.int64]:
    """Sorted codes ``u * n + v`` (u < v) of neighbouring point pairs.

    With ``mutual=True`` (default) ``u`` and ``v`` neighbour when each is
    among the other's ``k`` nearest points (itself excluded); with
    ``mutual=False`` one direction suffices.
    """
    n = tree.n
    if k < 1:
        raise InputError("k must be >= 1")
    if k > n:
        raise InputError(f"k={k} exceeds the number of points ({n})")
    k = min(k, n - 1)
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    ids, _ = tree.query_many(tree.points, k + 1)
    src = np.repeat(np.arange(n, dtype=np.int64), k + 1)
    dst = ids.reshape(-1)
    not_self = dst != src
    src, dst = src[not_self], dst[not_self]
    # a point whose k+1 list did not contain itself (exact duplicates) keeps k+1
    # entries; cap every row at k
    order = np.lexsort((np.arange(len(src)), src))
    src, dst = src[order], dst[order]
    starts = np.searchsorted(src, np.arange(n))
    rank = np.arange(len(src)) - starts[src]
    src, dst = src[rank < k], dst[rank < k]
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    codes = lo * n + hi
    if not mutual:
        return np.unique(codes)
    uniq, counts = np.unique(codes, return_counts=True)
    return uniq[counts == 2]


def trim(tri: Triangulation, tree: KdTree, k: int = DEFAULT_K, mutual: bool = True,
         class_label: Optional[int] = None) -> SimplicialComplex:
    """Keep simplices whose every vertex pair is a neighbour pair.

    The neighbour relation is directed kNN membership symmetrised by AND
    (``mutual=True``, default) or OR (``mutual=False``).
    """
    if tree.n != tri.point_count:
        raise InputError("tree and triangulation are built over different point stores")
    pairs = neighbor_pairs(tree, k, mutual)
    simplices = tri.simplices
    if len(simplices) == 0 or len(pairs) == 0:
        return SimplicialComplex(np.zeros((0, tri.dim + 1), dtype=np.int64), tri.dim, class_label)
    n = tree.n
    keep = np.ones(len(simplices), dtype=bool)
    for a, b in combinations(range(tri.dim + 1), 2):
        u, v = simplices[:, a], simplices[:, b]
        codes = np.minimum(u, v) * n + np.maximum(u, v)
        pos = np.clip(np.searchsorted(pairs, codes), 0, len(pairs) - 1)
        keep &= pairs[pos] == codes
    return SimplicialComplex(simplices[keep], tri.dim, class_label)


def facet_incidence(simplices) -> tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.int64]]:
    """Unique sorted facets, their incidence counts, and one owning simplex each."""
    simplices = np.sort(np.asarray(simplices, dtype=np.int64), axis=1)
    m, width = simplices.shape
    if m == 0:
        return np.zeros((0, width - 1), dtype=np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64)
    parts = [np.delete(simplices, j, axis=1) for j in range(width)]
    all_facets = np.concatenate(parts, axis=0)
    owner = np.tile(np.arange(m), width)
    uniq, first, inverse, counts = np.unique(
        all_facets, axis=0, return_index=True, return_inverse=True, return_counts=True
    )
    return uniq, counts, owner[first]


@dataclass
class Envelope:
    """Boundary facets of a complex with their hyperplanes and search trees.

    ``facets`` are sorted vertex-id rows.  ``normals``/``offsets`` hold the
    unit hyperplane ``w . x + b = 0`` through each facet (NaN rows where the
    facet is degenerate).  Distances in ``"plane"`` mode are measured to the
    facet itself, i.e. the projection distance when the foot of the
    perpendicular lands on the facet and the distance to its boundary
    otherwise.
    """

    facets: NDArray[np.int64]
    owners: NDArray[np.int64]
    points: NDArray[np.float64]
    normals: NDArray[np.float64] = field(init=False)
    offsets: NDArray[np.float64] = field(init=False)
    degenerate: NDArray[np.bool_] = field(init=False)
    centroids: NDArray[np.float64] = field(init=False)
    radii: NDArray[np.float64] = field(init=False)
    vertex_ids: NDArray[np.int64] = field(init=False)

    def __post_init__(self) -> None:
        f, dim = self.facets.shape
        if f == 0:
            raise EmptyManifold("envelope of an empty complex")
        verts = self.points[self.facets]
        self.centroids = verts.mean(axis=1)
        self.radii = np.sqrt(((verts - self.centroids[:, None, :]) ** 2).sum(-1)).max(axis=1)
        self.vertex_ids = np.unique(self.facets)
        self.facet_tree = KdTree(self.centroids)
        self.vertex_tree = KdTree(self.points[self.vertex_ids])
        self._max_radius = float(self.radii.max())
        self.normals = np.full((f, dim), np.nan)
        self.offsets = np.full(f, np.nan)
        self.degenerate = np.zeros(f, dtype=bool)
        if dim == 1:
            self.normals[:] = 1.0
            self.offsets = -verts[:, 0, 0]
            return
        edges = verts[:, 1:, :] - verts[:, :1, :]
        _, s, vt = np.linalg.svd(edges, full_matrices=True)
        ok = (s[:, 0] > 0.0) & (s[:, -1] >= RANK_RTOL * s[:, 0])
        self.degenerate = ~ok
        w = vt[:, -1, :]
        w = w / np.linalg.norm(w, axis=1, keepdims=True)
        # canonical sign: first non-negligible component positive
        big = np.abs(w) > 1e-12
        first = np.argmax(big, axis=1)
        flip = w[np.arange(f), first] < 0
        w[flip] *= -1.0
        b = -np.einsum("ij,ij->i", w, self.centroids)
        self.normals[ok] = w[ok]
        self.offsets[ok] = b[ok]

    def __len__(self) -> int:
        return int(self.facets.shape[0])

    def plane_distances(self, p) -> NDArray[np.float64]:
        """``|w . p + b|`` for every facet (NaN for degenerate facets)."""
        return np.abs(self.normals @ np.asarray(p, dtype=float) + self.offsets)

    def facet_distances(self, p, ids) -> NDArray[np.float64]:
        """Exact point-to-facet distances for the facets in ``ids``."""
        ids = np.asarray(ids, dtype=np.int64)
        return simplex_distances(self.points[self.facets[ids]], np.asarray(p, dtype=float))

    def _lower_bounds(self, p) -> NDArray[np.float64]:
        cd = np.sqrt(((self.centroids - p) ** 2).sum(axis=1))
        lb = np.maximum(cd - self.radii, 0.0)
        plane = self.plane_distances(p)
        return np.where(self.degenerate, lb, np.maximum(lb, np.nan_to_num(plane)))

    def _exact_min(self, p, order, lb) -> float:
        best = np.inf
        for start in range(0, len(order), 64):
            chunk = order[start:start + 64]
            chunk = chunk[lb[chunk] < best]
            if len(chunk) == 0:
                break
            best = min(best, float(self.facet_distances(p, chunk).min()))
        return best

    def distance_many(self, points, mode: str = "plane") -> NDArray[np.float64]:
        """Distance from each row of ``points`` to the envelope.

        ``mode="plane"``: nearest facet, searched over the 50 facets with the
        nearest centroids and widened to an exhaustive (bound-pruned) scan
        whenever a facet outside that set could still be closer.
        ``mode="point"``: nearest envelope vertex.
        """
        q = np.asarray(points, dtype=float)
        if q.ndim != 2 or q.shape[1] != self.points.shape[1]:
            raise InputError(f"queries must be (m, {self.points.shape[1]})")
        if mode == "point":
            return self.vertex_tree.query_many(q, 1)[1][:, 0]
        if mode != "plane":
            raise InputError(f"unknown distance mode {mode!r}")
        f = len(self)
        kq = min(FACET_CANDIDATES, f)
        out = np.empty(len(q))
        for start in range(0, len(q), QUERY_CHUNK):
            qc = q[start:start + QUERY_CHUNK]
            ids, cd = self.facet_tree.query_many(qc, kq)
            verts = self.points[self.facets[ids.reshape(-1)]]
            d = simplex_distances(verts, np.repeat(qc, kq, axis=0)).reshape(len(qc), kq)
            best = d.min(axis=1)
            if kq < f:
                for r in np.flatnonzero(best > cd[:, -1] - self._max_radius):
                    lb = self._lower_bounds(qc[r])
                    order = np.argsort(lb, kind="stable")
                    best[r] = min(best[r], self._exact_min(qc[r], order, lb))
            out[start:start + len(qc)] = best
        return out

    def distance(self, p, mode: str = "plane") -> float:
        """Distance from one point to the envelope (see ``distance_many``)."""
        p = np.asarray(p, dtype=float).reshape(1, -1)
        return float(self.distance_many(p, mode)[0])

    def exhaustive_distance(self, p) -> float:
        """Plane-mode distance by scanning every facet (reference path)."""
        p = np.asarray(p, dtype=float).reshape(-1)
        return float(self.facet_distances(p, np.arange(len(self))).min())

    def loops(self) -> int:
        """Connected components of the envelope, facets joined through shared ridges."""
        f, dim = self.facets.shape
        parent = list(range(f))

        def root(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        seen: dict[tuple[int, ...], int] = {}
        for i, row in enumerate(self.facets):
            for ridge in combinations(row.tolist(), dim - 1):
                j = seen.setdefault(ridge, i)
                if j != i:
                    parent[root(i)] = root(j)
        return len({root(i) for i in range(f)})


def envelope(complex_: SimplicialComplex, points) -> Envelope:
    """Facets shared by exactly one simplex of the complex."""
    if len(complex_) == 0:
        raise EmptyManifold("cannot extract the envelope of an empty complex")
    uniq, counts, owners = facet_incidence(complex_.simplices)
    boundary = counts == 1
    return Envelope(uniq[boundary], owners[boundary], np.asarray(points, dtype=float))


@dataclass
class ClassModel:
    """Everything needed to classify against one class manifold."""

    points: NDArray[np.float64]
    complex: SimplicialComplex
    envelope: Envelope
    k: int

    def __post_init__(self) -> None:
        self.frames = AffineFrames(self.points, self.complex.simplices)
        self.simplex_tree = KdTree(self.frames.centroids)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def containment_depth_many(self, points, tol: float = 1e-9) -> NDArray[np.float64]:
        """Largest ``min_d xi_d`` over simplices containing each point; ``-inf`` if none.

        Candidates are the simplices with the ``14 (D + 1)`` nearest centroids;
        a full scan runs when none contains the point but one nearly does.
        """
        q = np.asarray(points, dtype=float)
        m = len(self.frames)
        kq = min(SIMPLEX_CANDIDATES_PER_VERTEX * (self.dim + 1), m)
        out = np.empty(len(q))
        for start in range(0, len(q), QUERY_CHUNK):
            qc = q[start:start + QUERY_CHUNK]
            ids, _ = self.simplex_tree.query_many(qc, kq)
            best = self.frames.coords_rows(qc, ids).min(axis=2).max(axis=1)
            if kq < m:
                for r in np.flatnonzero((best < -tol) & (best >= -NEAR_MISS)):
                    best[r] = self.frames.coords(qc[r]).min(axis=1).max()
            best[best < -tol] = -np.inf
            out[start:start + len(qc)] = best
        return out

    def containment_depth(self, p, tol: float = 1e-9) -> float:
        return float(self.containment_depth_many(np.asarray(p, dtype=float).reshape(1, -1), tol)[0])

    def distance_many(self, points, mode: str = "plane") -> NDArray[np.float64]:
        return self.envelope.distance_many(points, mode)

    def distance(self, p, mode: str = "plane") -> float:
        return self.envelope.distance(p, mode)


def build_complex(points, k: int = DEFAULT_K, seed: int = 0, label: Optional[int] = None,
                  mutual: bool = True):
    """Shared fit stage: drop duplicates, jitter if degenerate, triangulate, trim.

    Returns ``(kept, pts, complex)`` where ``kept`` indexes the input rows
    that survived de-duplication and ``pts`` are their (possibly jittered)
    coordinates.  ``k`` is capped at ``n - 1`` so the default stays usable on
    small classes.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise InputError("points must be an (n, D) array")
    if k < 1:
        raise InputError("k must be >= 1")
    rep = unique_points(pts)
    kept = np.flatnonzero(rep == np.arange(len(pts)))
    pts = pts[kept]
    n, dim = pts.shape
    who = f"class {label}" if label is not None else "the data"
    if n < dim + 1:
        raise NotEnoughPoints(f"{who} has {n} distinct points; need at least {dim + 1} in {dim}-D")
    pts = jitter_if_degenerate(pts, seed)
    tri = triangulate(pts, seed)
    tree = KdTree(pts)
    cx = trim(tri, tree, min(k, n - 1), mutual, class_label=label)
    if len(cx) == 0:
        raise EmptyManifold(f"trimming with k={k} removed every simplex of {who}; increase k")
    return kept, pts, cx


def fit_class_manifold(points, k: int = DEFAULT_K, seed: int = 0, label: Optional[int] = None,
                       mutual: bool = True) -> ClassModel:
    """Jitter (if needed), triangulate, trim with ``k`` neighbours, extract the envelope.

    Duplicate points are dropped first.

    Raises
    ------
    NotEnoughPoints
        Fewer than ``D + 1`` distinct points.
    EmptyManifold
        Trimming left nothing; a larger ``k`` is needed.
    """
    _, pts, cx = build_complex(points, k, seed, label, mutual)
    env = envelope(cx, pts)
    return ClassModel(points=pts, complex=cx, envelope=env, k=min(k, len(pts) - 1))
