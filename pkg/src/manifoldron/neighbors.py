"""Exact k-nearest-neighbour search with a static KD tree.

Nodes split at the median of the widest-spread axis; ties in coordinate are
ordered by point id so the tree (and every query result) is deterministic.
Query results are sorted by ``(distance, point id)``, which is what the
trimming rule relies on for reproducibility.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .errors import InputError

GROUP_SIZE = 32


class KdTree:
    """Static KD tree over an ``(n, D)`` point array.

    Parameters
    ----------
    points : array_like, shape (n, D)
        Finite coordinates; duplicates are allowed.
    leaf_size : int
        Maximum number of points stored in a leaf.
    """

    def __init__(self, points, leaf_size: int = 16) -> None:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InputError("KdTree needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise InputError("KdTree points must be finite")
        if leaf_size < 1:
            raise InputError("leaf_size must be >= 1")
        self.points = pts
        self.n, self.dim = pts.shape
        self.leaf_size = leaf_size
        # flat node arrays; children are -1 for leaves
        self._start: list[int] = []
        self._stop: list[int] = []
        self._left: list[int] = []
        self._right: list[int] = []
        self._lo: list[NDArray[np.float64]] = []
        self._hi: list[NDArray[np.float64]] = []
        self.order = np.arange(self.n, dtype=np.int64)
        self._build()
        self._ordered_points = self.points[self.order]

    def _build(self) -> None:
        stack = [(0, self.n, -1, 0)]
        while stack:
            start, stop, parent, side = stack.pop()
            node = len(self._start)
            self._start.append(start)
            self._stop.append(stop)
            self._left.append(-1)
            self._right.append(-1)
            ids = self.order[start:stop]
            sub = self.points[ids]
            lo, hi = sub.min(axis=0), sub.max(axis=0)
            self._lo.append(lo)
            self._hi.append(hi)
            if parent >= 0:
                (self._left if side == 0 else self._right)[parent] = node
            size = stop - start
            spread = hi - lo
            if size <= self.leaf_size or not np.any(spread > 0):
                continue
            axis = int(np.argmax(spread))
            rank = np.lexsort((ids, sub[:, axis]))
            self.order[start:stop] = ids[rank]
            mid = start + size // 2
            stack.append((mid, stop, node, 1))
            stack.append((start, mid, node, 0))

    @property
    def depth(self) -> int:
        def walk(node: int) -> int:
            if self._left[node] < 0:
                return 0
            return 1 + max(walk(self._left[node]), walk(self._right[node]))

        return walk(0)

    def _leaves(self) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
        leaves = [i for i, left in enumerate(self._left) if left < 0]
        starts = np.array([self._start[i] for i in leaves], dtype=np.int64)
        stops = np.array([self._stop[i] for i in leaves], dtype=np.int64)
        return np.array(leaves, dtype=np.int64), np.stack((starts, stops), axis=1)

    def _leaf_arrays(self) -> None:
        leaves, ranges = self._leaves()
        self._leaf_lo = np.array([self._lo[i] for i in leaves])
        self._leaf_hi = np.array([self._hi[i] for i in leaves])
        self._leaf_ranges = ranges
        self._leaf_counts = ranges[:, 1] - ranges[:, 0]

    def _check(self, p) -> NDArray[np.float64]:
        p = np.asarray(p, dtype=float).reshape(-1)
        if p.shape[0] != self.dim:
            raise InputError(f"query has dimension {p.shape[0]}, tree has {self.dim}")
        return p

    def _positions(self, leaves: NDArray[np.int64]) -> NDArray[np.int64]:
        r = self._leaf_ranges[leaves]
        return np.concatenate([np.arange(a, b) for a, b in r])

    def _query_group(self, qg: NDArray[np.float64], k: int):
        lo, hi = qg.min(axis=0), qg.max(axis=0)
        gap = np.maximum(self._leaf_lo - hi, 0.0) + np.maximum(lo - self._leaf_hi, 0.0)
        leaf_d2 = np.einsum("ij,ij->i", gap, gap)
        order = np.argsort(leaf_d2, kind="stable")
        need = int(np.searchsorted(np.cumsum(self._leaf_counts[order]), k)) + 1
        pos = self._positions(order[:need])
        diff = qg[:, None, :] - self._ordered_points[pos][None, :, :]
        d2 = np.einsum("qcd,qcd->qc", diff, diff)
        # every true neighbour of the group lies within the worst k-th distance
        bound = float(np.partition(d2, k - 1, axis=1)[:, k - 1].max())
        pos = self._positions(np.flatnonzero(leaf_d2 <= bound))
        ids = self.order[pos]
        by_id = np.argsort(ids, kind="stable")
        ids, pos = ids[by_id], pos[by_id]
        diff = qg[:, None, :] - self._ordered_points[pos][None, :, :]
        d2 = np.einsum("qcd,qcd->qc", diff, diff)
        pick = np.argsort(d2, axis=1, kind="stable")[:, :k]
        return ids[pick], np.sqrt(np.take_along_axis(d2, pick, axis=1))

    def query_many(self, points, k: int) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
        """Exact ``k`` nearest neighbours for each row of ``points``.

        Returns ``(ids, distances)`` of shape ``(m, k)``, each row ascending by
        distance with ties broken by the lower point id.  Queries are
        processed in spatially coherent groups that share candidate leaves.
        """
        q = np.asarray(points, dtype=float)
        if q.ndim == 1:
            q = q.reshape(1, -1) if q.shape[0] == self.dim else q[:, None]
        if q.ndim != 2 or q.shape[1] != self.dim:
            raise InputError(f"queries must have {self.dim} columns")
        if not 1 <= k <= self.n:
            raise InputError(f"k must be in [1, {self.n}], got {k}")
        m = len(q)
        ids = np.empty((m, k), dtype=np.int64)
        dist = np.empty((m, k))
        if m == 0:
            return ids, dist
        if not hasattr(self, "_leaf_lo"):
            self._leaf_arrays()
        if m <= GROUP_SIZE:
            groups = [np.arange(m)]
        else:
            qt = KdTree(q, leaf_size=GROUP_SIZE)
            _, ranges = qt._leaves()
            groups = [qt.order[a:b] for a, b in ranges]
        for g in groups:
            ids[g], dist[g] = self._query_group(q[g], k)
        return ids, dist

    def query(self, p, k: int = 1) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
        """The ``k`` nearest points to ``p``.

        Returns ``(ids, distances)`` ascending by distance, ties broken by the
        lower point id.
        """
        p = self._check(p)
        ids, dist = self.query_many(p[None, :], k)
        return ids[0], dist[0]

    def query_radius(self, p, r: float) -> NDArray[np.int64]:
        """Ids of all points with distance ``<= r`` from ``p``, ascending id."""
        p = self._check(p)
        if not hasattr(self, "_leaf_lo"):
            self._leaf_arrays()
        gap = np.maximum(self._leaf_lo - p, 0.0) + np.maximum(p - self._leaf_hi, 0.0)
        near = np.flatnonzero(np.einsum("ij,ij->i", gap, gap) <= float(r) * float(r))
        if len(near) == 0:
            return np.zeros(0, dtype=np.int64)
        pos = self._positions(near)
        diff = self._ordered_points[pos] - p
        d2 = np.einsum("ij,ij->i", diff, diff)
        return np.sort(self.order[pos][d2 <= float(r) * float(r)])


def build(points, leaf_size: int = 16) -> KdTree:
    return KdTree(points, leaf_size=leaf_size)


def knn(tree: KdTree, p, k: int) -> list[tuple[int, float]]:
    """``[(point_id, distance), ...]`` for the ``k`` nearest points."""
    ids, dist = tree.query(p, k)
    return [(int(i), float(d)) for i, d in zip(ids, dist)]


def unique_points(points, rtol: float = 1e-12) -> NDArray[np.int64]:
    """Representative id for each point; points closer than ``rtol * span`` merge.

    The representative is the lowest id in each merged group, so
    ``rep[i] == i`` marks the points to keep.
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    rep = np.arange(n, dtype=np.int64)
    if n < 2:
        return rep
    span = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
    tol = rtol * span
    # exact duplicates first: cheap and the common case
    _, first, inverse = np.unique(pts, axis=0, return_index=True, return_inverse=True)
    rep = first[inverse.reshape(-1)].astype(np.int64)
    if tol == 0.0:
        return rep
    keep = np.flatnonzero(rep == np.arange(n))
    tree = KdTree(pts[keep])
    if len(keep) < 2:
        return rep
    _, dist = tree.query_many(pts[keep], 2)
    close = np.flatnonzero(dist[:, 1] <= tol)
    for j in close:
        i = keep[j]
        if rep[i] != i:
            continue
        for other in keep[tree.query_radius(pts[i], tol)]:
            if other > i and rep[other] == other:
                rep[rep == other] = i
    return rep
