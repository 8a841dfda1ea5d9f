"""Incremental Delaunay triangulation (Bowyer-Watson) in any dimension.

Points are inserted in a seeded random order.  The unbounded exterior is
represented by *ghost* simplices that share a single vertex at infinity
(id ``-1``) with every convex-hull facet, so no finite super-simplex is
needed and hull facets come out exact.  Predicates are evaluated on a
normalised copy of the input with a tiny seeded jitter (1e-10 of each
axis range), which breaks cospherical and coplanar ties consistently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateCloud, InputError, NotEnoughPoints, PredicateError
from .geometry import RANK_RTOL, _simplex_vertices, is_rank_deficient
from .neighbors import unique_points

MAX_DIM = 10
JITTER = 1e-10
GHOST = -1


@dataclass(frozen=True)
class Triangulation:
    """Finite Delaunay simplices as sorted vertex-id rows (sorted lexicographically)."""

    simplices: NDArray[np.int64]
    point_count: int
    dim: int

    def __len__(self) -> int:
        return int(self.simplices.shape[0])

    def as_set(self) -> set[tuple[int, ...]]:
        return {tuple(int(v) for v in row) for row in self.simplices}


def _orient(v: NDArray[np.float64]) -> float:
    """Sign-carrying volume of ``D + 1`` points: ``det(v[1:] - v[0])``."""
    return float(np.linalg.det(v[1:] - v[0]))


def _insphere_det(v: NDArray[np.float64], p: NDArray[np.float64]) -> float:
    d = v - p
    lifted = np.empty((d.shape[0], d.shape[1] + 1))
    lifted[:, :-1] = d
    lifted[:, -1] = np.einsum("ij,ij->i", d, d)
    return float(np.linalg.det(lifted))


_CALIBRATION: dict[int, float] = {}


def _insphere_factor(dim: int) -> float:
    """+1 or -1 so that ``factor * orient * insphere_det > 0`` means inside."""
    if dim not in _CALIBRATION:
        v = np.vstack([np.zeros(dim), np.eye(dim)])
        c = v.mean(axis=0)
        _CALIBRATION[dim] = math.copysign(1.0, _orient(v) * _insphere_det(v, c))
    return _CALIBRATION[dim]


def circumsphere_contains(simplex, store, p) -> bool:
    """True iff ``p`` lies strictly inside the circumsphere of the simplex.

    Uses the lifted-paraboloid determinant, so the sign is independent of the
    vertex order.  Raises :class:`PredicateError` for degenerate simplices.
    """
    v = _simplex_vertices(simplex, store)
    p = np.asarray(p, dtype=float).reshape(-1)
    dim = v.shape[1]
    if p.shape[0] != dim:
        raise InputError(f"point has dimension {p.shape[0]}, expected {dim}")
    if is_rank_deficient(v[1:] - v[0]):
        raise PredicateError("circumsphere of a degenerate simplex is undefined")
    return _insphere_factor(dim) * _orient(v) * _insphere_det(v, p) > 0.0


class _Builder:
    """Mutable Bowyer-Watson state over the normalised, jittered points ``q``."""

    def __init__(self, q: NDArray[np.float64], rng: np.random.Generator) -> None:
        self.q = q
        self.n, self.dim = q.shape
        self.rng = rng
        self.factor = _insphere_factor(self.dim)
        self.verts: list[tuple[int, ...]] = []
        self.nbrs: list[list[int]] = []
        self.alive: list[bool] = []
        # finite simplices: orientation sign; ghosts: sign of the outward side
        self.sign: list[float] = []
        self.last = 0
        self.ref = np.zeros(self.dim)

    # -- predicates ---------------------------------------------------------

    def _ghost_orient(self, s: int, x: NDArray[np.float64]) -> float:
        v = self.verts[s]
        pts = np.array([x if i == GHOST else self.q[i] for i in v])
        return _orient(pts)

    def conflicts(self, s: int, p: NDArray[np.float64]) -> bool:
        v = self.verts[s]
        if GHOST in v:
            o = self._ghost_orient(s, p)
            return o != 0.0 and math.copysign(1.0, o) == self.sign[s]
        pts = self.q[list(v)]
        return self.factor * self.sign[s] * _insphere_det(pts, p) > 0.0

    # -- bookkeeping --------------------------------------------------------

    def _new(self, verts: tuple[int, ...], sign: float) -> int:
        self.verts.append(verts)
        self.nbrs.append([-1] * (self.dim + 1))
        self.alive.append(True)
        self.sign.append(sign)
        return len(self.verts) - 1

    def _ghost_sign(self, verts: tuple[int, ...]) -> float:
        """Outward sign for a ghost: opposite to the interior reference point."""
        pts = np.array([self.ref if i == GHOST else self.q[i] for i in verts])
        o = _orient(pts)
        if o == 0.0:
            return 0.0
        return -math.copysign(1.0, o)

    def start(self, first: list[int]) -> None:
        base = tuple(first)
        self.ref = self.q[first].mean(axis=0)
        o = _orient(self.q[first])
        s0 = self._new(base, math.copysign(1.0, o))
        ghosts = []
        for i in range(self.dim + 1):
            gv = base[:i] + (GHOST,) + base[i + 1:]
            ghosts.append(self._new(gv, self._ghost_sign(gv)))
        for i, g in enumerate(ghosts):
            self.nbrs[s0][i] = g
            self.nbrs[g][i] = s0
            for j, h in enumerate(ghosts):
                if j != i:
                    self.nbrs[g][j] = h
        self.last = s0

    # -- point location -----------------------------------------------------

    def locate(self, p: NDArray[np.float64]) -> int:
        s = self.last
        if not self.alive[s]:
            s = next(i for i in range(len(self.alive) - 1, -1, -1) if self.alive[i])
        limit = 4 * len(self.verts) + 16
        ones = np.ones(self.dim + 1)
        for _ in range(limit):
            v = self.verts[s]
            if GHOST in v:
                if self.conflicts(s, p):
                    return s
                s = self.nbrs[s][v.index(GHOST)]
                continue
            a = np.vstack([self.q[list(v)].T, ones])
            try:
                lam = np.linalg.solve(a, np.append(p, 1.0))
            except np.linalg.LinAlgError:
                s = self.nbrs[s][int(self.rng.integers(self.dim + 1))]
                continue
            neg = np.flatnonzero(lam < 0.0)
            if len(neg) == 0:
                if self.conflicts(s, p):
                    return s
                break
            # randomised choice among the violated facets avoids cycling
            i = int(neg[self.rng.integers(len(neg))]) if len(neg) > 1 else int(neg[0])
            s = self.nbrs[s][i]
        for t in range(len(self.verts)):
            if self.alive[t] and self.conflicts(t, p):
                return t
        raise DegenerateCloud("point location failed; input is numerically degenerate")

    # -- insertion ----------------------------------------------------------

    def _conflicts_many(self, ids: list[int], p: NDArray[np.float64]) -> list[bool]:
        """Vectorised ``conflicts`` over several simplices."""
        out = [False] * len(ids)
        fin = [j for j, s in enumerate(ids) if GHOST not in self.verts[s]]
        gho = [j for j, s in enumerate(ids) if GHOST in self.verts[s]]
        if fin:
            v = self.q[np.array([self.verts[ids[j]] for j in fin])] - p
            lifted = np.concatenate((v, np.einsum("kij,kij->ki", v, v)[:, :, None]), axis=2)
            dets = np.linalg.det(lifted)
            for j, d in zip(fin, dets):
                out[j] = self.factor * self.sign[ids[j]] * d > 0.0
        if gho:
            qs = np.vstack((self.q, p[None, :]))
            ghost_at = len(self.q)
            rows = np.array([[ghost_at if i == GHOST else i for i in self.verts[ids[j]]] for j in gho])
            v = qs[rows]
            dets = np.linalg.det(v[:, 1:] - v[:, :1])
            for j, d in zip(gho, dets):
                out[j] = d != 0.0 and math.copysign(1.0, d) == self.sign[ids[j]]
        return out

    def _new_signs(self, boundary, p_id: int):
        """Vertices, sign and validity of each simplex ``p`` would form with a cavity face."""
        nvs = [self.verts[s][:i] + (p_id,) + self.verts[s][i + 1:] for s, i, _ in boundary]
        ref_at = len(self.q)
        qs = np.vstack((self.q, self.ref[None, :]))
        rows = np.array([[ref_at if i == GHOST else i for i in nv] for nv in nvs])
        v = qs[rows]
        dets = np.linalg.det(v[:, 1:] - v[:, :1])
        signs, ok = [], []
        for (s, _, _), nv, d in zip(boundary, nvs, dets):
            if d == 0.0:
                signs.append(0.0)
                ok.append(False)
            elif GHOST in nv:
                # outward side is opposite the interior reference point
                signs.append(-math.copysign(1.0, d))
                ok.append(True)
            else:
                sg = math.copysign(1.0, d)
                signs.append(sg)
                ok.append(sg == self.sign[s])
        return nvs, signs, ok

    def insert(self, p_id: int) -> None:
        p = self.q[p_id]
        seed = self.locate(p)
        cavity = {seed}
        tested = {seed}
        frontier = [seed]
        while frontier:
            cand = []
            for s in frontier:
                for t in self.nbrs[s]:
                    if t not in tested:
                        tested.add(t)
                        cand.append(t)
            if not cand:
                break
            frontier = [t for t, hit in zip(cand, self._conflicts_many(cand, p)) if hit]
            cavity.update(frontier)
        # grow until every new simplex is correctly oriented (star-shaped cavity)
        while True:
            boundary = [(s, i, t) for s in sorted(cavity)
                        for i, t in enumerate(self.nbrs[s]) if t not in cavity]
            nvs, signs, ok = self._new_signs(boundary, p_id)
            grow = {t for (_, _, t), good in zip(boundary, ok) if not good}
            if not grow:
                break
            cavity |= grow
        plan = [(s, i, t, nv, sg) for (s, i, t), nv, sg in zip(boundary, nvs, signs)]
        for s in cavity:
            self.alive[s] = False
        open_faces: dict[frozenset[int], tuple[int, int]] = {}
        created = []
        for s, i, t, nv, sg in plan:
            c = self._new(nv, sg)
            created.append(c)
            self.nbrs[c][i] = t
            tn = self.nbrs[t]
            tn[tn.index(s)] = c
            for j in range(self.dim + 1):
                if j == i:
                    continue
                key = frozenset(nv[:j] + nv[j + 1:])
                other = open_faces.pop(key, None)
                if other is None:
                    open_faces[key] = (c, j)
                else:
                    oc, oj = other
                    self.nbrs[c][j] = oc
                    self.nbrs[oc][oj] = c
        if open_faces:
            raise DegenerateCloud("cavity retriangulation left unmatched facets")
        self.last = created[-1]

    def finite_simplices(self) -> NDArray[np.int64]:
        rows = [
            v for v, a in zip(self.verts, self.alive) if a and GHOST not in v
        ]
        return np.array(rows, dtype=np.int64).reshape(-1, self.dim + 1)


def _initial_simplex(q: NDArray[np.float64], order: NDArray[np.int64]) -> list[int]:
    """Greedy well-spread ``D + 1`` points: repeatedly take the farthest from the current flat."""
    dim = q.shape[1]
    chosen = [int(order[0])]
    d = np.linalg.norm(q - q[chosen[0]], axis=1)
    chosen.append(int(np.argmax(d)))
    if d[chosen[1]] == 0.0:
        raise DegenerateCloud("all points coincide")
    while len(chosen) < dim + 1:
        base = q[chosen[0]]
        a = (q[chosen[1:]] - base).T
        qq, _ = np.linalg.qr(a)
        rel = q - base
        resid = rel - (rel @ qq) @ qq.T
        dist = np.linalg.norm(resid, axis=1)
        j = int(np.argmax(dist))
        # coordinates are normalised to unit span, so this is a relative test
        if dist[j] <= 1e-13:
            raise DegenerateCloud("points are affinely dependent even after perturbation")
        chosen.append(j)
    return chosen


def _morton_keys(q: NDArray[np.float64]) -> NDArray[np.int64]:
    """Z-order key of each row of ``q`` (coordinates in roughly [-0.5, 0.5])."""
    dim = q.shape[1]
    bits = max(1, min(16, 62 // dim))
    top = (1 << bits) - 1
    grid = np.clip(((q + 0.5) * top).round(), 0, top).astype(np.int64)
    keys = np.zeros(len(q), dtype=np.int64)
    for b in range(bits):
        for d in range(dim):
            keys |= ((grid[:, d] >> b) & 1) << (b * dim + d)
    return keys


def _brio_order(q: NDArray[np.float64], rng: np.random.Generator) -> NDArray[np.int64]:
    """Biased randomised insertion order.

    A random permutation is cut into rounds of doubling size and each round
    is sorted along a Z-order curve, so consecutive insertions are close
    (short walks) while the rounds keep the randomisation's guarantees.
    """
    perm = rng.permutation(len(q))
    keys = _morton_keys(q)
    out = []
    stop = len(perm)
    rounds = []
    while stop > 0:
        start = stop // 2 if stop > 64 else 0
        rounds.append(perm[start:stop])
        stop = start
    for chunk in reversed(rounds):
        out.append(chunk[np.argsort(keys[chunk], kind="stable")])
    return np.concatenate(out)


def triangulate(points, seed: int = 0) -> Triangulation:
    """Delaunay triangulation of ``n`` points in ``R^D``.

    Parameters
    ----------
    points : array_like, shape (n, D)
    seed : int
        Drives the insertion order and the predicate jitter; identical input
        and seed give an identical simplex set.

    Returns
    -------
    Triangulation
        Simplices index into ``points``.  Near-coincident points (closer than
        1e-12 of the bounding-box span) are merged into the lowest id.

    Raises
    ------
    NotEnoughPoints
        ``n <= D`` (after merging duplicates).
    DegenerateCloud
        No ``D + 1`` points are affinely independent even after perturbation.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise InputError("points must be an (n, D) array")
    n, dim = pts.shape
    if dim < 1:
        raise InputError("dimension must be >= 1")
    if dim > MAX_DIM:
        raise InputError(
            f"dimension {dim} exceeds the supported maximum of {MAX_DIM}; "
            "use feature bagging to reduce the dimension"
        )
    if not np.all(np.isfinite(pts)):
        raise InputError("points must be finite")
    if n <= dim:
        raise NotEnoughPoints(f"need at least {dim + 1} points in {dim}-D, got {n}")

    rep = unique_points(pts)
    keep = np.flatnonzero(rep == np.arange(n))
    if len(keep) <= dim:
        raise NotEnoughPoints(
            f"need at least {dim + 1} distinct points in {dim}-D, got {len(keep)}"
        )
    rng = np.random.default_rng(seed)
    sub = pts[keep]
    lo, hi = sub.min(axis=0), sub.max(axis=0)
    axis_range = hi - lo
    span = float(axis_range.max())
    jitter = rng.uniform(-1.0, 1.0, size=sub.shape) * (JITTER * axis_range)
    q = (sub - (lo + hi) / 2.0 + jitter) / span

    order = _brio_order(q, rng)
    first = _initial_simplex(q, order)
    builder = _Builder(q, rng)
    builder.start(first)
    taken = set(first)
    for i in order:
        if int(i) not in taken:
            builder.insert(int(i))
    local = builder.finite_simplices()
    simplices = np.sort(keep[local], axis=1)
    simplices = simplices[np.lexsort(simplices.T[::-1])]
    return Triangulation(simplices=simplices, point_count=n, dim=dim)


__all__ = ["Triangulation", "triangulate", "circumsphere_contains", "MAX_DIM", "RANK_RTOL"]
