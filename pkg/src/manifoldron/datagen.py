"""Synthetic datasets: tube-swept 3D manifolds, 2D toys and regression samples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from .errors import DataError, InputError
from .io import CLASSIFICATION, REGRESSION, Dataset
from .regressor import builtin_functions, function_dim

PI = np.pi
UP = np.array([0.0, 0.0, 1.0])
UP_FALLBACK = np.array([1.0, 0.0, 0.0])

Curve = Callable[[NDArray[np.float64]], NDArray[np.float64]]


@dataclass(frozen=True)
class CurveSpec:
    """Parametric trajectory ``t -> (x, y, z)`` with its analytic tangent."""

    func: Curve
    tangent: Curve
    t_range: tuple[float, float]
    t_step: float

    def samples(self) -> NDArray[np.float64]:
        """``t_start, t_start + step, ...`` up to and including ``t_stop``."""
        a, b = self.t_range
        if self.t_step <= 0 or b < a:
            raise InputError("curve needs t_step > 0 and an increasing t_range")
        count = int(np.floor((b - a) / self.t_step + 1e-9))
        return a + self.t_step * np.arange(count + 1)


def tube_sweep(curve: CurveSpec, r: float, m: int = 12) -> NDArray[np.float64]:
    """Sweep a circle of radius ``r`` along ``curve``, ``m`` points per sample.

    The circle's plane is perpendicular to the tangent.  Its in-plane frame is
    ``n1 = tangent x up`` (up = +z, or +x when the tangent is vertical) and
    ``n2 = tangent x n1``.  Rows are ordered by ``t`` then by angle.
    """
    if r <= 0:
        raise InputError("tube radius must be positive")
    if m < 3:
        raise InputError("need at least 3 points per circle")
    t = curve.samples()
    centres = np.asarray(curve.func(t), dtype=float)
    tang = np.asarray(curve.tangent(t), dtype=float)
    norms = np.linalg.norm(tang, axis=1)
    if np.any(norms == 0.0):
        bad = float(t[np.argmax(norms == 0.0)])
        raise InputError(f"tangent vanishes at t={bad!r}")
    tang = tang / norms[:, None]
    n1 = np.cross(tang, UP)
    vertical = np.linalg.norm(n1, axis=1) < 1e-6
    n1[vertical] = np.cross(tang[vertical], UP_FALLBACK)
    n1 /= np.linalg.norm(n1, axis=1, keepdims=True)
    n2 = np.cross(tang, n1)
    theta = 2.0 * PI * np.arange(m) / m
    offsets = (np.cos(theta)[None, :, None] * n1[:, None, :]
               + np.sin(theta)[None, :, None] * n2[:, None, :])
    return (centres[:, None, :] + r * offsets).reshape(-1, 3)


def _circle(cx: float, cy: float, radius: float, step: float) -> CurveSpec:
    return CurveSpec(
        lambda t: np.c_[cx + radius * np.cos(t), cy + radius * np.sin(t), np.zeros_like(t)],
        lambda t: np.c_[-radius * np.sin(t), radius * np.cos(t), np.zeros_like(t)],
        (0.0, 2.0 * PI),
        step,
    )


def _rotated_about_z(curve: CurveSpec, angle: float, pivot) -> CurveSpec:
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    pivot = np.asarray(pivot, dtype=float)
    return CurveSpec(
        lambda t: (curve.func(t) - pivot) @ rot.T + pivot,
        lambda t: curve.tangent(t) @ rot.T,
        curve.t_range,
        curve.t_step,
    )


def _six_circles(step: float) -> tuple[list[CurveSpec], list[CurveSpec]]:
    blue = [_circle(0.0, 0.0, 0.4, step), _circle(0.8, 0.0, 0.4, step), _circle(0.45, 0.7, 0.4, step)]
    red0 = CurveSpec(
        lambda t: np.c_[0.4 * np.cos(t), np.full_like(t, 0.4), 0.4 * np.sin(t)],
        lambda t: np.c_[-0.4 * np.sin(t), np.zeros_like(t), 0.4 * np.cos(t)],
        (0.0, 2.0 * PI),
        step,
    )
    # the other two red rings: +-120 degrees about the vertical axis through
    # the centroid of the blue centres, one ring threading each blue ring pair
    pivot = (0.0 + 0.8 + 0.45) / 3.0, (0.0 + 0.0 + 0.7) / 3.0, 0.0
    red = [red0] + [_rotated_about_z(red0, a, pivot) for a in (2 * PI / 3, -2 * PI / 3)]
    return blue, red


def _dna(step: float) -> tuple[list[CurveSpec], list[CurveSpec]]:
    def helix(phase: float, t0: float) -> CurveSpec:
        return CurveSpec(
            lambda t: np.c_[0.2 * np.cos(t - phase), 0.2 * np.sin(t - phase), 0.1 * t],
            lambda t: np.c_[-0.2 * np.sin(t - phase), 0.2 * np.cos(t - phase), np.full_like(t, 0.1)],
            (t0, t0 + 4 * PI),
            step,
        )

    return [helix(0.0, 0.0)], [helix(PI, PI)]


def _curly(rotation: float, t0: float, stop: float, step: float) -> CurveSpec:
    """Spiral wound around the unit ring, rotated about z by ``-rotation``."""

    def func(t):
        g = 0.3 * np.sin(8 * t) + 1.0
        a = t - rotation
        return np.c_[np.cos(a) * g, np.sin(a) * g, 0.3 * np.cos(8 * t)]

    def tangent(t):
        g = 0.3 * np.sin(8 * t) + 1.0
        dg = 2.4 * np.cos(8 * t)
        a = t - rotation
        return np.c_[-np.sin(a) * g + np.cos(a) * dg, np.cos(a) * g + np.sin(a) * dg,
                     -2.4 * np.sin(8 * t)]

    return CurveSpec(func, tangent, (t0, stop), step)


def _ring_spiral(step: float) -> tuple[list[CurveSpec], list[CurveSpec]]:
    return [_circle(0.0, 0.0, 1.0, step)], [_curly(0.0, 0.0, 8 * PI, step)]


def _two_curly_spirals(step: float) -> tuple[list[CurveSpec], list[CurveSpec]]:
    return [_curly(0.0, 0.0, 8 * PI, step)], [_curly(0.1 * PI, PI, 9 * PI, step)]


# name -> (builder, train step, test step, r3)
_MANIFOLDS = {
    "SixCircles": (_six_circles, 0.04 * PI, 0.2 * PI, 0.04),
    "DNA": (_dna, 0.04 * PI, 0.04 * PI, 0.04),
    "RingSpiral": (_ring_spiral, 0.02 * PI, 0.02 * PI, 0.05),
    "TwoCurlySpirals": (_two_curly_spirals, 0.02 * PI, 0.02 * PI, 0.05),
}
MANIFOLD_NAMES = tuple(_MANIFOLDS)


@dataclass(frozen=True)
class ManifoldDatasetSpec:
    """Which tube manifold to build and how densely.

    ``r3=None`` picks the per-dataset default (0.04 or 0.05).  ``seed`` only
    permutes the output rows; the geometry itself is noise-free.
    """

    name: str
    r1: float = 0.01
    r2: float = 0.02
    r3: Optional[float] = None
    m: int = 12
    seed: int = 0

    def radii(self) -> tuple[float, float, float]:
        r3 = _MANIFOLDS[self.name][3] if self.r3 is None else self.r3
        return self.r1, self.r2, r3


def manifold_curves(name: str, test: bool = False) -> tuple[list[CurveSpec], list[CurveSpec]]:
    """Blue and red trajectories of a named manifold (train or test sampling)."""
    if name not in _MANIFOLDS:
        raise InputError(f"unknown manifold {name!r}; choose from {', '.join(MANIFOLD_NAMES)}")
    builder, train_step, test_step, _ = _MANIFOLDS[name]
    return builder(test_step if test else train_step)


def _sweep_classes(curves: tuple[list[CurveSpec], list[CurveSpec]], radii, m: int):
    feats, labels = [], []
    for label, group in enumerate(curves):
        for curve in group:
            for r in radii:
                pts = tube_sweep(curve, r, m)
                feats.append(pts)
                labels.append(np.full(len(pts), label, dtype=np.int64))
    return np.concatenate(feats), np.concatenate(labels)


def gen_manifold(spec: ManifoldDatasetSpec) -> tuple[Dataset, Dataset]:
    """Train data from the r1 and r3 tubes, test data from the r2 tube; blue=0, red=1."""
    r1, r2, r3 = spec.radii()
    if not 0 < r1 < r2 < r3:
        raise InputError("need 0 < r1 < r2 < r3")
    names = ["x", "y", "z"]
    rng = np.random.default_rng(spec.seed)
    out = []
    for test, radii in ((False, (r1, r3)), (True, (r2,))):
        x, y = _sweep_classes(manifold_curves(spec.name, test), radii, spec.m)
        perm = rng.permutation(len(x))
        out.append(Dataset(x[perm], y[perm], names, ["blue", "red"]))
    return out[0], out[1]


def gen_toy2d(kind: str, n: int, noise: Optional[float] = None, seed: int = 0) -> Dataset:
    """Two-class 2D toys with seeded Gaussian noise.

    ``spirals``: two interleaved Archimedean spirals ``r = theta`` (class 1 is
    the point reflection of class 0), default noise 0.3.
    ``circles``: unit circle vs. radius-0.5 circle, default noise 0.1.
    ``moons``: two interleaving half circles, default noise 0.2.
    """
    if n < 8:
        raise InputError("toy datasets need n >= 8")
    defaults = {"spirals": 0.3, "circles": 0.1, "moons": 0.2}
    if kind not in defaults:
        raise InputError(f"unknown toy kind {kind!r}; choose from {', '.join(defaults)}")
    sigma = defaults[kind] if noise is None else float(noise)
    rng = np.random.default_rng(seed)
    n0 = n // 2
    n1 = n - n0
    if kind == "spirals":
        theta = np.sort(np.sqrt(rng.uniform(size=n0)) * 780.0 * (2 * PI) / 360.0)
        arm = np.c_[-np.cos(theta) * theta, np.sin(theta) * theta]
        theta1 = np.sort(np.sqrt(rng.uniform(size=n1)) * 780.0 * (2 * PI) / 360.0)
        arm1 = -np.c_[-np.cos(theta1) * theta1, np.sin(theta1) * theta1]
        x = np.concatenate((arm, arm1))
    elif kind == "circles":
        a0 = 2 * PI * np.arange(n0) / n0
        a1 = 2 * PI * np.arange(n1) / n1
        x = np.concatenate((np.c_[np.cos(a0), np.sin(a0)], 0.5 * np.c_[np.cos(a1), np.sin(a1)]))
    else:
        a0 = np.linspace(0.0, PI, n0)
        a1 = np.linspace(0.0, PI, n1)
        x = np.concatenate((np.c_[np.cos(a0), np.sin(a0)], np.c_[1.0 - np.cos(a1), 0.5 - np.sin(a1)]))
    if sigma > 0:
        x = x + rng.normal(scale=sigma, size=x.shape)
    y = np.r_[np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)]
    return Dataset(x, y, ["x", "y"], ["0", "1"])


def gen_regression(fname: str, n: int = 200, seed: int = 0) -> Dataset:
    """``n`` standard-normal inputs (2D for f1-f3, 3D for f4-f6) with exact targets."""
    f = builtin_functions(fname)
    dim = function_dim(fname)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    names = ["x", "y", "z"][:dim]
    return Dataset(x, f(x), names, None, REGRESSION)


def split(dataset: Dataset, train_fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded shuffle then prefix split; per class for classification data.

    Raises
    ------
    DataError
        A class would be absent from the training part.
    """
    if not 0.0 < train_fraction < 1.0:
        raise InputError("train_fraction must lie strictly between 0 and 1")
    n = len(dataset)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    if dataset.task == CLASSIFICATION:
        take = np.zeros(n, dtype=bool)
        shuffled = dataset.labels[perm]
        for c in np.unique(dataset.labels):
            pos = np.flatnonzero(shuffled == c)
            k = int(np.floor(train_fraction * len(pos) + 0.5))
            if k == 0:
                raise DataError(
                    f"class {dataset.label_name(c)!r} has {len(pos)} rows; none would be in train"
                )
            take[pos[:k]] = True
        train_rows, test_rows = perm[take], perm[~take]
    else:
        k = int(np.floor(train_fraction * n + 0.5))
        train_rows, test_rows = perm[:k], perm[k:]
    return dataset.subset(train_rows), dataset.subset(test_rows)
