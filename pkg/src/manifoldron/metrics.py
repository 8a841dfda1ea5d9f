"""Classification metrics."""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .errors import InputError


def _pair(pred, truth) -> tuple[NDArray, NDArray]:
    pred = np.asarray(pred).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if pred.shape != truth.shape:
        raise InputError(f"{len(pred)} predictions for {len(truth)} labels")
    if len(truth) == 0:
        raise InputError("metrics need at least one sample")
    return pred, truth


def accuracy(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean(pred == truth))


def per_class(pred, truth) -> dict[int, tuple[float, float, float]]:
    """``{label: (precision, recall, f1)}`` over labels seen in either array.

    Undefined ratios (no predictions or no members) count as 0.
    """
    pred, truth = _pair(pred, truth)
    out = {}
    for c in np.union1d(pred, truth):
        tp = float(np.sum((pred == c) & (truth == c)))
        fp = float(np.sum((pred == c) & (truth != c)))
        fn = float(np.sum((pred != c) & (truth == c)))
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        out[int(c)] = (p, r, f)
    return out


def macro_f1(pred, truth) -> float:
    """Unweighted mean of per-class F1."""
    scores = per_class(pred, truth)
    return float(np.mean([f for _, _, f in scores.values()]))


def mse(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean((np.asarray(pred, float) - np.asarray(truth, float)) ** 2))
