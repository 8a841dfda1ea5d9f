"""Benchmark runs and decision-grid export."""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import NDArray

from .classifier import FitConfig, ManifoldronEnsemble, fit, predict_base_many, vote
from .datagen import split
from .errors import InputError, ManifoldronError
from .io import REGRESSION, Dataset
from .metrics import accuracy, macro_f1, mse, per_class
from .regressor import fit_regressor, predict_many as regress_many


@dataclass
class DecisionGrid:
    """Row-major label grid: ``labels[row, col]`` is the cell at ``(xs[col], ys[row])``."""

    xs: NDArray[np.float64]
    ys: NDArray[np.float64]
    labels: NDArray[np.int64]
    interior: NDArray[np.bool_]
    dims: tuple[int, int]

    def to_csv(self, path: Union[str, Path], label_names: Optional[Sequence[str]] = None) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "col", "x", "y", "label", "interior"])
            for r, y in enumerate(self.ys):
                for c, x in enumerate(self.xs):
                    lab = int(self.labels[r, c])
                    name = label_names[lab] if label_names else str(lab)
                    w.writerow([r, c, repr(float(x)), repr(float(y)), name, int(self.interior[r, c])])


def decision_grid(ens: ManifoldronEnsemble, bounds, resolution, fixed=None,
                  dims: tuple[int, int] = (0, 1)) -> DecisionGrid:
    """Predict on the cell centres of a regular 2D grid.

    Parameters
    ----------
    bounds : ((xmin, xmax), (ymin, ymax))
    resolution : int or (nx, ny)
    fixed : array_like, optional
        Full feature vector supplying the values of the features outside
        ``dims``; required unless the model has exactly two features.
    dims : (int, int)
        Features varied along x and y.

    The ``interior`` flag marks cells that at least one base model found
    inside some class complex.
    """
    (x0, x1), (y0, y1) = bounds
    nx, ny = (resolution, resolution) if np.isscalar(resolution) else resolution
    nx, ny = int(nx), int(ny)
    if nx < 1 or ny < 1:
        raise InputError("resolution must be at least 1")
    if not (x1 > x0 and y1 > y0):
        raise InputError("bounds must satisfy min < max on both axes")
    if fixed is None:
        if ens.n_features != 2:
            raise InputError(
                f"model has {ens.n_features} features; pass fixed values for the other features"
            )
        fixed = np.zeros(2)
    base = np.asarray(fixed, dtype=float).reshape(-1)
    if base.shape[0] != ens.n_features:
        raise InputError(f"fixed vector needs {ens.n_features} values")
    a, b = dims
    if a == b or not (0 <= a < ens.n_features and 0 <= b < ens.n_features):
        raise InputError("dims must name two distinct features")
    xs = x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx
    ys = y0 + (np.arange(ny) + 0.5) * (y1 - y0) / ny
    gx, gy = np.meshgrid(xs, ys)
    pts = np.tile(base, (nx * ny, 1))
    pts[:, a] = gx.reshape(-1)
    pts[:, b] = gy.reshape(-1)
    labels, inside = [], []
    for bm in ens.bases:
        lab, flag = predict_base_many(bm, pts)
        labels.append(lab)
        inside.append(flag)
    voted = vote(labels).reshape(ny, nx)
    interior = np.any(inside, axis=0).reshape(ny, nx)
    return DecisionGrid(xs, ys, voted, interior, (a, b))


@dataclass
class RunResult:
    split_seed: Optional[int]
    fit_seed: Optional[int]
    n_train: int
    n_test: int
    metrics: dict[str, float]
    per_class: dict[str, tuple[float, float]] = field(default_factory=dict)
    runtime_train: float = 0.0
    runtime_predict: float = 0.0


@dataclass
class EvalReport:
    """Averaged metrics over seeded runs plus per-run detail.

    ``metrics`` holds ``accuracy``/``macro_f1`` (classification) or ``mse``
    (regression).  Timings are wall-clock seconds and are excluded from
    :meth:`metrics_block`, which is reproducible byte for byte.
    """

    task: str
    metrics: dict[str, float]
    runs: list[RunResult]
    config: dict
    dataset: str = ""

    @property
    def accuracy(self) -> float:
        return self.metrics["accuracy"]

    @property
    def macro_f1(self) -> float:
        return self.metrics["macro_f1"]

    @property
    def runtime_train(self) -> float:
        return float(np.mean([r.runtime_train for r in self.runs]))

    @property
    def runtime_predict(self) -> float:
        return float(np.mean([r.runtime_predict for r in self.runs]))

    def metrics_block(self) -> str:
        """Deterministic JSON of config, seeds and metrics (no timings)."""
        block = {
            "dataset": self.dataset,
            "task": self.task,
            "config": self.config,
            "mean": self.metrics,
            "runs": [
                {"split_seed": r.split_seed, "fit_seed": r.fit_seed, "n_train": r.n_train,
                 "n_test": r.n_test, "metrics": r.metrics, "per_class": r.per_class}
                for r in self.runs
            ],
        }
        return json.dumps(block, sort_keys=True, indent=2)

    def to_json(self) -> str:
        data = json.loads(self.metrics_block())
        data["runtime_train"] = [r.runtime_train for r in self.runs]
        data["runtime_predict"] = [r.runtime_predict for r in self.runs]
        return json.dumps(data, sort_keys=True, indent=2)

    def to_text(self) -> str:
        lines = [f"dataset: {self.dataset or '-'}  task: {self.task}  runs: {len(self.runs)}"]
        for name, value in self.metrics.items():
            per_run = ", ".join(f"{r.metrics[name]:.4f}" for r in self.runs)
            lines.append(f"{name:>9}: {value:.4f}  [{per_run}]")
        if any(r.n_train for r in self.runs):
            lines.append(f"train time: {self.runtime_train:.3f}s/run  predict time: {self.runtime_predict:.3f}s/run")
        else:
            lines.append(f"predict time: {self.runtime_predict:.3f}s")
        if self.task != REGRESSION and self.runs:
            lines.append("per-class precision/recall (last run):")
            for lab, (p, r) in self.runs[-1].per_class.items():
                lines.append(f"  {lab}: precision {p:.4f}  recall {r:.4f}")
        lines.append("[metrics]")
        lines.append(self.metrics_block())
        lines.append("[/metrics]")
        return "\n".join(lines)


def run_seeds(master_seed: int, n_runs: int) -> list[tuple[int, int]]:
    """``(split_seed, fit_seed)`` per run, derived from one master seed."""
    children = np.random.SeedSequence(master_seed).spawn(n_runs)
    return [tuple(int(v) for v in c.generate_state(2) % (2 ** 31)) for c in children]


def _config_echo(config: FitConfig, n_runs: int, fraction: Optional[float], master_seed: Optional[int]) -> dict:
    echo = asdict(config)
    echo.pop("processes")
    echo["nf_range"] = list(echo["nf_range"]) if echo["nf_range"] is not None else None
    echo.update(n_runs=n_runs, train_fraction=fraction, master_seed=master_seed)
    return echo


def class_metrics(pred, truth, label_names=None) -> tuple[dict, dict]:
    """``({"accuracy", "macro_f1"}, {label name: (precision, recall)})``."""
    names = label_names
    pc = {
        (names[c] if names and 0 <= c < len(names) else str(c)): (p, r)
        for c, (p, r, _) in per_class(pred, truth).items()
    }
    return {"accuracy": accuracy(pred, truth), "macro_f1": macro_f1(pred, truth)}, pc


def evaluate_model(model, features, truth, name: str = "") -> EvalReport:
    """Single-run report for an already fitted classifier or regressor.

    ``truth`` holds class ids (classifier) or real targets (regressor).
    """
    from .classifier import predict_many

    t0 = time.perf_counter()
    if isinstance(model, ManifoldronEnsemble):
        pred = predict_many(model, features)
        elapsed = time.perf_counter() - t0
        metrics, pc = class_metrics(pred, truth, model.label_names)
        task, echo = "classification", _config_echo(model.config, 1, None, None)
    else:
        pred = regress_many(model, features)
        elapsed = time.perf_counter() - t0
        metrics, pc = {"mse": mse(pred, truth)}, {}
        task, echo = REGRESSION, {"k": model.k}
    run = RunResult(None, None, 0, len(pred), metrics, pc, 0.0, elapsed)
    return EvalReport(task, dict(metrics), [run], echo, name)


def _run_once(args) -> RunResult:
    dataset, config, fraction, split_seed, fit_seed = args
    from .classifier import predict_many

    train, test = split(dataset, fraction, split_seed)
    t0 = time.perf_counter()
    if dataset.task == REGRESSION:
        model = fit_regressor(train.features, train.labels, config.k, fit_seed, config.mutual)
        t1 = time.perf_counter()
        pred = regress_many(model, test.features)
        metrics, pc = {"mse": mse(pred, test.labels)}, {}
    else:
        ens = fit(train, replace(config, seed=fit_seed))
        t1 = time.perf_counter()
        pred = predict_many(ens, test.features)
        metrics, pc = class_metrics(pred, test.labels, ens.label_names)
    t2 = time.perf_counter()
    return RunResult(split_seed, fit_seed, len(train), len(test), metrics, pc, t1 - t0, t2 - t1)


def benchmark(dataset: Dataset, config: Optional[FitConfig] = None, n_runs: int = 5,
              train_fraction: float = 0.7, master_seed: int = 0, name: str = "") -> EvalReport:
    """``n_runs`` independent seeded split/fit/evaluate cycles.

    Classification data report accuracy and macro-F1; regression data
    (``dataset.task == "regression"``) report the MSE of closest-simplex
    prediction.  With ``config.processes > 1`` the runs go to a process pool
    and each run fits serially; results are the same either way.
    """
    config = config or FitConfig()
    if n_runs < 1:
        raise InputError("n_runs must be >= 1")
    workers = min(config.processes, n_runs, os.cpu_count() or 1)
    inner = replace(config, processes=1) if workers > 1 else config
    jobs = [(dataset, inner, train_fraction, a, b) for a, b in run_seeds(master_seed, n_runs)]
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                runs = list(pool.map(_run_once, jobs))
        else:
            runs = [_run_once(j) for j in jobs]
    except ManifoldronError as exc:
        where = f"dataset {name!r}" if name else "benchmark dataset"
        raise type(exc)(f"{where}: {exc}") from exc
    keys = list(runs[0].metrics)
    mean = {k: float(np.mean([r.metrics[k] for r in runs])) for k in keys}
    return EvalReport(dataset.task, mean, runs, _config_echo(config, n_runs, train_fraction, master_seed), name)
