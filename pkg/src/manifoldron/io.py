"""Datasets and the CSV interchange format.

Files are UTF-8, comma separated, ``.`` decimal, optional header row, label
in the last column unless named.  Class labels are mapped to dense integers
``0..C-1`` (numeric labels in numeric order, otherwise lexical order) and the
original spellings are kept in ``Dataset.label_names``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from numpy.typing import NDArray

from .errors import DataError

CLASSIFICATION = "classification"
REGRESSION = "regression"


@dataclass
class Dataset:
    """Feature matrix plus labels (class ids) or real targets.

    Parameters
    ----------
    features : ndarray, shape (n, Na)
    labels : ndarray, shape (n,)
        ``int64`` class ids for classification, ``float64`` targets for
        regression.
    feature_names : list of str, optional
    label_names : list of str, optional
        Original spelling of each class id.
    task : {"classification", "regression"}
    """

    features: NDArray[np.float64]
    labels: NDArray
    feature_names: Optional[list[str]] = None
    label_names: Optional[list[str]] = None
    task: str = CLASSIFICATION

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-d array")
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise DataError(f"unknown task {self.task!r}")
        dtype = np.int64 if self.task == CLASSIFICATION else float
        self.labels = np.asarray(self.labels).astype(dtype, copy=False).reshape(-1)
        if self.labels.shape[0] != self.features.shape[0]:
            raise DataError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values")
        if self.task == REGRESSION and not np.all(np.isfinite(self.labels)):
            raise DataError("targets contain non-finite values")
        if self.feature_names is not None and len(self.feature_names) != self.n_features:
            raise DataError("feature_names length does not match the feature count")

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def classes(self) -> NDArray[np.int64]:
        return np.unique(self.labels)

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.features[rows], self.labels[rows], self.feature_names,
                       self.label_names, self.task)

    def label_name(self, label: int) -> str:
        if self.label_names is None:
            return str(int(label))
        return self.label_names[int(label)]


def _parse_float(cell: str, line: int, column: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"line {line}: column {column + 1}: {cell!r} is not a number") from None
    if not np.isfinite(value):
        raise DataError(f"line {line}: column {column + 1}: non-finite value {cell!r}")
    return value


def _dense_labels(raw: list[str]) -> tuple[NDArray[np.int64], list[str]]:
    uniq = sorted(set(raw))
    try:
        uniq.sort(key=float)
    except ValueError:
        pass
    index = {name: i for i, name in enumerate(uniq)}
    return np.array([index[r] for r in raw], dtype=np.int64), uniq


def load_csv(path: Union[str, Path], label_column: str = "last", has_header: bool = False,
             regression: bool = False) -> Dataset:
    """Read a dataset from CSV.

    Parameters
    ----------
    label_column : str
        ``"last"`` or the header name of the label column (requires
        ``has_header``).
    regression : bool
        Parse the label column as real targets instead of class names.

    Raises
    ------
    DataError
        Empty file, ragged or malformed rows (message carries the line number).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    rows = [(i + 1, r) for i, r in enumerate(csv.reader(text.splitlines())) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header: Optional[list[str]] = None
    if has_header:
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: header but no data rows")
    width = len(rows[0][1])
    if width < 2:
        raise DataError(f"{path}: need at least one feature column and a label column")
    if label_column == "last":
        lab = width - 1
    else:
        if header is None:
            raise DataError("a named label column requires a header row")
        if label_column not in header:
            raise DataError(f"label column {label_column!r} not in header {header}")
        lab = header.index(label_column)
    feats = np.empty((len(rows), width - 1))
    raw_labels: list[str] = []
    for r, (line, cells) in enumerate(rows):
        if len(cells) != width:
            raise DataError(f"line {line}: expected {width} columns, found {len(cells)}")
        cols = [c.strip() for c in cells]
        j = 0
        for c, cell in enumerate(cols):
            if c == lab:
                continue
            feats[r, j] = _parse_float(cell, line, c)
            j += 1
        raw_labels.append(cols[lab])
        if regression:
            _parse_float(cols[lab], line, lab)
    names = None if header is None else [h for c, h in enumerate(header) if c != lab]
    if regression:
        return Dataset(feats, np.array([float(v) for v in raw_labels]), names, None, REGRESSION)
    labels, label_names = _dense_labels(raw_labels)
    return Dataset(feats, labels, names, label_names, CLASSIFICATION)


def _read_rows(path: Path) -> list[tuple[int, list[str]]]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    rows = [(i + 1, [c.strip() for c in r])
            for i, r in enumerate(csv.reader(text.splitlines())) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    return rows


def sniff_header(path: Union[str, Path]) -> bool:
    """True when the first non-empty row has a non-numeric feature cell."""
    cells = _read_rows(Path(path))[0][1]
    for cell in cells[:-1] or cells:
        try:
            float(cell)
        except ValueError:
            return True
    return False


def load_features(path: Union[str, Path], n_features: int,
                  has_header: Optional[bool] = None) -> tuple[NDArray[np.float64], Optional[list[str]]]:
    """Rows for a fitted model: ``n_features`` columns, optionally plus a label last.

    Returns the feature matrix and the raw label strings (``None`` when the
    file has no label column).  ``has_header=None`` sniffs the first row.
    """
    path = Path(path)
    if has_header is None:
        has_header = sniff_header(path)
    rows = _read_rows(path)[1 if has_header else 0:]
    if not rows:
        raise DataError(f"{path}: header but no data rows")
    width = len(rows[0][1])
    if width not in (n_features, n_features + 1):
        raise DataError(
            f"{path}: rows have {width} columns but the model expects {n_features} features "
            f"(optionally followed by a label column)"
        )
    feats = np.empty((len(rows), n_features))
    labels: Optional[list[str]] = [] if width == n_features + 1 else None
    for r, (line, cells) in enumerate(rows):
        if len(cells) != width:
            raise DataError(f"line {line}: expected {width} columns, found {len(cells)}")
        for c in range(n_features):
            feats[r, c] = _parse_float(cells[c], line, c)
        if labels is not None:
            labels.append(cells[-1])
    return feats, labels


def save_csv(dataset: Dataset, path: Union[str, Path], header: bool = True) -> None:
    """Write ``dataset`` with round-trip float formatting, label last."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = dataset.feature_names or [f"x{j}" for j in range(dataset.n_features)]
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(list(names) + ["label" if dataset.task == CLASSIFICATION else "target"])
        for x, y in zip(dataset.features, dataset.labels):
            label = repr(float(y)) if dataset.task == REGRESSION else dataset.label_name(y)
            w.writerow([repr(float(v)) for v in x] + [label])
