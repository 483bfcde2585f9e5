"""Dataset model, file ingestion, normalization, and synthetic data generation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """A file or array could not be turned into a valid dataset."""


class NonNumericValueError(DatasetError):
    """A feature cell could not be parsed as a number."""


class NonFiniteValueError(DatasetError):
    """A feature cell is NaN or infinite."""


class ClassCountError(DatasetError):
    """Labels do not form at least two non-empty classes 0..C-1."""


def _check_finite(X: np.ndarray) -> None:
    if not np.isfinite(X).all():
        r, c = np.argwhere(~np.isfinite(X))[0]
        raise NonFiniteValueError(f"non-finite value at (row {r}, column {c})")


@dataclass(frozen=True)
class Dataset:
    """An immutable samples-by-features matrix with integer class labels.

    X is T x n float64, y holds labels from the contiguous set {0..C-1} with
    every class present and C >= 2. Optional feature_names/label_names record
    the source header and the original label values in mapping order.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] | None = None
    label_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=int)
        if X.ndim != 2:
            raise DatasetError(f"feature matrix must be 2-dimensional, got shape {X.shape}")
        if X.shape[0] < 2:
            raise DatasetError(f"need at least 2 samples, got {X.shape[0]}")
        if X.shape[1] < 1:
            raise DatasetError("need at least 1 feature")
        if y.shape != (X.shape[0],):
            raise DatasetError(f"label vector shape {y.shape} does not match {X.shape[0]} samples")
        _check_finite(X)
        if y.min() < 0:
            raise ClassCountError("labels must be non-negative integers")
        n_classes = int(y.max()) + 1
        present = np.unique(y)
        if n_classes < 2:
            raise ClassCountError("expected at least two classes, found 1")
        if len(present) != n_classes:
            missing = sorted(set(range(n_classes)) - set(present.tolist()))
            raise ClassCountError(f"class {missing[0]} has zero samples")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise DatasetError("feature_names length does not match feature count")
        if self.label_names is not None and len(self.label_names) != n_classes:
            raise DatasetError("label_names length does not match class count")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.y.max()) + 1

    def feature_name(self, i: int) -> str:
        if self.feature_names is not None:
            return self.feature_names[i]
        return f"f{i}"

    def subset(self, rows: np.ndarray) -> "Dataset":
        """Row subset keeping names. Fails if a class disappears."""
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.X[rows], self.y[rows], self.feature_names, self.label_names)


@dataclass(frozen=True)
class FeatureRanking:
    """A permutation of feature indices, best first, with aligned scores."""

    order: np.ndarray
    scores: np.ndarray

    def __post_init__(self) -> None:
        order = np.array(self.order, dtype=int)
        scores = np.array(self.scores, dtype=float)
        n = order.shape[0]
        if scores.shape != (n,):
            raise ValueError("scores must align with order")
        if not np.array_equal(np.sort(order), np.arange(n)):
            raise ValueError("order must be a permutation of 0..n-1")
        if n > 1 and np.any(np.diff(scores) > 0):
            raise ValueError("scores must be non-increasing along the ranking")
        order.setflags(write=False)
        scores.setflags(write=False)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "scores", scores)

    @property
    def n_features(self) -> int:
        return self.order.shape[0]

    def top(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.n_features:
            raise ValueError(f"k must be in 1..{self.n_features}, got {k}")
        return self.order[:k]


@dataclass(frozen=True)
class NormalizationStats:
    """Per-column shift/scale fitted on one matrix, applicable to another.

    Columns flagged degenerate (constant in the fitted data) map to all zeros.
    """

    shift: np.ndarray
    scale: np.ndarray
    degenerate: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.shift.shape[0]:
            raise ValueError("matrix width does not match fitted statistics")
        out = (X + self.shift) / self.scale
        out[:, self.degenerate] = 0.0
        return out

    @property
    def degenerate_columns(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.degenerate)]


def fit_normalization(X: np.ndarray) -> NormalizationStats:
    """Fit the shift-by-min / divide-by-sum statistics on each column.

    A column is shifted only when it contains negative entries; constant
    columns are flagged degenerate and will transform to zeros.
    """
    X = np.asarray(X, dtype=float)
    mins = X.min(axis=0)
    maxs = X.max(axis=0)
    degenerate = mins == maxs
    shift = np.where(mins < 0, -mins, 0.0)
    sums = (X + shift).sum(axis=0)
    scale = np.where(degenerate | (sums == 0), 1.0, sums)
    return NormalizationStats(shift=shift, scale=scale, degenerate=degenerate)


def normalize_features(d: Dataset) -> tuple[Dataset, NormalizationStats]:
    """Map each feature column onto the non-negative sum-to-1 representation.

    Columns with negative entries are shifted by -min first; constant columns
    become all zeros and are flagged in the returned statistics. Applying the
    function to its own output changes nothing (beyond 1e-12 round-off).
    """
    stats = fit_normalization(d.X)
    Xn = stats.transform(d.X)
    return Dataset(Xn, d.y, d.feature_names, d.label_names), stats


def _map_labels(raw: list[str]) -> tuple[np.ndarray, tuple[str, ...]]:
    # first-appearance order, applied uniformly to strings and integer-like labels
    mapping: dict[str, int] = {}
    for v in raw:
        if v not in mapping:
            mapping[v] = len(mapping)
    y = np.array([mapping[v] for v in raw], dtype=int)
    if len(mapping) < 2:
        raise ClassCountError(f"expected at least two classes, found {len(mapping)}")
    return y, tuple(mapping)


def _parse_matrix(rows: list[list[str]], col_labels: list[str] | None = None) -> np.ndarray:
    """Convert string cells to floats, locating the offending cell on failure."""
    width = len(rows[0])
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DatasetError(f"row {r} has {len(row)} cells, expected {width}")
    try:
        X = np.array(rows, dtype=float)
    except ValueError:
        for r, row in enumerate(rows):
            for c, tok in enumerate(row):
                try:
                    float(tok)
                except ValueError:
                    col = col_labels[c] if col_labels else str(c)
                    raise NonNumericValueError(
                        f"non-numeric value {tok!r} at (row {r}, column {col})"
                    ) from None
        raise
    return X


def load_dataset(
    path: str | Path,
    format: str = "csv",
    label_col: str | int = "label",
    labels_path: str | Path | None = None,
) -> Dataset:
    """Load a dataset from disk.

    Args:
        path: data file. "csv" format expects a UTF-8 header row naming the
            columns; "matrix" expects a whitespace-separated numeric matrix,
            one sample per row.
        format: "csv" or "matrix".
        label_col: for csv, the label column, by header name or by integer
            position when no header matches.
        labels_path: for matrix format, a file with one label per line,
            aligned with the matrix rows.

    Raises:
        FileNotFoundError: the file (or labels file) does not exist.
        NonNumericValueError / NonFiniteValueError: bad feature cells.
        ClassCountError: fewer than two classes.
        DatasetError: other structural problems.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such data file: {path}")
    if format == "csv":
        return _load_csv(path, label_col)
    if format == "matrix":
        if labels_path is None:
            raise DatasetError("matrix format requires a labels file")
        labels_path = Path(labels_path)
        if not labels_path.exists():
            raise FileNotFoundError(f"no such labels file: {labels_path}")
        return _load_matrix(path, labels_path)
    raise DatasetError(f"unknown format {format!r}, expected 'csv' or 'matrix'")


def _load_csv(path: Path, label_col: str | int) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        table = [row for row in reader if row]
    if len(table) < 2:
        raise DatasetError(f"{path}: need a header row and at least one data row")
    header = [h.strip() for h in table[0]]
    if isinstance(label_col, str) and label_col in header:
        li = header.index(label_col)
    else:
        try:
            li = int(label_col)
        except (TypeError, ValueError):
            raise DatasetError(
                f"label column {label_col!r} not found; columns are {header}"
            ) from None
        if not 0 <= li < len(header):
            raise DatasetError(f"label column index {li} out of range for {len(header)} columns")
    rows = [[cell.strip() for cell in row] for row in table[1:]]
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DatasetError(f"row {r} has {len(row)} cells, expected {len(header)}")
    raw_labels = [row[li] for row in rows]
    feat_rows = [row[:li] + row[li + 1 :] for row in rows]
    feat_names = tuple(header[:li] + header[li + 1 :])
    X = _parse_matrix(feat_rows, list(feat_names))
    y, label_names = _map_labels(raw_labels)
    return Dataset(X, y, feat_names, label_names)


def _load_matrix(path: Path, labels_path: Path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        rows = [line.split() for line in fh if line.strip()]
    if not rows:
        raise DatasetError(f"{path}: empty matrix file")
    X = _parse_matrix(rows)
    with open(labels_path, encoding="utf-8") as fh:
        raw_labels = [line.strip() for line in fh if line.strip()]
    if len(raw_labels) != X.shape[0]:
        raise DatasetError(
            f"{labels_path}: {len(raw_labels)} labels for {X.shape[0]} matrix rows"
        )
    y, label_names = _map_labels(raw_labels)
    return Dataset(X, y, None, label_names)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for the two-class Gaussian benchmark generator."""

    n_samples: int
    n_features: int
    n_informative: int
    class_separation: float
    noise_sd: float
    seed: int

    def __post_init__(self) -> None:
        if self.n_samples < 2:
            raise ValueError("n_samples must be at least 2")
        if self.n_features < 1:
            raise ValueError("n_features must be positive")
        if not 1 <= self.n_informative <= self.n_features:
            raise ValueError(
                f"n_informative must be in 1..{self.n_features}, got {self.n_informative}"
            )
        if not self.class_separation > 0:
            raise ValueError("class_separation must be positive")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a non-negative 64-bit integer")


def generate_synthetic(spec: SyntheticSpec) -> tuple[Dataset, frozenset[int]]:
    """Draw a labelled Gaussian dataset with a known informative subset.

    Labels alternate 0/1. Informative columns get their class mean shifted by
    class_separation; every column carries independent N(0, noise_sd^2) noise.
    Fully reproducible from spec.seed.
    """
    rng = np.random.default_rng(spec.seed)
    informative = rng.choice(spec.n_features, size=spec.n_informative, replace=False)
    y = np.arange(spec.n_samples) % 2
    X = rng.normal(0.0, spec.noise_sd, size=(spec.n_samples, spec.n_features))
    X[:, informative] += np.outer(y, np.full(spec.n_informative, spec.class_separation))
    d = Dataset(X, y)
    return d, frozenset(int(i) for i in informative)
