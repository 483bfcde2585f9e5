"""Per-feature relevance scores and the weighted feature-graph adjacency.

Each feature becomes a graph node. Node relevance comes from two supervised
scores (Fisher separation and a histogram mutual information estimate); edges
blend a rank-1 relevance product with a pairwise dispersion matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset

# denominator floor for zero-variance Fisher scores
VARIANCE_FLOOR = 1e-12

SCORE_KINDS = ("fisher", "mutual_information", "centrality")


@dataclass(frozen=True)
class ScoreVector:
    """One finite score per feature. Fisher/MI scores are non-negative."""

    values: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] < 1:
            raise ValueError("scores must form a non-empty vector")
        if not np.isfinite(values).all():
            raise ValueError("scores must be finite")
        if self.kind not in SCORE_KINDS:
            raise ValueError(f"unknown score kind {self.kind!r}")
        if self.kind in ("fisher", "mutual_information") and values.min() < 0:
            raise ValueError(f"{self.kind} scores must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "values": [float(v) for v in self.values]}


def default_bin_count(n_samples: int) -> int:
    """Histogram width rule when no bin count is given: max(2, floor(sqrt(T)))."""
    return max(2, int(math.floor(math.sqrt(n_samples))))


def fisher_scores(d: Dataset) -> ScoreVector:
    """Fisher separation score per feature.

    Two classes: squared mean gap over the summed class variances. More
    classes: sum of squared class-mean offsets from the overall mean, over the
    summed class variances. Variances are population (divide by class size).
    A zero denominator yields 0 when the numerator is 0, otherwise the
    numerator over a 1e-12 floor.
    """
    X, y = d.X, d.y
    classes = range(d.n_classes)
    means = np.stack([X[y == c].mean(axis=0) for c in classes])
    variances = np.stack([X[y == c].var(axis=0) for c in classes])
    if d.n_classes == 2:
        num = (means[0] - means[1]) ** 2
        den = variances[0] + variances[1]
    else:
        overall = X.mean(axis=0)
        num = ((means - overall) ** 2).sum(axis=0)
        den = variances.sum(axis=0)
    out = np.zeros(d.n_features)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    floored = ~ok & (num > 0)
    out[floored] = num[floored] / VARIANCE_FLOOR
    return ScoreVector(out, "fisher")


def mutual_information_scores(d: Dataset, bins: int | None = None) -> ScoreVector:
    """Mutual information between each discretized feature and the labels.

    Each feature is cut into equal-width bins over its own [min, max]; the
    score is the natural-log MI of the joint bin/label histogram, with
    zero-probability terms contributing nothing. Constant features score 0.
    Round-off can push the sum a hair below zero; results are clamped at 0.
    """
    if bins is None:
        bins = default_bin_count(d.n_samples)
    if bins < 2:
        raise ValueError(f"bins must be at least 2, got {bins}")
    X, y = d.X, d.y
    T = d.n_samples
    C = d.n_classes
    p_label = np.bincount(y, minlength=C) / T
    out = np.zeros(d.n_features)
    for i in range(d.n_features):
        col = X[:, i]
        lo, hi = col.min(), col.max()
        if lo == hi:
            continue
        z = np.floor((col - lo) / (hi - lo) * bins).astype(int)
        np.clip(z, 0, bins - 1, out=z)
        joint = np.bincount(z * C + y, minlength=bins * C).reshape(bins, C) / T
        p_bin = joint.sum(axis=1)
        nz = joint > 0
        ratio = joint[nz] / (np.outer(p_bin, p_label)[nz])
        out[i] = max(float((joint[nz] * np.log(ratio)).sum()), 0.0)
    return ScoreVector(out, "mutual_information")


def sigma_matrix(d: Dataset) -> np.ndarray:
    """Pairwise dispersion: entry (i, j) is max of the two feature std devs.

    Population standard deviations over all samples. On sum-to-1 normalized
    input every entry lands in [0, 1]. Symmetric by construction.
    """
    s = d.X.std(axis=0)
    return np.maximum.outer(s, s)


def _minmax_rescale(values: np.ndarray) -> tuple[np.ndarray, bool]:
    lo, hi = values.min(), values.max()
    if lo == hi:
        return np.zeros_like(values), True
    return (values - lo) / (hi - lo), False


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Non-negative weighted adjacency of the feature graph, plus its mixing weight.

    degenerate_fisher / degenerate_mi flag score vectors that were constant and
    therefore rescaled to all zeros.
    """

    A: np.ndarray
    alpha: float
    degenerate_fisher: bool = False
    degenerate_mi: bool = False

    def __post_init__(self) -> None:
        A = np.asarray(self.A)
        if A.dtype != np.float64 or A.flags.writeable:
            # copy unless the caller already handed over an immutable array
            A = np.array(A, dtype=float)
            A.setflags(write=False)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {A.shape}")
        if A.shape[0] < 1:
            raise ValueError("adjacency must have at least one node")
        # scalar reductions instead of boolean masks: NaN poisons min/max and
        # any infinity surfaces as an endpoint, so two passes cover both checks
        mn, mx = A.min(), A.max()
        if not (np.isfinite(mn) and np.isfinite(mx)):
            raise ValueError("adjacency entries must be finite")
        if mn < 0:
            raise ValueError("adjacency entries must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        object.__setattr__(self, "A", A)

    @property
    def n_features(self) -> int:
        return self.A.shape[0]

    def dump_text(self, path) -> None:
        """Row-major plain-text dump for debugging."""
        np.savetxt(path, self.A)


def build_adjacency(
    f: ScoreVector, m: ScoreVector, Sigma: np.ndarray, alpha: float
) -> AdjacencyMatrix:
    """Blend the rank-1 relevance product with the dispersion matrix.

    Both score vectors are min-max rescaled to [0, 1] (a constant vector
    becomes all zeros and is flagged), then
    A = alpha * outer(f, m) + (1 - alpha) * Sigma.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    Sigma = np.asarray(Sigma, dtype=float)
    n = len(f)
    if len(m) != n or Sigma.shape != (n, n):
        raise ValueError("score vectors and Sigma must agree on the feature count")
    fs, degenerate_f = _minmax_rescale(f.values)
    ms, degenerate_m = _minmax_rescale(m.values)
    # in-place blend; per-entry rounding matches alpha*outer + (1-alpha)*Sigma
    A = np.outer(fs, ms)
    A *= alpha
    # row blocks keep the scaled-Sigma temporary small enough to recycle
    step = max(1, (4 << 20) // (8 * n))
    for i in range(0, n, step):
        A[i:i + step] += (1.0 - alpha) * Sigma[i:i + step]
    A.setflags(write=False)
    return AdjacencyMatrix(
        A=A, alpha=alpha, degenerate_fisher=degenerate_f, degenerate_mi=degenerate_m
    )
