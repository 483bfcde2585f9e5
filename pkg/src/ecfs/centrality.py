"""Principal-eigenvector computation and the end-to-end feature ranking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, FeatureRanking, normalize_features
from .graph import (
    AdjacencyMatrix,
    ScoreVector,
    build_adjacency,
    default_bin_count,
    fisher_scores,
    mutual_information_scores,
    sigma_matrix,
)


class PowerIterationError(RuntimeError):
    """Iteration budget exhausted before the residual dropped below tolerance.

    Usually means the two largest eigenvalue magnitudes are nearly tied.
    """

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class EigenResult:
    """Dominant eigenpair with convergence diagnostics.

    degenerate marks inputs with no usable dominant direction (zero matrix, or
    an iterate annihilated by the matrix); lambda0 is 0 there.
    """

    lambda0: float
    v0: np.ndarray
    iterations: int
    residual: float
    degenerate: bool = False


def _as_matrix(A) -> np.ndarray:
    M = A.A if isinstance(A, AdjacencyMatrix) else np.asarray(A, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got shape {M.shape}")
    if not np.isfinite(M).all():
        raise ValueError("matrix entries must be finite")
    if M.min() < 0:
        raise ValueError("matrix entries must be non-negative")
    return M


def _clamp_tiny_negatives(v: np.ndarray) -> np.ndarray:
    # round-off guard; the iterates of a non-negative matrix stay non-negative
    out = v.copy()
    out[(out < 0) & (out > -1e-12)] = 0.0
    return out


def power_iteration(A, tol: float = 1e-10, max_iter: int = 10000) -> EigenResult:
    """Dominant right eigenpair by normalized power iteration.

    Starts from the all-ones direction and repeats v <- A v / ||A v|| until
    ||A v - lambda v|| <= tol with lambda the Rayleigh quotient v.(A v).

    Raises:
        PowerIterationError: residual still above tol after max_iter sweeps;
            the exception carries the last residual.
    """
    M = _as_matrix(A)
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    n = M.shape[0]
    v = np.ones(n) / np.sqrt(n)
    if not M.any():
        return EigenResult(0.0, v, 0, 0.0, degenerate=True)
    w = M @ v
    residual = np.inf
    for it in range(1, max_iter + 1):
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0:
            # the current direction is annihilated; every eigenvalue on this
            # path is 0, so report the last direction with lambda0 = 0
            return EigenResult(0.0, _clamp_tiny_negatives(v), it, 0.0, degenerate=True)
        v = w / nrm
        w = M @ v
        lam = float(v @ w)
        residual = float(np.linalg.norm(w - lam * v))
        if residual <= tol:
            return EigenResult(lam, _clamp_tiny_negatives(v), it, residual)
    raise PowerIterationError(
        f"no convergence after {max_iter} iterations (residual {residual:.3e})",
        residual=residual,
        iterations=max_iter,
    )


def matrix_power_oracle(A, l_max: int = 2**20, agree_tol: float = 1e-10) -> EigenResult:
    """Dominant eigenpair via the literal accessibility limit A^l e.

    Squares the matrix repeatedly (renormalizing each time to avoid overflow),
    doubling l until successive normalized A^l e directions agree within
    agree_tol in the max norm. lambda0 is the Rayleigh quotient of the limit
    direction under the original matrix. Independent of power_iteration by
    construction; intended as a cross-check.
    """
    M = _as_matrix(A)
    if l_max < 1:
        raise ValueError("l_max must be at least 1")
    n = M.shape[0]
    e = np.ones(n)
    if not M.any():
        return EigenResult(0.0, e / np.sqrt(n), 0, 0.0, degenerate=True)
    B = M.copy()
    l = 1
    w = B @ e
    w /= np.linalg.norm(w)  # row sums of a non-zero non-negative matrix cannot all vanish
    while l < l_max:
        B = B @ B
        peak = B.max()
        if peak == 0.0:
            # the matrix is nilpotent; A^l e is exactly zero from here on
            return EigenResult(0.0, _clamp_tiny_negatives(w), l, 0.0, degenerate=True)
        B /= peak
        l *= 2
        u = B @ e
        nu = float(np.linalg.norm(u))
        if nu == 0.0:
            return EigenResult(0.0, _clamp_tiny_negatives(w), l, 0.0, degenerate=True)
        u /= nu
        if float(np.abs(u - w).max()) <= agree_tol:
            lam = float(u @ (M @ u))
            residual = float(np.linalg.norm(M @ u - lam * u))
            return EigenResult(lam, _clamp_tiny_negatives(u), l, residual)
        w = u
    raise PowerIterationError(
        f"successive directions still disagree at l = {l}",
        residual=float(np.abs(u - w).max()) if l > 1 else np.inf,
        iterations=l,
    )


def rank_features(v0: ScoreVector | np.ndarray) -> FeatureRanking:
    """Order features by score, best first; ties break toward the smaller index."""
    values = v0.values if isinstance(v0, ScoreVector) else np.asarray(v0, dtype=float)
    if values.ndim != 1 or values.shape[0] < 1:
        raise ValueError("scores must form a non-empty vector")
    if not np.isfinite(values).all():
        raise ValueError("scores must be finite")
    if values.min() < -1e-12:
        raise ValueError("scores must be non-negative")
    values = np.maximum(values, 0.0)
    order = np.argsort(-values, kind="stable")
    return FeatureRanking(order=order, scores=values[order])


@dataclass(frozen=True)
class EcfsRun:
    """Every intermediate of one centrality ranking, for reports and debugging."""

    ranking: FeatureRanking
    eigen: EigenResult
    adjacency: AdjacencyMatrix
    fisher: ScoreVector
    mutual_information: ScoreVector
    bins: int
    degenerate_features: list[int]


def ecfs_run(
    d: Dataset,
    alpha: float = 0.5,
    bins: int | None = None,
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> EcfsRun:
    """Run the full ranking pipeline, keeping intermediates.

    Normalizes features, scores them (Fisher, mutual information), builds the
    blended adjacency, extracts its dominant eigenvector, and ranks by it.
    """
    if bins is None:
        bins = default_bin_count(d.n_samples)
    dn, stats = normalize_features(d)
    f = fisher_scores(dn)
    m = mutual_information_scores(dn, bins)
    adjacency = build_adjacency(f, m, sigma_matrix(dn), alpha)
    eigen = power_iteration(adjacency, tol=tol, max_iter=max_iter)
    ranking = rank_features(ScoreVector(eigen.v0, "centrality"))
    return EcfsRun(
        ranking=ranking,
        eigen=eigen,
        adjacency=adjacency,
        fisher=f,
        mutual_information=m,
        bins=bins,
        degenerate_features=stats.degenerate_columns,
    )


def ecfs_rank(d: Dataset, alpha: float = 0.5, bins: int | None = None) -> FeatureRanking:
    """Rank features by eigenvector centrality of the blended feature graph."""
    return ecfs_run(d, alpha=alpha, bins=bins).ranking
