"""Repeated-split evaluation: classifier AUC, selection stability, significance.

Everything here is a pure function of its inputs and a seed. Per-repeat seeds
are derived from the master seed with a fixed counter scheme, so results are
identical across runs and across worker counts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.special import betainc

from .baselines import rank_by_fisher, rank_by_mi
from .centrality import ecfs_rank
from .data import Dataset, FeatureRanking, fit_normalization

METHODS = ("ec_fs", "fisher", "mi")
DEFAULT_ALPHA_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
DEFAULT_C_GRID = (0.01, 0.1, 1.0, 10.0)
DEFAULT_CARDINALITIES = (50, 100, 150, 200)

# fixed per-method constants for seed derivation, independent of method order
_METHOD_SEED = {"ec_fs": 0, "fisher": 1, "mi": 2}


class SplitError(ValueError):
    """A requested partition cannot respect the class structure."""


@dataclass(frozen=True)
class SplitPlan:
    """How to resample the data: train fraction, repeat count, master seed."""

    train_fraction: float = 2.0 / 3.0
    n_repeats: int = 100
    seed: int = 0
    stratified: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be strictly between 0 and 1")
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be positive")
        if not 0 <= self.seed < 2**63:
            raise ValueError("seed must be a non-negative 63-bit integer")


def derive_seed(*parts: int) -> int:
    """Collapse a master seed plus counters into one well-mixed integer seed."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, dtype=np.uint64)[0] >> 1)


def _train_count(count: int, fraction: float) -> int:
    n = int(np.floor(fraction * count + 0.5))
    return min(max(n, 1), count - 1)


def split_indices(y: np.ndarray, plan: SplitPlan) -> list[tuple[np.ndarray, np.ndarray]]:
    """Index pairs (train, test) for each repeat; together they cover all rows.

    Stratified mode splits within each class, keeping class proportions to
    within one sample and at least one sample of every class on both sides.
    """
    y = np.asarray(y, dtype=int)
    out = []
    classes = np.unique(y)
    for r in range(plan.n_repeats):
        rng = np.random.default_rng([plan.seed, r])
        if plan.stratified:
            train_parts, test_parts = [], []
            for c in classes:
                idx = np.flatnonzero(y == c)
                if len(idx) < 2:
                    raise SplitError(
                        f"class {c} has {len(idx)} sample(s); need at least 2 to stratify"
                    )
                perm = rng.permutation(idx)
                k = _train_count(len(idx), plan.train_fraction)
                train_parts.append(perm[:k])
                test_parts.append(perm[k:])
            train = np.sort(np.concatenate(train_parts))
            test = np.sort(np.concatenate(test_parts))
        else:
            perm = rng.permutation(len(y))
            k = _train_count(len(y), plan.train_fraction)
            train = np.sort(perm[:k])
            test = np.sort(perm[k:])
        out.append((train, test))
    return out


def make_splits(d: Dataset, plan: SplitPlan) -> list[tuple[Dataset, Dataset]]:
    """Materialize the planned repeats as (train, test) dataset pairs."""
    return [(d.subset(tr), d.subset(te)) for tr, te in split_indices(d.y, plan)]


def stratified_fold_indices(y: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    """Deal each class round-robin into the given number of folds."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    y = np.asarray(y, dtype=int)
    if folds > len(y):
        raise SplitError(f"cannot cut {len(y)} samples into {folds} folds")
    rng = np.random.default_rng([seed])
    parts: list[list[np.ndarray]] = [[] for _ in range(folds)]
    for c in np.unique(y):
        perm = rng.permutation(np.flatnonzero(y == c))
        for j in range(folds):
            parts[j].append(perm[j::folds])
    return [np.sort(np.concatenate(p)) for p in parts]


@dataclass(frozen=True)
class LinearModel:
    """Linear decision function w.x + b with the C it was trained at."""

    w: np.ndarray
    b: float
    C: float

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.w.shape[0]:
            raise ValueError("matrix width does not match the trained weights")
        return X @ self.w + self.b

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.decision(X) > 0).astype(int)


def train_linear_classifier(
    train: Dataset,
    selected: np.ndarray,
    C: float,
    epochs: int = 50,
    seed: int = 0,
) -> LinearModel:
    """Hinge-loss linear classifier by stochastic subgradient descent.

    Step size 1/(lambda t) with lambda = 1/(C T); samples are reshuffled each
    epoch with a seeded generator, so training is deterministic. The bias is
    carried as a constant input and regularized with the weights.
    """
    if train.n_classes != 2:
        raise ValueError("classifier requires binary labels")
    selected = np.asarray(selected, dtype=int)
    if selected.size == 0:
        raise ValueError("selected feature set must be non-empty")
    if len(np.unique(selected)) != selected.size:
        raise ValueError("selected feature indices must be unique")
    if selected.min() < 0 or selected.max() >= train.n_features:
        raise ValueError("selected feature index out of range")
    if not C > 0:
        raise ValueError("C must be positive")
    if epochs < 1:
        raise ValueError("epochs must be positive")
    T = train.n_samples
    Xa = np.hstack([train.X[:, selected], np.ones((T, 1))])
    yy = train.y.astype(float) * 2.0 - 1.0
    lam = 1.0 / (C * T)
    w = np.zeros(Xa.shape[1])
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(T):
            t += 1
            eta = 1.0 / (lam * t)
            margin = yy[i] * float(Xa[i] @ w)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta * yy[i] * Xa[i]
    return LinearModel(w=w[:-1], b=float(w[-1]), C=float(C))


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Probability a positive outranks a negative, ties counting one half.

    Computed from integer win/tie counts over score groups, so the result is
    exactly the pairwise definition.
    """
    s = np.asarray(scores, dtype=float)
    yl = np.asarray(labels, dtype=int)
    if s.shape != yl.shape or s.ndim != 1:
        raise ValueError("scores and labels must be aligned vectors")
    n_pos = int((yl == 1).sum())
    n_neg = int((yl == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present to compute AUC")
    order = np.argsort(s, kind="mergesort")
    ss = s[order]
    yy = yl[order]
    wins = ties = 0
    neg_below = 0
    i = 0
    T = len(ss)
    while i < T:
        j = i
        while j < T and ss[j] == ss[i]:
            j += 1
        pos_in = int((yy[i:j] == 1).sum())
        neg_in = (j - i) - pos_in
        wins += neg_below * pos_in
        ties += neg_in * pos_in
        neg_below += neg_in
        i = j
    return (2 * wins + ties) / (2 * n_pos * n_neg)


def _fit_fold_score(
    train_d: Dataset,
    val_d: Dataset,
    selected: np.ndarray,
    C: float,
    epochs: int,
    seed: int,
) -> float:
    stats = fit_normalization(train_d.X)
    trn = Dataset(stats.transform(train_d.X), train_d.y)
    val_X = stats.transform(val_d.X)
    model = train_linear_classifier(trn, selected, C, epochs=epochs, seed=seed)
    return roc_auc(model.decision(val_X[:, selected]), val_d.y)


def cross_validate(
    train: Dataset,
    alpha_grid=DEFAULT_ALPHA_GRID,
    C_grid=DEFAULT_C_GRID,
    folds: int = 5,
    cardinality: int = 100,
    seed: int = 0,
    bins: int | None = None,
    epochs: int = 50,
) -> tuple[float, float]:
    """Pick (alpha, C) by stratified k-fold AUC on the training data only.

    Each fold fits its own normalization and ranking, selects the top
    `cardinality` features (capped at the feature count), and scores the
    held-out fold. Exact mean-AUC ties break toward the smaller alpha, then
    the smaller C.
    """
    alphas = sorted(set(float(a) for a in alpha_grid))
    Cs = sorted(set(float(c) for c in C_grid))
    if not alphas or not Cs:
        raise ValueError("alpha_grid and C_grid must be non-empty")
    if alphas[0] < 0 or alphas[-1] > 1:
        raise ValueError("alpha grid values must lie in [0, 1]")
    if Cs[0] <= 0:
        raise ValueError("C grid values must be positive")
    if cardinality < 1:
        raise ValueError("cardinality must be positive")
    cardinality = min(cardinality, train.n_features)
    fold_parts = stratified_fold_indices(train.y, folds, seed)
    n_classes = train.n_classes
    table = np.zeros((len(alphas), len(Cs)))
    for j, va_idx in enumerate(fold_parts):
        tr_idx = np.sort(np.concatenate([fold_parts[i] for i in range(folds) if i != j]))
        for part, name in ((tr_idx, "training side"), (va_idx, "validation side")):
            if len(np.unique(train.y[part])) != n_classes:
                raise SplitError(f"fold {j} leaves a single class on its {name}")
        trd = train.subset(tr_idx)
        vad = train.subset(va_idx)
        stats = fit_normalization(trd.X)
        trn = Dataset(stats.transform(trd.X), trd.y)
        va_X = stats.transform(vad.X)
        for ai, a in enumerate(alphas):
            sel = ecfs_rank(trn, a, bins).top(cardinality)
            for ci, c in enumerate(Cs):
                model = train_linear_classifier(
                    trn, sel, c, epochs=epochs, seed=derive_seed(seed, j, ai, ci)
                )
                table[ai, ci] += roc_auc(model.decision(va_X[:, sel]), vad.y)
    table /= folds
    best = (0, 0)
    for ai in range(len(alphas)):
        for ci in range(len(Cs)):
            if table[ai, ci] > table[best]:
                best = (ai, ci)
    return alphas[best[0]], Cs[best[1]]


def kuncheva_index(set_a, set_b, n_total: int) -> float:
    """Chance-corrected overlap of two equal-size feature subsets.

    1 for identical sets, 0 at the chance overlap k^2/N, and negative below
    it (-1 exactly for disjoint halves of the feature set).
    """
    a = set(int(i) for i in set_a)
    b = set(int(i) for i in set_b)
    if len(a) != len(set_a) or len(b) != len(set_b):
        raise ValueError("feature subsets must not contain duplicates")
    if len(a) != len(b):
        raise ValueError(f"subsets must have equal size, got {len(a)} and {len(b)}")
    k = len(a)
    if not 0 < k < n_total:
        raise ValueError(f"subset size must be in 1..{n_total - 1}, got {k}")
    if a | b:
        lo, hi = min(a | b), max(a | b)
        if lo < 0 or hi >= n_total:
            raise ValueError("subset contains an index outside 0..n_total-1")
    r = len(a & b)
    return (r * n_total - k * k) / (k * (n_total - k))


def stability_curve(
    rankings: list[FeatureRanking], cardinalities
) -> list[tuple[int, float]]:
    """Mean pairwise Kuncheva overlap of the top-k sets, per cardinality."""
    if len(rankings) < 2:
        raise ValueError("need at least two rankings")
    n = rankings[0].n_features
    if any(r.n_features != n for r in rankings):
        raise ValueError("rankings must cover the same feature count")
    ks = [int(k) for k in cardinalities]
    if not ks:
        raise ValueError("need at least one cardinality")
    if any(not 0 < k < n for k in ks):
        raise ValueError(f"cardinalities must be in 1..{n - 1}")
    out = []
    for k in ks:
        tops = [set(int(i) for i in r.top(k)) for r in rankings]
        vals = [kuncheva_index(tops[i], tops[j], n) for i, j in combinations(range(len(tops)), 2)]
        out.append((k, float(np.mean(vals))))
    return out


def two_sample_ttest(x, y) -> float:
    """Two-sided pooled-variance t-test p-value.

    Degenerate inputs with zero pooled variance give p = 1 when the means are
    equal and p = 0 otherwise.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or len(x) < 2 or len(y) < 2:
        raise ValueError("each sample needs at least two observations")
    nx, ny = len(x), len(y)
    mx, my = float(x.mean()), float(y.mean())
    pooled = ((nx - 1) * x.var(ddof=1) + (ny - 1) * y.var(ddof=1)) / (nx + ny - 2)
    if pooled == 0.0:
        return 1.0 if mx == my else 0.0
    t = (mx - my) / np.sqrt(pooled * (1.0 / nx + 1.0 / ny))
    df = nx + ny - 2
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def _rank_with(method: str, d: Dataset, alpha: float, bins: int | None) -> FeatureRanking:
    # dispatch through module globals so tests can instrument the rankers
    if method == "ec_fs":
        return ecfs_rank(d, alpha, bins)
    if method == "fisher":
        return rank_by_fisher(d)
    if method == "mi":
        return rank_by_mi(d, bins)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _as_cardinalities(cardinalities, n_features: int) -> list[int]:
    ks = sorted(set(int(k) for k in cardinalities))
    if not ks:
        raise ValueError("need at least one cardinality")
    if ks[0] < 1 or ks[-1] >= n_features:
        raise ValueError(
            f"cardinalities must be in 1..{n_features - 1} for a {n_features}-feature dataset"
        )
    return ks


def _check_methods(methods) -> list[str]:
    ms = list(methods)
    if not ms:
        raise ValueError("need at least one method")
    for m in ms:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
    if len(set(ms)) != len(ms):
        raise ValueError("duplicate method names")
    return ms


def _resolve_alpha(alpha) -> tuple[bool, float | None]:
    if isinstance(alpha, str):
        if alpha != "cv":
            raise ValueError(f"alpha must be a number in [0, 1] or 'cv', got {alpha!r}")
        return True, None
    a = float(alpha)
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {a}")
    return False, a


def _sd(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(np.asarray(values), ddof=1))


def _map_repeats(fn, n_repeats: int, workers: int) -> list:
    if workers < 1:
        raise ValueError("workers must be at least 1")
    if workers == 1:
        return [fn(r) for r in range(n_repeats)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(n_repeats)))


def run_evaluation(
    d: Dataset,
    plan: SplitPlan,
    *,
    methods=METHODS,
    cardinalities=DEFAULT_CARDINALITIES,
    alpha=0.5,
    fixed_c: float = 1.0,
    bins: int | None = None,
    alpha_grid=DEFAULT_ALPHA_GRID,
    c_grid=DEFAULT_C_GRID,
    folds: int = 5,
    cv_cardinality: int = 100,
    epochs: int = 50,
    workers: int = 1,
) -> dict:
    """Full protocol: repeated stratified splits, per-split rankings fit on the
    training side only, classifier AUC on the held-out side, stability and
    pairwise significance across repeats.

    alpha may be a number or "cv", in which case each repeat picks (alpha, C)
    on its own training split. Baselines always train at fixed_c. The returned
    report is a plain JSON-ready dict, byte-stable across worker counts.
    """
    if d.n_classes != 2:
        raise ValueError("evaluation requires binary labels; binarize one-vs-rest first")
    methods = _check_methods(methods)
    ks = _as_cardinalities(cardinalities, d.n_features)
    cv_mode, fixed_alpha = _resolve_alpha(alpha)
    if not fixed_c > 0:
        raise ValueError("fixed_c must be positive")
    splits = split_indices(d.y, plan)

    def one_repeat(r: int) -> dict:
        tr_idx, te_idx = splits[r]
        trd = d.subset(tr_idx)
        ted = d.subset(te_idx)
        stats = fit_normalization(trd.X)
        trn = Dataset(stats.transform(trd.X), trd.y, d.feature_names, d.label_names)
        te_X = stats.transform(ted.X)
        alpha_r, c_r = fixed_alpha, fixed_c
        if cv_mode:
            alpha_r, c_r = cross_validate(
                trd,
                alpha_grid,
                c_grid,
                folds=folds,
                cardinality=cv_cardinality,
                seed=derive_seed(plan.seed, r, 101),
                bins=bins,
                epochs=epochs,
            )
        rankings: dict[str, FeatureRanking] = {}
        aucs: dict[str, list[float]] = {}
        for method in methods:
            a = alpha_r if method == "ec_fs" else 0.0
            rankings[method] = _rank_with(method, trn, a, bins)
            c_used = c_r if method == "ec_fs" else fixed_c
            row = []
            for k in ks:
                sel = rankings[method].top(k)
                model = train_linear_classifier(
                    trn,
                    sel,
                    c_used,
                    epochs=epochs,
                    seed=derive_seed(plan.seed, r, _METHOD_SEED[method], k),
                )
                row.append(roc_auc(model.decision(te_X[:, sel]), ted.y))
            aucs[method] = row
        return {"rankings": rankings, "aucs": aucs, "alpha": alpha_r, "C": c_r}

    results = _map_repeats(one_repeat, plan.n_repeats, workers)

    auc_block: dict = {}
    for method in methods:
        per_card = {}
        means = []
        for ki, k in enumerate(ks):
            samples = [float(res["aucs"][method][ki]) for res in results]
            mean = float(np.mean(samples))
            per_card[str(k)] = {"mean": mean, "sd": _sd(samples), "samples": samples}
            means.append(mean)
        auc_block[method] = {"per_cardinality": per_card, "average": float(np.mean(means))}

    stability_block = {}
    if plan.n_repeats >= 2:
        for method in methods:
            curve = stability_curve([res["rankings"][method] for res in results], ks)
            stability_block[method] = [
                {"cardinality": k, "kuncheva": v} for k, v in curve
            ]

    significance = {}
    if "ec_fs" in methods and plan.n_repeats >= 2:
        for method in methods:
            if method == "ec_fs":
                continue
            ps = {}
            for ki, k in enumerate(ks):
                a = [res["aucs"]["ec_fs"][ki] for res in results]
                b = [res["aucs"][method][ki] for res in results]
                ps[str(k)] = two_sample_ttest(a, b)
            significance[f"ec_fs_vs_{method}"] = ps

    report = {
        "schema_version": 1,
        "command": "evaluate",
        "n_samples": d.n_samples,
        "n_features": d.n_features,
        "label_mapping": list(d.label_names) if d.label_names else None,
        "config": {
            "methods": methods,
            "cardinalities": ks,
            "alpha": "cv" if cv_mode else fixed_alpha,
            "fixed_c": fixed_c,
            "bins": bins,
            "train_fraction": plan.train_fraction,
            "n_repeats": plan.n_repeats,
            "seed": plan.seed,
            "stratified": plan.stratified,
            "epochs": epochs,
            "alpha_grid": [float(a) for a in alpha_grid] if cv_mode else None,
            "c_grid": [float(c) for c in c_grid] if cv_mode else None,
            "folds": folds if cv_mode else None,
            "cv_cardinality": cv_cardinality if cv_mode else None,
        },
        "auc": auc_block,
        "stability": stability_block,
        "significance": significance,
    }
    if "ec_fs" in methods:
        report["alpha_per_repeat"] = [float(res["alpha"]) for res in results]
        report["c_per_repeat"] = [float(res["C"]) for res in results]
    return report


def run_stability(
    d: Dataset,
    plan: SplitPlan,
    *,
    methods=METHODS,
    cardinalities=DEFAULT_CARDINALITIES,
    alpha=0.5,
    bins: int | None = None,
    alpha_grid=DEFAULT_ALPHA_GRID,
    c_grid=DEFAULT_C_GRID,
    folds: int = 5,
    cv_cardinality: int = 100,
    epochs: int = 50,
    workers: int = 1,
) -> dict:
    """Selection stability across repeated training splits, no classifier.

    Rankings are fit on each repeat's training side; the report holds the mean
    pairwise Kuncheva overlap of the top-k sets per method and cardinality.
    """
    methods = _check_methods(methods)
    ks = _as_cardinalities(cardinalities, d.n_features)
    cv_mode, fixed_alpha = _resolve_alpha(alpha)
    if plan.n_repeats < 2:
        raise ValueError("stability needs at least 2 repeats")
    splits = split_indices(d.y, plan)

    def one_repeat(r: int) -> dict:
        tr_idx, _ = splits[r]
        trd = d.subset(tr_idx)
        stats = fit_normalization(trd.X)
        trn = Dataset(stats.transform(trd.X), trd.y, d.feature_names, d.label_names)
        alpha_r = fixed_alpha
        if cv_mode:
            alpha_r, _ = cross_validate(
                trd,
                alpha_grid,
                c_grid,
                folds=folds,
                cardinality=cv_cardinality,
                seed=derive_seed(plan.seed, r, 101),
                bins=bins,
                epochs=epochs,
            )
        rankings = {}
        for method in methods:
            a = alpha_r if method == "ec_fs" else 0.0
            rankings[method] = _rank_with(method, trn, a, bins)
        return {"rankings": rankings, "alpha": alpha_r}

    results = _map_repeats(one_repeat, plan.n_repeats, workers)
    stability_block = {}
    for method in methods:
        curve = stability_curve([res["rankings"][method] for res in results], ks)
        stability_block[method] = [{"cardinality": k, "kuncheva": v} for k, v in curve]

    report = {
        "schema_version": 1,
        "command": "stability",
        "n_samples": d.n_samples,
        "n_features": d.n_features,
        "label_mapping": list(d.label_names) if d.label_names else None,
        "config": {
            "methods": methods,
            "cardinalities": ks,
            "alpha": "cv" if cv_mode else fixed_alpha,
            "bins": bins,
            "train_fraction": plan.train_fraction,
            "n_repeats": plan.n_repeats,
            "seed": plan.seed,
            "stratified": plan.stratified,
        },
        "stability": stability_block,
    }
    if "ec_fs" in methods:
        report["alpha_per_repeat"] = [float(res["alpha"]) for res in results]
    return report
