"""Feature selection by eigenvector centrality on a feature graph, with an
evaluation harness (repeated-split AUC, selection stability, significance)."""

from .baselines import rank_by_fisher, rank_by_mi
from .centrality import (
    EcfsRun,
    EigenResult,
    PowerIterationError,
    ecfs_rank,
    ecfs_run,
    matrix_power_oracle,
    power_iteration,
    rank_features,
)
from .data import (
    ClassCountError,
    Dataset,
    DatasetError,
    FeatureRanking,
    NonFiniteValueError,
    NonNumericValueError,
    NormalizationStats,
    SyntheticSpec,
    fit_normalization,
    generate_synthetic,
    load_dataset,
    normalize_features,
)
from .evaluation import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_C_GRID,
    DEFAULT_CARDINALITIES,
    METHODS,
    LinearModel,
    SplitError,
    SplitPlan,
    cross_validate,
    derive_seed,
    kuncheva_index,
    make_splits,
    roc_auc,
    run_evaluation,
    run_stability,
    split_indices,
    stability_curve,
    stratified_fold_indices,
    train_linear_classifier,
    two_sample_ttest,
)
from .graph import (
    AdjacencyMatrix,
    ScoreVector,
    build_adjacency,
    default_bin_count,
    fisher_scores,
    mutual_information_scores,
    sigma_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "AdjacencyMatrix",
    "ClassCountError",
    "Dataset",
    "DatasetError",
    "DEFAULT_ALPHA_GRID",
    "DEFAULT_C_GRID",
    "DEFAULT_CARDINALITIES",
    "EcfsRun",
    "EigenResult",
    "FeatureRanking",
    "LinearModel",
    "METHODS",
    "NonFiniteValueError",
    "NonNumericValueError",
    "NormalizationStats",
    "PowerIterationError",
    "ScoreVector",
    "SplitError",
    "SplitPlan",
    "SyntheticSpec",
    "build_adjacency",
    "cross_validate",
    "default_bin_count",
    "derive_seed",
    "ecfs_rank",
    "ecfs_run",
    "fisher_scores",
    "fit_normalization",
    "generate_synthetic",
    "kuncheva_index",
    "load_dataset",
    "make_splits",
    "matrix_power_oracle",
    "mutual_information_scores",
    "normalize_features",
    "power_iteration",
    "rank_by_fisher",
    "rank_by_mi",
    "rank_features",
    "roc_auc",
    "run_evaluation",
    "run_stability",
    "sigma_matrix",
    "split_indices",
    "stability_curve",
    "stratified_fold_indices",
    "train_linear_classifier",
    "two_sample_ttest",
]
