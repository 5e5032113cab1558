"""Evaluation protocol: cross-validation, statistics, ablation and attribution."""
from .ablation import AblationRow, all_subsets, run_ablation
from .attribution import (
    AttributionResult,
    DegenerateModelError,
    attribute_cv,
    attribute_modalities,
    linear_shapley,
    permutation_drops,
)
from .cv import (
    DEFAULT_GRIDS,
    GRID_VERSION,
    CvPlan,
    FoldFailure,
    MetricsRecord,
    TooFewPerClassError,
    derive_seed,
    expand_grid,
    inner_tune,
    make_cv_plan,
    run_cv,
    run_fold,
)
from .results import read_records, records_to_csv, write_records, write_summary
from .stats import (
    ComparisonResult,
    MetricsSummary,
    PairingError,
    TooFewPairsError,
    bootstrap_ci,
    compare_records,
    summarize,
    summarize_records,
    wilcoxon_signed_rank,
)

__all__ = [name for name in dir() if not name.startswith("_")]
