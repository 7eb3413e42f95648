"""Differentially private model-X knockoff variable selection."""

from .datamodel import AugmentedDataset, Dataset, SplitPlan, load_dataset, make_split
from .kernels import BACKEND
from .knockoffs import (
    GaussianKnockoffConfig,
    ar_covariance,
    empirical_joint_covariance,
    generate_knockoffs,
    solve_equicorrelated_r,
)
from .privacy import (
    NoiseLedger,
    PrivacyBudget,
    compose,
    gaussian_mechanism,
    gdp_tradeoff,
    noisy_max_peel,
)
from .selection import (
    EValueResult,
    PipelineConfig,
    SelectionResult,
    dp_screen,
    knockoff_threshold,
    mirror_peeling_select,
    mirror_select,
    multi_split_select,
    nonprivate_baseline,
    single_split_select,
)
from .statistics import (
    Family,
    KnockoffStatistics,
    RidgeConfig,
    SgdConfig,
    hsic_stats,
    marginal_corr_stats,
    ridge_stats,
    screening_stats,
    sgd_stats,
)

__version__ = "0.1.0"
