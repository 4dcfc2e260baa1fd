"""Domain adaptation under joint label and class-conditional shift.

The package couples an optimal-transport estimator of target label
proportions with an importance-weighted adversarial Wasserstein training
loop, plus the toy benchmark and experiment harness used to validate both.
"""

from . import errors
from .mixtures import MixtureModel, agglomerative_cluster, gmm_fit, gmm_responsibilities
from .ot import (
    TransportPlan,
    brute_force_assignment,
    check_cyclical_monotonicity,
    optimal_assignment,
    solve_discrete_ot,
    wasserstein1_empirical,
)
from .proportions import (
    ImportanceWeights,
    ProportionEstimate,
    estimate_target_proportions,
    importance_weights,
    source_class_means,
)
from .toydata import LabeledDataset, ToyConfig, gen_toy, l1_proportion_error, lemma1_sup_ratio
from .training import (
    EvalReport,
    TrainConfig,
    TrainedModel,
    evaluate,
    train_mars,
    train_source_only,
    train_wd_beta,
)

__all__ = [
    "errors",
    "TransportPlan",
    "brute_force_assignment",
    "check_cyclical_monotonicity",
    "optimal_assignment",
    "solve_discrete_ot",
    "wasserstein1_empirical",
    "MixtureModel",
    "agglomerative_cluster",
    "gmm_fit",
    "gmm_responsibilities",
    "ImportanceWeights",
    "ProportionEstimate",
    "estimate_target_proportions",
    "importance_weights",
    "source_class_means",
    "LabeledDataset",
    "ToyConfig",
    "gen_toy",
    "l1_proportion_error",
    "lemma1_sup_ratio",
    "EvalReport",
    "TrainConfig",
    "TrainedModel",
    "evaluate",
    "train_mars",
    "train_source_only",
    "train_wd_beta",
]
