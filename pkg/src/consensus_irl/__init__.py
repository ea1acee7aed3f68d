"""Consensus reward learning from mixed-quality demonstrations.

Tabular MaxEnt IRL plus trajectory pruning: fit a reward to every
demonstration, score each trajectory by how far its actions fall from the
learned greedy policy, drop the low-consensus tail, and refit on what
remains. Includes the feature-to-state discretization path for clinical-style
records, a synthetic ground-truth generator for quantitative validation, and
permutation-based disparity reports.
"""

from .analyze import (
    ClusterReport,
    PairwiseResult,
    TestResult,
    anova_f_statistic,
    chi_squared_statistic,
    cluster_report,
    end_state_deciles,
    holm_correction,
    pairwise_permutation_tests,
    per_trajectory_reward_delta,
    permutation_anova,
    permutation_chi2,
    reward_delta_by_state,
    test_pruning_uniformity,
    test_reward_loss_disparity,
)
from .discretize import (
    ClusterModel,
    assign_states,
    build_trajectory_set,
    fit_state_space,
)
from .errors import (
    CohortEmptyError,
    InputError,
    NumericError,
    ParameterError,
    SchemaError,
)
from .ingest import (
    ActionCodec,
    RawRecord,
    encode_actions,
    filter_outliers,
    hypotension_codec,
    impute_series,
    regroup_demographics,
    sepsis_codec,
)
from .maxent import (
    FeatureExpectations,
    IrlConfig,
    SoftPolicy,
    empirical_state_visitation,
    expected_state_visitation,
    initial_state_distribution,
    soft_backward_pass,
    train_maxent_irl,
)
from .mdp import (
    DeterministicPolicy,
    RewardModel,
    TransitionModel,
    estimate_transitions,
    expected_action_reward,
    expected_reward_table,
    greedy_policy,
)
from .pipeline import (
    TwoStageResult,
    retention_sweep,
    run_two_stage,
    write_run_directory,
)
from .prune import (
    PruneConfig,
    TrajectoryScore,
    read_scores_csv,
    score_deviation,
    score_likelihood,
    score_trajectories,
    select_retained,
    write_scores_csv,
)
from .synth import (
    DemographicTag,
    LabeledPopulation,
    PopulationConfig,
    SyntheticWorld,
    evaluate_recovery,
    finite_horizon_values,
    generate_population,
    generate_world,
    policy_value,
)
from .trajectories import Trajectory, TrajectorySet
from .version import __version__

__all__ = [
    "ActionCodec",
    "ClusterModel",
    "ClusterReport",
    "CohortEmptyError",
    "DemographicTag",
    "DeterministicPolicy",
    "FeatureExpectations",
    "InputError",
    "IrlConfig",
    "LabeledPopulation",
    "NumericError",
    "PairwiseResult",
    "ParameterError",
    "PopulationConfig",
    "PruneConfig",
    "RawRecord",
    "RewardModel",
    "SchemaError",
    "SoftPolicy",
    "SyntheticWorld",
    "TestResult",
    "Trajectory",
    "TrajectoryScore",
    "TrajectorySet",
    "TransitionModel",
    "TwoStageResult",
    "__version__",
    "anova_f_statistic",
    "assign_states",
    "build_trajectory_set",
    "chi_squared_statistic",
    "cluster_report",
    "empirical_state_visitation",
    "encode_actions",
    "end_state_deciles",
    "estimate_transitions",
    "evaluate_recovery",
    "expected_action_reward",
    "expected_reward_table",
    "expected_state_visitation",
    "filter_outliers",
    "finite_horizon_values",
    "fit_state_space",
    "generate_population",
    "generate_world",
    "greedy_policy",
    "holm_correction",
    "hypotension_codec",
    "impute_series",
    "initial_state_distribution",
    "pairwise_permutation_tests",
    "per_trajectory_reward_delta",
    "permutation_anova",
    "permutation_chi2",
    "policy_value",
    "read_scores_csv",
    "regroup_demographics",
    "retention_sweep",
    "reward_delta_by_state",
    "run_two_stage",
    "score_deviation",
    "score_likelihood",
    "score_trajectories",
    "select_retained",
    "sepsis_codec",
    "soft_backward_pass",
    "test_pruning_uniformity",
    "test_reward_loss_disparity",
    "train_maxent_irl",
    "write_run_directory",
    "write_scores_csv",
]
