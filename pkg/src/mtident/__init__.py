"""Moving-target sensing schedules for sensor-attack identification.

A defender that switches a plant's dynamics and output map through a secret,
randomly scheduled family of configurations can unambiguously identify
additive sensor attacks that would be invisible under any fixed
configuration. This package provides the system and schedule model, the
identifiability analysis (including the eigenstructure test for cross-model
attacks on constant schedules), central and per-sensor Kalman filtering with
minimum-variance fusion, windowed chi-square detection with sensor removal,
a set of reference attacker policies, and seeded end-to-end scenarios.
"""

from .detection import (
    Chi2Detector,
    Chi2Result,
    DetectorConfig,
    IdentificationLog,
    RemovalTracker,
    chi2_test,
    identify_and_remove,
    threshold_from_alpha,
)
from .errors import (
    AttackSetError,
    ConditioningError,
    ConditioningWarning,
    ConfigError,
    DecompositionError,
    DegenerateWitnessError,
    FilterError,
    ModelError,
    MtidentError,
    NotApplicableError,
)
from .estimation import (
    BankStep,
    BiasTrace,
    CentralKalmanFilter,
    CentralStep,
    FusionEstimator,
    FusionResult,
    LocalFilterBank,
    SensorDecomposition,
    bias_recursion,
    check_common_nullspace,
    kalman_decomposition,
)
from .identifiability import (
    AnalysisReport,
    CrossModelResult,
    CrossModelWitness,
    IdentVerdict,
    JordanChain,
    JordanEigenvalue,
    JordanStructure,
    ObservabilityStack,
    STATUS_CONSISTENT,
    STATUS_IDENTIFIED,
    analyze_target_set,
    brute_force_unidentifiability_oracle,
    build_v_stack,
    construct_cross_model_attack,
    cross_model_unidentifiability,
    guess_attack_feasibility,
    is_sparse_observable,
    jordan_chains,
    observability_matrix,
    sensor_consistency_check,
    sparse_observability_margin,
    time_varying_observability,
)
from .adversary import (
    AttackerInfo,
    AttackPolicy,
    CrossModelPolicy,
    GuessingPolicy,
    OmniscientSchedulePolicy,
    PersistentBiasPolicy,
    dominant_unstable_direction,
)
from .matrixio import (
    read_matrix,
    read_vector,
    write_matrix,
    write_vector,
)
from .scenario import (
    AttackSpec,
    DetectorSpec,
    EstimatorSpec,
    MonteCarloReport,
    RunReport,
    ScenarioConfig,
    ScheduleSpec,
    SystemSpec,
    config_from_dict,
    generate_example_system,
    load_config,
    monte_carlo,
    run_scenario,
    trial_config,
    write_monte_carlo_outputs,
    write_run_outputs,
)
from .system_model import (
    AttackSet,
    LtiPair,
    NoiseModel,
    RecommendationReport,
    TargetSet,
    Trajectory,
    build_attack_matrix,
    noise_model,
    sample_schedule,
    schedule_key,
    simulate_deterministic,
    simulate_stochastic,
    validate_design_recommendations,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport",
    "AttackPolicy",
    "AttackSet",
    "AttackSetError",
    "AttackSpec",
    "AttackerInfo",
    "BankStep",
    "BiasTrace",
    "CentralKalmanFilter",
    "CentralStep",
    "Chi2Detector",
    "Chi2Result",
    "ConditioningError",
    "ConditioningWarning",
    "ConfigError",
    "CrossModelPolicy",
    "CrossModelResult",
    "CrossModelWitness",
    "DecompositionError",
    "DegenerateWitnessError",
    "DetectorConfig",
    "DetectorSpec",
    "EstimatorSpec",
    "FilterError",
    "FusionEstimator",
    "FusionResult",
    "GuessingPolicy",
    "IdentVerdict",
    "IdentificationLog",
    "JordanChain",
    "JordanEigenvalue",
    "JordanStructure",
    "LocalFilterBank",
    "LtiPair",
    "ModelError",
    "MonteCarloReport",
    "MtidentError",
    "NoiseModel",
    "NotApplicableError",
    "ObservabilityStack",
    "OmniscientSchedulePolicy",
    "PersistentBiasPolicy",
    "RecommendationReport",
    "RemovalTracker",
    "RunReport",
    "STATUS_CONSISTENT",
    "STATUS_IDENTIFIED",
    "ScenarioConfig",
    "ScheduleSpec",
    "SensorDecomposition",
    "SystemSpec",
    "TargetSet",
    "Trajectory",
    "analyze_target_set",
    "bias_recursion",
    "brute_force_unidentifiability_oracle",
    "build_attack_matrix",
    "build_v_stack",
    "check_common_nullspace",
    "chi2_test",
    "config_from_dict",
    "construct_cross_model_attack",
    "cross_model_unidentifiability",
    "dominant_unstable_direction",
    "generate_example_system",
    "guess_attack_feasibility",
    "identify_and_remove",
    "is_sparse_observable",
    "jordan_chains",
    "kalman_decomposition",
    "load_config",
    "monte_carlo",
    "noise_model",
    "observability_matrix",
    "read_matrix",
    "read_vector",
    "run_scenario",
    "sample_schedule",
    "schedule_key",
    "sensor_consistency_check",
    "simulate_deterministic",
    "simulate_stochastic",
    "sparse_observability_margin",
    "threshold_from_alpha",
    "time_varying_observability",
    "trial_config",
    "validate_design_recommendations",
    "write_matrix",
    "write_monte_carlo_outputs",
    "write_run_outputs",
    "write_vector",
]
