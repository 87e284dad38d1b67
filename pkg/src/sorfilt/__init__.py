"""Outlier-robust nonlinear state estimation via variational measurement
down-weighting, with a low-complexity serial variant and experiment tooling."""

from .gaussian import (
    JointFactor,
    PredictedMeasurement,
    SerialUpdateResult,
    innovation,
    joint_factor_from_moments,
    joint_factor_from_sigma,
    posterior_predictive_meas,
    predict,
    predict_measurement,
    serial_conditioning,
    update_parallel,
    update_serial,
    wrap_angle,
)
from .harness import (
    BenchReport,
    CheckResult,
    FilterReport,
    FilterRunOutcome,
    RunReport,
    ScenarioConfig,
    SweepPointReport,
    bench_runtime,
    complexity_fit,
    invariant_checks,
    rmse_pos,
    rmse_pos_per_run,
    run_rng,
    run_sweep,
    run_tracking_single,
    run_uwb_experiment,
)
from .model import (
    FilterNumericsError,
    GaussianBelief,
    Measurement,
    NonlinearSSM,
    ValidationReport,
    chol_lower,
    ensure_spd,
    symmetrize,
    validate_model,
)
from .tracking import (
    TRACKING_X0,
    CorruptionConfig,
    SensorField,
    TrajectoryData,
    TurnModelConfig,
    clean_measurement,
    corrupt,
    dump_trajectory_csv,
    make_tracking_model,
    nominal_sigmas,
    process_noise_cov,
    sample_gamma,
    simulate_trajectory,
    turn_transition,
)
from .unscented import (
    SigmaPointSet,
    UTParams,
    draw_sigma_points,
    eval_sigma_points,
    moments_from_values,
    unscented_mean_vardiag,
    unscented_moments,
)
from .uwb import (
    AnchorSet,
    DatasetError,
    LocalizationResult,
    StepRecord,
    convert_raw_dataset,
    encode_measurements,
    load_dataset,
    make_synthetic_dataset,
    run_localization,
    uwb_measurement_model,
    write_dataset,
)
from .vb import (
    IndicatorBelief,
    IndicatorConfig,
    SorStepResult,
    effective_precision,
    omega_update,
    sor_filter_run,
    sor_step,
    ukf_filter_run,
    ukf_step,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorSet",
    "BenchReport",
    "CheckResult",
    "CorruptionConfig",
    "DatasetError",
    "FilterNumericsError",
    "FilterReport",
    "FilterRunOutcome",
    "GaussianBelief",
    "IndicatorBelief",
    "IndicatorConfig",
    "JointFactor",
    "LocalizationResult",
    "Measurement",
    "NonlinearSSM",
    "PredictedMeasurement",
    "RunReport",
    "ScenarioConfig",
    "SensorField",
    "SerialUpdateResult",
    "SigmaPointSet",
    "SorStepResult",
    "StepRecord",
    "SweepPointReport",
    "TRACKING_X0",
    "TrajectoryData",
    "TurnModelConfig",
    "UTParams",
    "ValidationReport",
    "bench_runtime",
    "chol_lower",
    "clean_measurement",
    "complexity_fit",
    "convert_raw_dataset",
    "corrupt",
    "dump_trajectory_csv",
    "draw_sigma_points",
    "effective_precision",
    "encode_measurements",
    "ensure_spd",
    "eval_sigma_points",
    "innovation",
    "invariant_checks",
    "joint_factor_from_moments",
    "joint_factor_from_sigma",
    "load_dataset",
    "make_synthetic_dataset",
    "make_tracking_model",
    "moments_from_values",
    "nominal_sigmas",
    "omega_update",
    "posterior_predictive_meas",
    "predict",
    "predict_measurement",
    "process_noise_cov",
    "rmse_pos",
    "rmse_pos_per_run",
    "run_localization",
    "run_rng",
    "run_sweep",
    "run_tracking_single",
    "run_uwb_experiment",
    "sample_gamma",
    "serial_conditioning",
    "simulate_trajectory",
    "sor_filter_run",
    "sor_step",
    "symmetrize",
    "turn_transition",
    "ukf_filter_run",
    "ukf_step",
    "unscented_mean_vardiag",
    "unscented_moments",
    "update_parallel",
    "update_serial",
    "uwb_measurement_model",
    "validate_model",
    "wrap_angle",
    "write_dataset",
]
