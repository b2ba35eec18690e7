"""Polytopic reduced-order modeling and adaptive state estimation.

Builds data-driven reduced models of parametric PDE systems (POD basis +
one-step linear operators, blended across a training grid) and runs
Kalman-type estimators that recover the high-dimensional state, and
optionally an unknown physical parameter, from sparse noisy measurements.
"""

__version__ = "0.1.0"

from .data import (SensorModel, Trajectory, load_dataset, make_rng, measure,
                   measure_stream, save_dataset)
from .errors import (IllConditionedError, InvalidInputError,
                     NumericalBlowupError, PolyromError)
from .estimators import (ESTIMATOR_NAMES, EstimatorRun, ObservationOperator,
                         aprom_jkf, aprom_mkf, make_estimator, rrom_kf,
                         run_stream)
from .experiment import (ExperimentConfig, ExperimentReport, default_config,
                         ingest_external_dataset, load_config, run_experiment,
                         save_config)
from .kalman import GaussianBelief, NoiseConfig, UkfParams, kf_step, ukf_step
from .metrics import MetricSeries, projection_floor, relative_error
from .rom import (ModelBank, PodBasis, build_model_bank, build_snapshot_matrices,
                  dmd_local, dmd_robust, lift, load_model, pod_basis,
                  polytopic_matrix, project, save_model, weights)
from .solver import (BurgersConfig, burgers_rhs, generate_training_set,
                     integrate_step, nonlinear_term, simulate_trajectory)

__all__ = [
    "BurgersConfig", "ESTIMATOR_NAMES", "EstimatorRun", "ExperimentConfig",
    "ExperimentReport", "GaussianBelief", "IllConditionedError",
    "InvalidInputError", "MetricSeries", "ModelBank", "NoiseConfig",
    "NumericalBlowupError", "ObservationOperator", "PodBasis", "PolyromError",
    "SensorModel", "Trajectory", "UkfParams", "aprom_jkf", "aprom_mkf",
    "build_model_bank", "build_snapshot_matrices", "burgers_rhs",
    "default_config", "dmd_local", "dmd_robust", "generate_training_set",
    "ingest_external_dataset", "integrate_step", "kf_step", "lift",
    "load_config", "load_dataset", "load_model", "make_estimator", "make_rng",
    "measure", "measure_stream", "nonlinear_term", "pod_basis",
    "polytopic_matrix", "project", "projection_floor", "relative_error",
    "rrom_kf", "run_experiment", "run_stream", "save_config", "save_dataset",
    "save_model", "simulate_trajectory", "ukf_step", "weights",
]
