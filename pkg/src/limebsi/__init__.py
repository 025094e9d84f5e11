"""Bayesian statistical inversion for a lime warming in room air."""
from .forward_model import (
    ExperimentConditions,
    ModelParams,
    PhysicalEstimateInputs,
    biot_number,
    classical_solution_curve,
    error_amplification,
    estimate_lambda,
    integrate_ode,
    lime_temperature,
    reconstruct_initial_temperature,
)
from .probability import (
    NoiseModel,
    Normal,
    Observation,
    TruncatedNormal,
    Uniform,
    log_likelihood_point,
    log_likelihood_series,
    log_pdf,
    log_posterior,
    sample,
)
from .sampler import ChainConfig, SampleSet, effective_sample_size, rw_metropolis, split_rhat
from .problems import (
    GroundTruth,
    ProblemSpec,
    build_problem_I,
    build_problem_IIa,
    build_problem_IIb,
    ill_conditioning_sweep,
    run_problem,
    synthesize_data,
)

__version__ = "0.1.0"
