"""Piece-wise stationary bandits: GLR change-point detection and klUCB policies."""

from .cpd import CusumDetector, GlrDetector, MTestDetector, glr_statistic
from .environments import PiecewiseEnv, env_metadata, load_env, reward_matrix, sample_reward
from .harness import (
    ExperimentConfig,
    PolicySpec,
    check_assumptions,
    default_tunings,
    emit_results,
    run_experiment,
    run_single,
)
from .klcore import (
    ThresholdParams,
    beta_threshold,
    cal_t,
    f_explore,
    h_inv,
    kl_bern,
    kl_quad,
    klucb_upper,
)
from .policies import make_policy, resolve_params

__all__ = [
    "CusumDetector",
    "GlrDetector",
    "MTestDetector",
    "glr_statistic",
    "PiecewiseEnv",
    "env_metadata",
    "load_env",
    "reward_matrix",
    "sample_reward",
    "ExperimentConfig",
    "PolicySpec",
    "check_assumptions",
    "default_tunings",
    "emit_results",
    "run_experiment",
    "run_single",
    "ThresholdParams",
    "beta_threshold",
    "cal_t",
    "f_explore",
    "h_inv",
    "kl_bern",
    "kl_quad",
    "klucb_upper",
    "make_policy",
    "resolve_params",
]
