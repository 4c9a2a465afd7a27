"""Multi-objective Bayesian optimization with random scalarizations."""

from .acq_opt import OptBudget, OptResult, maximize
from .acquisition import AcquisitionSpec, BetaSchedule, beta_value, ts_acquisition, ucb_linear, ucb_tchebychev
from .errors import ConfigError, ContractError, LogError, MoboError, NoOracleError, NumericalError, ObjectiveError
from .kernel_gp import (
    GPModel,
    KernelParams,
    draw_spectral_sample,
    fit_factorization,
    fit_hyperparams,
    kernel_eval,
    log_marginal_likelihood,
    posterior,
)
from .loop_engine import ExperimentConfig, read_log, resume, run
from .objectives import ObjectiveSet, branin_currin_4d, circle_pair, random_gp_objectives, subprocess_objective
from .regret import RegretReport, cumulative_regret, oracle_max, simple_regret_proxy
from .scalarize import linear_scalarize, scalarize, tchebychev_scalarize, transform_weights
from .weights import BoundingBox, FlatDirichlet, Fixed, RatioUniform, SphereUniform, sample_weight

__version__ = "0.1.0"

__all__ = [
    "AcquisitionSpec",
    "BetaSchedule",
    "BoundingBox",
    "ConfigError",
    "ContractError",
    "ExperimentConfig",
    "Fixed",
    "FlatDirichlet",
    "GPModel",
    "KernelParams",
    "LogError",
    "MoboError",
    "NoOracleError",
    "NumericalError",
    "ObjectiveError",
    "ObjectiveSet",
    "OptBudget",
    "OptResult",
    "RatioUniform",
    "RegretReport",
    "SphereUniform",
    "beta_value",
    "branin_currin_4d",
    "circle_pair",
    "cumulative_regret",
    "draw_spectral_sample",
    "fit_factorization",
    "fit_hyperparams",
    "kernel_eval",
    "linear_scalarize",
    "log_marginal_likelihood",
    "maximize",
    "oracle_max",
    "posterior",
    "random_gp_objectives",
    "read_log",
    "resume",
    "run",
    "sample_weight",
    "scalarize",
    "simple_regret_proxy",
    "subprocess_objective",
    "tchebychev_scalarize",
    "transform_weights",
    "ts_acquisition",
    "ucb_linear",
    "ucb_tchebychev",
]
