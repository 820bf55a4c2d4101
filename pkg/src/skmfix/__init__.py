"""Stochastic Krasnoselskii-Mann iterations, their error bounds, and RVI-Q-learning."""

from .bounds import (
    BoundParams,
    asymptote_power,
    bound_constant,
    bound_convolution,
    bound_euclidean,
    bound_general,
    bound_power,
    fixed_horizon_rate,
    high_prob_bound,
    kappa_bar,
)
from .engine import Trajectory, pathwise_certificate, run, run_batch, sample_random_iterate
from .errors import (
    BudgetExceededError,
    ConvergenceError,
    ConvolutionConditionError,
    DomainError,
    MdpFormatError,
    NonFiniteIterateError,
    PreconditionError,
)
from .harness import ExperimentConfig, Summary, compare_to_bound, emit_csv, run_experiment
from .mdp import Mdp, Stabilizer, duff_mdp, run_rvi_q, solve_exact
from .noise import NoiseModel
from .operators import NonexpansiveOperator, NormSpec, check_nonexpansive
from .sequences import StepsizeSchedule, VarianceSchedule, power_constants
from .specfun import dawson, hyp2f1_half

__version__ = "0.1.0"
