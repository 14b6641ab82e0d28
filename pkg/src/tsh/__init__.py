"""Thompson Sampling with a selection exponent ``h`` for Bernoulli bandits."""

from .bandit import PosteriorState, ProblemInstance, RandomStream, pull, update
from .errors import ConsistencyError, DegenerateInputError, DomainError
from .harness import ExperimentConfig, RegretCurve, run_episode, run_experiment, sweep_h
from .policy import PolicyConfig, SelectionMode, select_arm, selection_weights, two_arm_selection
from .posterior import BetaParams, beta_cdf, beta_exceedance, best_arm_probabilities, binomial_cdf
from .theory import classify_regime, theorem1_h_range, threshold_report

__version__ = "0.1.0"

__all__ = [
    "BetaParams",
    "ConsistencyError",
    "DegenerateInputError",
    "DomainError",
    "ExperimentConfig",
    "PolicyConfig",
    "PosteriorState",
    "ProblemInstance",
    "RandomStream",
    "RegretCurve",
    "SelectionMode",
    "best_arm_probabilities",
    "beta_cdf",
    "beta_exceedance",
    "binomial_cdf",
    "classify_regime",
    "pull",
    "run_episode",
    "run_experiment",
    "select_arm",
    "selection_weights",
    "sweep_h",
    "theorem1_h_range",
    "threshold_report",
    "two_arm_selection",
    "update",
]
