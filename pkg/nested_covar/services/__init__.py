# Services module
from .market_sim import bridge_max_sample, cholesky_factor, market_from_config, simulate_inner, simulate_outer
from .pricing import barrier_uoc_price, bs_call_price, geometric_asian_call_conditional, heston_call_price
from .payoffs import build_portfolio, closed_form_loss, discounted_losses
from .problems import GaussianToyProblem, LossProblem, PortfolioProblem, problem_from_plan
from .budget import allocate_budget
from .estimators import (
    batching_covar,
    batching_exact_covar,
    decoupled_covar,
    empirical_quantile,
    naive_smoothed_covar,
    naive_sns_covar,
    run_estimator
)
from .harness import compute_reference, rate_analysis, run_experiment
from .results import ResultWriter, emit_results, render_table
from .config_loader import load_plan

__all__ = [
    # Market simulation
    "bridge_max_sample",
    "cholesky_factor",
    "market_from_config",
    "simulate_inner",
    "simulate_outer",
    # Pricing
    "barrier_uoc_price",
    "bs_call_price",
    "geometric_asian_call_conditional",
    "heston_call_price",
    "build_portfolio",
    "closed_form_loss",
    "discounted_losses",
    # Problems and estimation
    "GaussianToyProblem",
    "LossProblem",
    "PortfolioProblem",
    "problem_from_plan",
    "allocate_budget",
    "batching_covar",
    "batching_exact_covar",
    "decoupled_covar",
    "empirical_quantile",
    "naive_smoothed_covar",
    "naive_sns_covar",
    "run_estimator",
    # Experiments
    "compute_reference",
    "rate_analysis",
    "run_experiment",
    "ResultWriter",
    "emit_results",
    "render_table",
    "load_plan"
]
