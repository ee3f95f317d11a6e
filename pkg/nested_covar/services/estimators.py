# nested_covar/services/estimators.py
"""
CoVaR estimators.

All of them end in the batching estimator: n = k*h (mu, pi) pairs are cut
into k consecutive batches of h, each batch contributes the pi paired with
its ceil(alpha*h)-th smallest mu, and the estimate is the ceil(beta*k)-th
smallest of those concomitants. They differ in where the pairs come from:

    batching   exact losses on fresh stage-2 scenarios
    sns        inner sample means on the same scenarios
    coupled    smoothed inner means, fitted and evaluated on the same scenarios
    decoupled  surfaces fitted on m stage-1 scenarios, evaluated on n fresh ones
"""
import logging
import math
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..config import settings
from ..errors import DimensionMismatch, DomainError, EmptyInput, ShapeMismatch
from ..models.estimation import Coupling, EstimatorMethod
from ..models.surface import SmootherFamily, SurfaceModel, TrainingSet
from ..schemas.estimator import BudgetAllocation, EstimateReport, EstimatorConfig, PhaseTimings
from ..schemas.smoothing import SmoothingConfig
from ..utils.timing import recorded_elapsed
from ..utils.validators import validate_level
from .problems import LossProblem
from .rng import Stream
from .smoothers.diagnostics import Surface, predict
from .smoothers.tuning import select_and_fit
from .workers import map_ordered

logger = logging.getLogger(__name__)

# Rows per parallel surface-evaluation unit
_EVAL_BLOCK = 8192


def order_index(p: float, n: int) -> int:
    """1-based index ceil(p*n), robust to p*n landing a hair above an integer"""
    return min(max(math.ceil(round(p * n, 9)), 1), n)


def empirical_quantile(values, p: float) -> float:
    """
    The ceil(p*N)-th smallest value.

    Raises:
        EmptyInput: no values
        DomainError: p outside (0, 1)
    """
    ok, message = validate_level(p, "p")
    if not ok:
        raise DomainError(message)
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise EmptyInput("cannot take the quantile of an empty sample")
    rank = order_index(p, values.size) - 1
    return float(np.partition(values, rank)[rank])


class BatchingResult(NamedTuple):
    covar: float
    concomitants: np.ndarray
    var_hat: float
    batch_var: np.ndarray


def batch_concomitants(mu: np.ndarray, pi: np.ndarray, h: int, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-batch concomitant and selected mu order statistic for consecutive batches of h.

    Ties in mu keep input order (stable sort).
    """
    mu_batches = mu.reshape(-1, h)
    pi_batches = pi.reshape(-1, h)
    rows = np.arange(mu_batches.shape[0])
    selected = np.argsort(mu_batches, axis=1, kind="stable")[:, order_index(alpha, h) - 1]
    return pi_batches[rows, selected], mu_batches[rows, selected]


def batching_covar(mu, pi, k: int, h: int, alpha: float, beta: float) -> BatchingResult:
    """
    Batching estimate from k*h (mu, pi) pairs in input order.

    var_hat is the median over batches of the selected mu order statistic.

    Raises:
        ShapeMismatch: the pair count is not k*h
    """
    mu = np.asarray(mu, dtype=float).ravel()
    pi = np.asarray(pi, dtype=float).ravel()
    if mu.shape != pi.shape or mu.size != k * h:
        raise ShapeMismatch(f"batching needs k*h = {k * h} pairs, got {mu.size} mu and {pi.size} pi values")
    for level, name in ((alpha, "alpha"), (beta, "beta")):
        ok, message = validate_level(level, name)
        if not ok:
            raise DomainError(message)

    concomitants, batch_var = batch_concomitants(mu, pi, h, alpha)
    return BatchingResult(empirical_quantile(concomitants, beta), concomitants, float(np.median(batch_var)), batch_var)


class StreamingBatcher:
    """Consumes whole batches block by block so n never has to fit in memory"""

    def __init__(self, h: int, alpha: float):
        self.h = h
        self.alpha = alpha
        self._concomitants = []
        self._batch_var = []

    def push(self, mu: np.ndarray, pi: np.ndarray) -> None:
        if mu.size % self.h:
            raise ShapeMismatch(f"streamed blocks must hold whole batches of {self.h}")
        concomitants, batch_var = batch_concomitants(mu, pi, self.h, self.alpha)
        self._concomitants.append(concomitants)
        self._batch_var.append(batch_var)

    def merge(self, other: "StreamingBatcher") -> None:
        """Append the batches of a later block"""
        if other.h != self.h or other.alpha != self.alpha:
            raise ShapeMismatch("cannot merge batchers of different batch size or level")
        self._concomitants.extend(other._concomitants)
        self._batch_var.extend(other._batch_var)

    @property
    def batches(self) -> int:
        return sum(c.size for c in self._concomitants)

    def result(self, beta: float) -> BatchingResult:
        concomitants = np.concatenate(self._concomitants) if self._concomitants else np.empty(0)
        batch_var = np.concatenate(self._batch_var) if self._batch_var else np.empty(0)
        if concomitants.size == 0:
            raise EmptyInput("no batches were streamed")
        return BatchingResult(empirical_quantile(concomitants, beta), concomitants, float(np.median(batch_var)), batch_var)


def oracle_surfaces(problem: LossProblem) -> Tuple[Callable, Callable]:
    """Exact mu and pi as surfaces over the feature matrix"""
    return (
        lambda features: problem.exact_from_features(features)[0],
        lambda features: problem.exact_from_features(features)[1],
    )


def _evaluate_blocks(surface: Surface, features: np.ndarray, threads: Optional[int]) -> np.ndarray:
    starts = list(range(0, features.shape[0], _EVAL_BLOCK))
    parts = map_ordered(lambda lo: predict(surface, features[lo:lo + _EVAL_BLOCK]), starts, threads)
    return np.concatenate(parts) if parts else np.empty(0)


def _check_surface(surface: Surface, problem: LossProblem) -> None:
    if isinstance(surface, SurfaceModel) and surface.dimension != problem.feature_dimension:
        raise DimensionMismatch(
            f"fitted surface takes {surface.dimension} inputs, the problem has {problem.feature_dimension}"
        )


def _report(
    result: BatchingResult,
    method: EstimatorMethod,
    coupling: Coupling,
    config: EstimatorConfig,
    allocation: BudgetAllocation,
    timings: Dict[str, float],
    family: Optional[SmootherFamily] = None,
    hyperparameters: Optional[Dict[str, Dict[str, Any]]] = None,
) -> EstimateReport:
    logger.info(
        f"{method.value} estimate: CoVaR={result.covar:.6g}, VaR={result.var_hat:.6g} "
        f"(k={allocation.k}, h={allocation.h}, l={allocation.l}, m={allocation.m}, n={allocation.n})"
    )
    return EstimateReport(
        covar_hat=result.covar,
        var_hat=result.var_hat,
        method=method,
        coupling=coupling,
        family=family,
        alpha=config.alpha,
        beta=config.beta,
        seed=config.seed,
        allocation=allocation,
        timings=PhaseTimings(**timings),
        hyperparameters=hyperparameters or {},
        batch_var_sd=float(np.std(result.batch_var)),
        concomitants=result.concomitants.tolist() if config.keep_concomitants else None,
    )


@dataclass
class StageOneFit:
    surface_x: SurfaceModel
    surface_y: SurfaceModel
    hyperparameters: Dict[str, Dict[str, Any]]
    t_sim1: float
    t_tune: float
    t_fit: float
    features: np.ndarray


def fit_stage_one(
    problem: LossProblem,
    scenario_count: int,
    inner_count: int,
    family: SmootherFamily,
    smoothing: SmoothingConfig,
    seed: int,
    threads: Optional[int] = None,
) -> StageOneFit:
    """Two-level simulation on stage-1 scenarios, then tune and fit mu and pi surfaces"""
    began = time.monotonic()
    scenarios = problem.outer(scenario_count, seed, Stream.STAGE1_OUTER, threads=threads)
    x_bar, y_bar = problem.inner_means(scenarios, inner_count, seed, threads=threads)
    features = scenarios.features()
    t_sim1 = recorded_elapsed(began)
    logger.info(f"Stage 1 simulation: {scenario_count} x {inner_count} in {time.monotonic() - began:.2f}s")

    knots = problem.hinge_knots()
    surface_x, hp_x, tune_x, fit_x = select_and_fit(TrainingSet.from_arrays(features, x_bar), family, smoothing, knots, threads)
    surface_y, hp_y, tune_y, fit_y = select_and_fit(TrainingSet.from_arrays(features, y_bar), family, smoothing, knots, threads)
    logger.info(f"Stage 1 {SmootherFamily(family).value}: tuning {tune_x + tune_y:.2f}s, fitting {fit_x + fit_y:.2f}s")

    return StageOneFit(
        surface_x=surface_x,
        surface_y=surface_y,
        hyperparameters={"x": hp_x, "y": hp_y},
        t_sim1=t_sim1,
        t_tune=0.0 if settings.DETERMINISTIC_OUTPUT else tune_x + tune_y,
        t_fit=0.0 if settings.DETERMINISTIC_OUTPUT else fit_x + fit_y,
        features=features,
    )


def batching_exact_covar(
    problem: LossProblem,
    config: EstimatorConfig,
    allocation: BudgetAllocation,
    threads: Optional[int] = None,
) -> EstimateReport:
    """Batching on exact losses of n fresh stage-2 scenarios"""
    return decoupled_covar(
        problem, config, allocation, SmoothingConfig(), fitted=oracle_surfaces(problem), threads=threads,
        method=EstimatorMethod.BATCHING,
    )


def naive_sns_covar(
    problem: LossProblem,
    config: EstimatorConfig,
    allocation: BudgetAllocation,
    threads: Optional[int] = None,
    exact_inner: bool = False,
) -> EstimateReport:
    """
    Nested simulation: n = k*h scenarios with l inner paths each, sample means into batching.

    exact_inner swaps the sample means for the exact conditional losses.
    """
    began = time.monotonic()
    scenarios = problem.outer(allocation.n, config.seed, Stream.STAGE1_OUTER, threads=threads)
    if exact_inner:
        x_bar, y_bar = problem.exact_losses(scenarios)
    else:
        x_bar, y_bar = problem.inner_means(scenarios, allocation.l, config.seed, threads=threads)
    t_sim1 = recorded_elapsed(began)

    began = time.monotonic()
    result = batching_covar(x_bar, y_bar, allocation.k, allocation.h, config.alpha, config.beta)
    timings = {"t_sim1": t_sim1, "t_estimate": recorded_elapsed(began)}
    return _report(result, EstimatorMethod.SNS, Coupling.COUPLED, config, allocation, timings)


def naive_smoothed_covar(
    problem: LossProblem,
    config: EstimatorConfig,
    allocation: BudgetAllocation,
    family: SmootherFamily,
    smoothing: SmoothingConfig,
    threads: Optional[int] = None,
) -> EstimateReport:
    """Surfaces fitted on the n = k*h nested scenarios and evaluated back on them"""
    stage = fit_stage_one(problem, allocation.n, allocation.l, family, smoothing, config.seed, threads)

    began = time.monotonic()
    mu = _evaluate_blocks(stage.surface_x, stage.features, threads)
    pi = _evaluate_blocks(stage.surface_y, stage.features, threads)
    result = batching_covar(mu, pi, allocation.k, allocation.h, config.alpha, config.beta)
    timings = {"t_sim1": stage.t_sim1, "t_tune": stage.t_tune, "t_fit": stage.t_fit, "t_estimate": recorded_elapsed(began)}
    return _report(result, EstimatorMethod.COUPLED, Coupling.COUPLED, config, allocation, timings,
                   SmootherFamily(family), stage.hyperparameters)


def decoupled_covar(
    problem: LossProblem,
    config: EstimatorConfig,
    allocation: BudgetAllocation,
    smoothing: SmoothingConfig,
    family: Optional[SmootherFamily] = None,
    fitted: Optional[Sequence[Surface]] = None,
    threads: Optional[int] = None,
    method: EstimatorMethod = EstimatorMethod.DECOUPLED,
) -> EstimateReport:
    """
    Two-stage estimator.

    Stage 1 (skipped when `fitted` holds the mu and pi surfaces): m scenarios
    with l inner paths, tune and fit. Stage 2: n fresh scenarios on a stream
    disjoint from stage 1, evaluated through the surfaces, then batching.
    """
    timings: Dict[str, float] = {}
    hyperparameters: Dict[str, Dict[str, Any]] = {}
    if fitted is None:
        if family is None:
            raise DomainError("decoupled estimation needs a smoother family or pre-fitted surfaces")
        stage = fit_stage_one(problem, allocation.m, allocation.l, family, smoothing, config.seed, threads)
        surface_x, surface_y = stage.surface_x, stage.surface_y
        hyperparameters = stage.hyperparameters
        timings.update(t_sim1=stage.t_sim1, t_tune=stage.t_tune, t_fit=stage.t_fit)
    else:
        surface_x, surface_y = fitted
        for surface in (surface_x, surface_y):
            _check_surface(surface, problem)
        if family is None and isinstance(surface_x, SurfaceModel):
            family = surface_x.family
        if isinstance(surface_x, SurfaceModel):
            hyperparameters = {"x": surface_x.hyperparameters, "y": surface_y.hyperparameters}

    began = time.monotonic()
    scenarios = problem.outer(allocation.n, config.seed, Stream.STAGE2_OUTER, threads=threads)
    features = scenarios.features()
    timings["t_sim2"] = recorded_elapsed(began)
    logger.info(f"Stage 2 simulation: {allocation.n} scenarios in {time.monotonic() - began:.2f}s")

    began = time.monotonic()
    mu = _evaluate_blocks(surface_x, features, threads)
    pi = _evaluate_blocks(surface_y, features, threads)
    result = batching_covar(mu, pi, allocation.k, allocation.h, config.alpha, config.beta)
    timings["t_estimate"] = recorded_elapsed(began)

    coupling = Coupling.EXACT if method is EstimatorMethod.BATCHING else Coupling.DECOUPLED
    return _report(result, method, coupling, config, allocation, timings,
                   SmootherFamily(family) if family is not None else None, hyperparameters)


def run_estimator(
    problem: LossProblem,
    method: EstimatorMethod,
    config: EstimatorConfig,
    allocation: BudgetAllocation,
    smoothing: SmoothingConfig,
    family: Optional[SmootherFamily] = None,
    fitted: Optional[Sequence[Surface]] = None,
    threads: Optional[int] = None,
) -> EstimateReport:
    method = EstimatorMethod(method)
    if method is EstimatorMethod.BATCHING:
        return batching_exact_covar(problem, config, allocation, threads)
    if method is EstimatorMethod.SNS:
        return naive_sns_covar(problem, config, allocation, threads)
    if family is None and fitted is None:
        raise DomainError(f"{method.value} estimation needs a smoother family")
    if method is EstimatorMethod.COUPLED:
        return naive_smoothed_covar(problem, config, allocation, family, smoothing, threads)
    return decoupled_covar(problem, config, allocation, smoothing, family, fitted, threads)
