# nested_covar/services/harness.py
"""
Replicated estimation studies.

compute_reference pins down the true CoVaR by streaming batching on exact
losses; run_experiment replicates every estimator row of a plan against it
and reports relative bias, SD and RMSE; rate_analysis fits the log-log
slope of r-RMSE along a budget ladder.
"""
import logging
import math
import time
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ..errors import CovarError, DomainError, InsufficientPoints, PrecisionUnreachable
from ..models.estimation import BudgetStrategy, EstimatorMethod, RowStatus
from ..schemas.estimator import BudgetAllocation
from ..schemas.experiment import EstimatorRow, MetricRow, ReferenceConfig, ReferenceResult
from ..schemas.plan import PlanConfig
from .budget import allocate_budget, batch_shape
from .estimators import StreamingBatcher, run_estimator
from .problems import GaussianToyProblem, LossProblem
from .rng import Stream, derive_seed
from .workers import map_ordered

logger = logging.getLogger(__name__)

# Scenarios per streamed reference block, rounded down to whole batches
_REFERENCE_BLOCK = 1 << 16

_DEFAULT_STRATEGY = {
    EstimatorMethod.BATCHING: BudgetStrategy.DECOUPLED,
    EstimatorMethod.SNS: BudgetStrategy.SNS_OPT,
    EstimatorMethod.COUPLED: BudgetStrategy.SMOOTH_FIXED_L,
    EstimatorMethod.DECOUPLED: BudgetStrategy.DECOUPLED,
}


def streamed_batching(
    problem: LossProblem,
    k: int,
    h: int,
    alpha: float,
    beta: float,
    seed: int,
    stream: int = Stream.REFERENCE,
    threads: Optional[int] = None,
) -> float:
    """Batching on exact losses of k*h scenarios without holding them all in memory"""
    block = max(_REFERENCE_BLOCK // h, 1) * h
    starts = list(range(0, k * h, block))

    def run_block(start: int):
        scenarios = problem.outer(min(block, k * h - start), seed, stream, start=start, threads=1)
        mu, pi = problem.exact_losses(scenarios)
        batcher = StreamingBatcher(h, alpha)
        batcher.push(mu, pi)
        return batcher

    merged = StreamingBatcher(h, alpha)
    for part in map_ordered(run_block, starts, threads):
        merged.merge(part)
    return merged.result(beta).covar


def compute_reference(
    problem: LossProblem,
    reference: ReferenceConfig,
    alpha: float,
    beta: float,
    threads: Optional[int] = None,
) -> ReferenceResult:
    """
    Ground-truth CoVaR from exact losses.

    Starting at reference.start_n scenarios, run reference.replications
    independent streamed batching estimates and grow n by reference.growth
    until the 95% half-width of their mean is below precision * |mean|.

    Raises:
        PrecisionUnreachable: the target is not met by reference.max_n
    """
    n = reference.start_n
    last: Optional[ReferenceResult] = None
    while n <= reference.max_n:
        if reference.k is not None and reference.h is not None:
            k, h = reference.k, reference.h
        elif reference.h is not None:
            k, h = max(n // reference.h, 1), reference.h
        else:
            k, h = batch_shape(n, reference.c)

        began = time.monotonic()
        estimates = [
            streamed_batching(problem, k, h, alpha, beta, derive_seed(reference.seed, Stream.REFERENCE, r), threads=threads)
            for r in range(reference.replications)
        ]
        mean = math.fsum(estimates) / len(estimates)
        spread = float(np.std(estimates, ddof=1))
        half_width = 1.96 * spread / math.sqrt(len(estimates))
        last = ReferenceResult(
            theta=mean, half_width=half_width, spread=spread, n=k * h, k=k, h=h,
            replications=reference.replications, estimates=estimates,
        )
        logger.info(
            f"Reference at n={k * h} (k={k}, h={h}): theta={mean:.6g}, half-width={half_width:.3g} "
            f"({time.monotonic() - began:.1f}s)"
        )
        if half_width < reference.precision * abs(mean):
            return last
        n *= reference.growth

    logger.error(f"Reference precision {reference.precision} unreachable within n <= {reference.max_n}")
    raise PrecisionUnreachable(
        f"relative half-width {last.relative_half_width:.3g} at n={last.n} is above {reference.precision}"
        if last else f"start_n {reference.start_n} exceeds max_n {reference.max_n}"
    )


def resolve_theta(plan: PlanConfig, problem: LossProblem, threads: Optional[int] = None) -> float:
    """Configured theta, else the analytic toy value, else a computed reference"""
    if plan.reference.theta is not None:
        return plan.reference.theta
    if isinstance(problem, GaussianToyProblem):
        return problem.analytic_covar(plan.estimator.alpha, plan.estimator.beta)
    return compute_reference(problem, plan.reference, plan.estimator.alpha, plan.estimator.beta, threads).theta


def row_allocation(row: EstimatorRow, plan: PlanConfig) -> BudgetAllocation:
    """
    Budget allocation of one estimator row.

    Row-level l, k, h and n override the plan's budget constants. Batching
    on exact losses spends no inner paths, so its gamma is the scenario count.
    """
    pinned = {name: getattr(row, name) for name in ("l", "k", "h", "n") if getattr(row, name) is not None}
    if row.method is EstimatorMethod.BATCHING and "n" not in pinned and not ("k" in pinned and "h" in pinned):
        pinned["n"] = row.gamma
    constants = plan.budget.constants.model_copy(update=pinned)
    strategy = row.strategy or _DEFAULT_STRATEGY[row.method]
    return allocate_budget(row.gamma, strategy, constants)


def _metrics(estimates: Sequence[float], theta: float) -> Tuple[float, float, float]:
    """Signed relative bias, population relative SD and relative RMSE"""
    values = np.asarray(estimates, dtype=float)
    scale = abs(theta)
    r_bias = (float(values.mean()) - theta) / theta
    r_sd = float(values.std()) / scale
    r_rmse = math.sqrt(float(np.mean((values - theta) ** 2))) / scale
    return r_bias, r_sd, r_rmse


def run_row(
    row: EstimatorRow,
    plan: PlanConfig,
    problem: LossProblem,
    theta: float,
    threads: Optional[int] = None,
) -> MetricRow:
    """Replicate one estimator row; failures are recorded on the returned row"""
    experiment = plan.experiment
    metric = MetricRow(
        key=row.key, method=row.method, gamma=row.gamma,
        family=row.family.value if row.family else "none", replications=experiment.replications,
        status=RowStatus.PROCESSING,
    )
    try:
        allocation = row_allocation(row, plan)
        metric = metric.model_copy(update={"m": allocation.m, "l": allocation.l, "k": allocation.k, "h": allocation.h})

        def replicate(r: int):
            config = plan.estimator.model_copy(update={
                "seed": derive_seed(experiment.seed, Stream.REPLICATION, row.key, r),
                "method": row.method,
                "keep_concomitants": False,
            })
            return run_estimator(problem, row.method, config, allocation, plan.smoothing, family=row.family, threads=1)

        began = time.monotonic()
        reports = map_ordered(replicate, list(range(experiment.replications)), threads)
        r_bias, r_sd, r_rmse = _metrics([report.covar_hat for report in reports], theta)
        phases = {
            name: math.fsum(getattr(report.timings, name) for report in reports) / len(reports)
            for name in ("t_sim1", "t_tune", "t_fit", "t_sim2", "t_estimate")
        }
        logger.info(
            f"Row {row.key}: r-bias={r_bias:.4g}, r-SD={r_sd:.4g}, r-RMSE={r_rmse:.4g} "
            f"over {len(reports)} replications ({time.monotonic() - began:.1f}s)"
        )
        return metric.model_copy(update={
            "coupling": reports[0].coupling, "r_bias": r_bias, "r_sd": r_sd, "r_rmse": r_rmse,
            "status": RowStatus.COMPLETED, **phases,
        })
    except (CovarError, ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
        logger.error(f"Row {row.key} failed: {e}")
        return metric.model_copy(update={"status": RowStatus.FAILED, "error": f"{type(e).__name__}: {e}"})


def run_experiment(
    plan: PlanConfig,
    problem: LossProblem,
    theta: float,
    writer=None,
    threads: Optional[int] = None,
) -> List[MetricRow]:
    """
    Run every estimator row of the plan, in plan order.

    Each completed row is handed to `writer` as soon as it finishes; failed
    rows come back with status FAILED and are not written.

    Raises:
        DomainError: theta is zero or not finite
    """
    if not math.isfinite(theta) or theta == 0:
        raise DomainError(f"reference theta must be finite and non-zero, got {theta}")

    rows = plan.experiment.all_rows()
    logger.info(f"Experiment: {len(rows)} rows x {plan.experiment.replications} replications, theta={theta:.6g}")
    results = []
    for row in rows:
        metric = run_row(row, plan, problem, theta, threads)
        results.append(metric)
        if writer is not None and metric.status is RowStatus.COMPLETED:
            writer.write(metric)
    failed = sum(1 for metric in results if metric.status is RowStatus.FAILED)
    if failed:
        logger.warning(f"{failed} of {len(results)} experiment rows failed")
    return results


class RateFit(NamedTuple):
    slope: float
    stderr: float
    intercept: float
    points: int


def rate_analysis(rows: Sequence[MetricRow], against: str = "gamma") -> RateFit:
    """
    OLS slope of log r-RMSE against log gamma (or log n with against="n").

    Raises:
        InsufficientPoints: fewer than 3 usable rows
    """
    if against == "n":
        xs = [row.k * row.h for row in rows]
    else:
        xs = [row.gamma for row in rows]
    points = [
        (math.log(x), math.log(row.r_rmse))
        for x, row in zip(xs, rows)
        if x > 0 and math.isfinite(row.r_rmse) and row.r_rmse > 0
    ]
    if len(points) < 3 or len({x for x, _ in points}) < 2:
        raise InsufficientPoints(f"rate analysis needs at least 3 ladder points, got {len(points)}")
    fit = stats.linregress([x for x, _ in points], [y for _, y in points])
    return RateFit(float(fit.slope), float(fit.stderr), float(fit.intercept), len(points))


def ladder_slopes(rows: Sequence[MetricRow]) -> Dict[str, RateFit]:
    """Rate fits for every (method, family) group spanning at least 3 budgets"""
    groups: Dict[str, List[MetricRow]] = {}
    for row in rows:
        if row.status is RowStatus.COMPLETED:
            groups.setdefault(f"{row.method.value}/{row.family}", []).append(row)
    slopes = {}
    for label, members in groups.items():
        if len({row.gamma for row in members}) >= 3:
            slopes[label] = rate_analysis(sorted(members, key=lambda row: row.gamma))
    return slopes
