# nested_covar/services/smoothers/tuning.py
"""
K-fold cross-validated hyperparameter search.

Candidates are enumerated in a fixed order (the order of the grid lists,
outer list first) and folds come from a shuffled KFold seeded per run, so the
score table is reproducible. Exact score ties go to the smaller lambda, the
larger bandwidth and the smaller width, in that order of precedence per family.
"""
import logging
import math
import time
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.model_selection import KFold

from ...errors import BudgetExhausted, CovarError, DomainError
from ...models.surface import SmootherFamily, SurfaceModel, TrainingSet
from ...schemas.smoothing import HyperparameterGrid, SmoothingConfig
from ..rng import Stream, generator
from ..workers import map_ordered
from .evaluate import evaluate, fit_surface
from .kernel import bandwidth_rule
from .linear import BasisSpec

logger = logging.getLogger(__name__)

Knots = Sequence[Tuple[int, float]]


def candidates(
    family: SmootherFamily,
    grid: HyperparameterGrid,
    smoothing: Optional[SmoothingConfig] = None,
    knots: Knots = (),
) -> List[Dict[str, Any]]:
    smoothing = smoothing or SmoothingConfig()
    family = SmootherFamily(family)
    if family is SmootherFamily.LINEAR_REGRESSION:
        return [{"basis": BasisSpec.with_hinges(b.degree, knots if b.hinges else ()).to_dict()} for b in grid.bases]
    if family is SmootherFamily.KERNEL_SMOOTHING:
        return [{"bandwidth_constant": c} for c in grid.bandwidth_constants]
    if family is SmootherFamily.KRR:
        return [
            {
                "kernel": kernel,
                "length_scale": length_scale,
                "lam": lam,
                "nu": smoothing.krr.nu,
                "center_targets": smoothing.krr.center_targets,
            }
            for kernel in grid.kernels
            for length_scale in grid.length_scales
            for lam in grid.lambdas
        ]
    base = smoothing.mlp.model_dump()
    return [{**base, "width": width, "learning_rate": lr} for width in grid.widths for lr in grid.learning_rates]


def _tie_key(family: SmootherFamily, hp: Dict[str, Any]) -> tuple:
    if family is SmootherFamily.KRR:
        return (hp["lam"], -hp["length_scale"])
    if family is SmootherFamily.KERNEL_SMOOTHING:
        return (-hp["bandwidth_constant"],)
    if family is SmootherFamily.MLP:
        return (hp["width"], hp["learning_rate"])
    return ()


def fold_assignment(size: int, folds: int, seed: int) -> np.ndarray:
    """Fold index of every row; fold sizes differ by at most one"""
    if folds > size:
        raise DomainError(f"{folds}-fold cross-validation needs at least {folds} samples, got {size}")
    shuffle_seed = int(generator(seed, Stream.TUNING, "folds", size).integers(2 ** 32))
    splitter = KFold(n_splits=folds, shuffle=True, random_state=shuffle_seed)
    assignment = np.empty(size, dtype=np.int64)
    for fold, (_, held_out) in enumerate(splitter.split(np.empty((size, 1)))):
        assignment[held_out] = fold
    return assignment


def cv_score(
    data: TrainingSet,
    family: SmootherFamily,
    hyperparameters: Dict[str, Any],
    assignment: np.ndarray,
    threads: Optional[int] = None,
) -> float:
    """Pooled out-of-fold mean squared error"""
    folds = int(assignment.max()) + 1

    def run_fold(fold: int) -> float:
        held_out = assignment == fold
        model = fit_surface(data.subset(~held_out), family, hyperparameters)
        residual = evaluate(model, data.inputs[held_out]) - data.targets[held_out]
        return float(np.sum(residual ** 2))

    return math.fsum(map_ordered(run_fold, list(range(folds)), threads)) / data.size


def tune(
    data: TrainingSet,
    family: SmootherFamily,
    grid: HyperparameterGrid,
    smoothing: Optional[SmoothingConfig] = None,
    knots: Knots = (),
    threads: Optional[int] = None,
) -> Tuple[Dict[str, Any], List[Dict[str, Any]]]:
    """
    Pick the candidate with the lowest K-fold CV mean squared error.

    Returns:
        (best hyperparameters, score table in evaluation order)

    Raises:
        BudgetExhausted: grid.budget_seconds elapsed with candidates left;
            carries the best candidate so far and the partial table
    """
    family = SmootherFamily(family)
    pool = candidates(family, grid, smoothing, knots)
    assignment = fold_assignment(data.size, grid.cv_folds, grid.seed)
    began = time.monotonic()
    table: List[Dict[str, Any]] = []
    last_error: Optional[CovarError] = None

    def best_so_far() -> Dict[str, Any]:
        ranked = min(table, key=lambda row: (row["cv_mse"], _tie_key(family, row["hyperparameters"]), row["index"]))
        return ranked["hyperparameters"]

    for index, hp in enumerate(pool):
        try:
            score = cv_score(data, family, hp, assignment, threads)
        except CovarError as e:
            logger.warning(f"Candidate {index} of {family.value} failed during CV: {e}")
            last_error = e
            score = math.inf
        table.append({"index": index, "hyperparameters": hp, "cv_mse": score})

        elapsed = time.monotonic() - began
        if grid.budget_seconds is not None and elapsed > grid.budget_seconds and index < len(pool) - 1:
            message = (f"tuning budget of {grid.budget_seconds:g}s exhausted after "
                       f"{index + 1} of {len(pool)} {family.value} candidates")
            logger.warning(message)
            raise BudgetExhausted(message, best_so_far(), table)

    if all(math.isinf(row["cv_mse"]) for row in table) and last_error is not None:
        raise last_error

    best = best_so_far()
    logger.info(f"Tuned {family.value} over {len(pool)} candidates in {time.monotonic() - began:.2f}s: {best}")
    return best, table


def default_hyperparameters(family: SmootherFamily, smoothing: SmoothingConfig, knots: Knots = ()) -> Dict[str, Any]:
    family = SmootherFamily(family)
    if family is SmootherFamily.LINEAR_REGRESSION:
        return {"basis": BasisSpec.with_hinges(smoothing.linear.degree, knots if smoothing.linear.hinges else ()).to_dict()}
    if family is SmootherFamily.KERNEL_SMOOTHING:
        return {"bandwidth": float(smoothing.kernel.bandwidth)}
    if family is SmootherFamily.KRR:
        return smoothing.krr.model_dump()
    return smoothing.mlp.model_dump()


def select_and_fit(
    data: TrainingSet,
    family: SmootherFamily,
    smoothing: SmoothingConfig,
    knots: Knots = (),
    threads: Optional[int] = None,
) -> Tuple[SurfaceModel, Dict[str, Any], float, float]:
    """
    Tune if configured (kernel smoothing with an automatic bandwidth always
    tunes its constant), then fit on the whole training set.

    Returns:
        (model, hyperparameters used, tuning seconds, fitting seconds)
    """
    family = SmootherFamily(family)
    auto_bandwidth = family is SmootherFamily.KERNEL_SMOOTHING and smoothing.kernel.bandwidth == "auto"
    began = time.monotonic()
    if smoothing.tune or auto_bandwidth:
        try:
            hyperparameters, _ = tune(data, family, smoothing.grid, smoothing, knots, threads)
        except BudgetExhausted as e:
            hyperparameters = e.best
    else:
        hyperparameters = default_hyperparameters(family, smoothing, knots)
    tuned = time.monotonic()

    if family is SmootherFamily.KERNEL_SMOOTHING and "bandwidth_constant" in hyperparameters:
        hyperparameters = {
            "bandwidth": bandwidth_rule(hyperparameters["bandwidth_constant"], data.size, data.dimension)
        }
    model = fit_surface(data, family, hyperparameters)
    return model, hyperparameters, tuned - began, time.monotonic() - tuned
