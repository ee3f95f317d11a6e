# nested_covar/services/smoothers/evaluate.py
"""Family registry: fit from a hyperparameter dict, evaluate any SurfaceModel."""
from typing import Any, Callable, Dict, Mapping
import logging

import numpy as np

from ...errors import DimensionMismatch, DomainError
from ...models.surface import SmootherFamily, SurfaceModel, TrainingSet
from .kernel import bandwidth_rule, evaluate_kernel_smoother, fit_kernel_smoother
from .krr import evaluate_krr, fit_krr
from .linear import BasisSpec, evaluate_linear, fit_linear
from .mlp import evaluate_mlp, fit_mlp

logger = logging.getLogger(__name__)

EVALUATORS: Dict[SmootherFamily, Callable[[SurfaceModel, np.ndarray], np.ndarray]] = {
    SmootherFamily.LINEAR_REGRESSION: evaluate_linear,
    SmootherFamily.KERNEL_SMOOTHING: evaluate_kernel_smoother,
    SmootherFamily.KRR: evaluate_krr,
    SmootherFamily.MLP: evaluate_mlp,
}


def fit_surface(data: TrainingSet, family: SmootherFamily, hyperparameters: Mapping[str, Any]) -> SurfaceModel:
    """
    Fit one family from a flat hyperparameter dict.

    linear: {"basis": BasisSpec dict}; kernel: {"bandwidth"} or
    {"bandwidth_constant"} (scaled by m^(-1/(4+d))); krr: fit_krr keywords;
    mlp: fit_mlp keywords.
    """
    family = SmootherFamily(family)
    hp = dict(hyperparameters)
    if family is SmootherFamily.LINEAR_REGRESSION:
        return fit_linear(data, BasisSpec.from_dict(hp["basis"]))
    if family is SmootherFamily.KERNEL_SMOOTHING:
        if "bandwidth" in hp:
            bandwidth = float(hp["bandwidth"])
        else:
            bandwidth = bandwidth_rule(float(hp["bandwidth_constant"]), data.size, data.dimension)
        return fit_kernel_smoother(data, bandwidth)
    if family is SmootherFamily.KRR:
        return fit_krr(data, **hp)
    if family is SmootherFamily.MLP:
        return fit_mlp(data, **hp)
    raise DomainError(f"unknown smoother family {family}")


def evaluate(model: SurfaceModel, points) -> np.ndarray:
    """
    Evaluate a fitted surface at n x d points.

    Outputs do not depend on how the points are split across calls.

    Raises:
        DimensionMismatch: points have a different width than the training inputs
    """
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return np.empty(0)
    points = np.atleast_2d(points)
    if points.shape[1] != model.dimension:
        raise DimensionMismatch(f"model expects {model.dimension} inputs, got {points.shape[1]}")
    return EVALUATORS[model.family](model, points)
