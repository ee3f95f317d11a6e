# nested_covar/services/smoothers/kernel.py
"""Nadaraya-Watson regression with a Gaussian kernel on standardized inputs."""
import logging
import time
import warnings

import numpy as np
from scipy.spatial.distance import cdist

from ...config import settings
from ...errors import DomainError, EmptyNeighborhood
from ...models.surface import SmootherFamily, SurfaceModel, TrainingSet
from ...utils.timing import recorded_elapsed

logger = logging.getLogger(__name__)

# exp(x) underflows to zero below this
_LOG_TINY = np.log(np.finfo(float).tiny)


def bandwidth_rule(constant: float, m: int, d: int) -> float:
    """h = c * m^(-1/(4+d))"""
    return constant * m ** (-1.0 / (4 + d))


def fit_kernel_smoother(data: TrainingSet, bandwidth: float) -> SurfaceModel:
    """
    Memory-based fit: keeps the standardized sample and the bandwidth.

    Automatic bandwidths are resolved by the caller (see tuning.select_and_fit).
    """
    began = time.monotonic()
    if data.size < 2:
        raise DomainError(f"kernel smoothing needs at least 2 samples, got {data.size}")
    if not bandwidth > 0:
        raise DomainError(f"bandwidth must be strictly positive, got {bandwidth}")

    return SurfaceModel(
        family=SmootherFamily.KERNEL_SMOOTHING,
        parameters={"inputs": data.standardized_inputs(), "targets": data.targets.copy()},
        hyperparameters={"bandwidth": float(bandwidth)},
        standardization=data.standardization,
        metadata={"sample_size": data.size, "fit_seconds": recorded_elapsed(began)},
    )


def evaluate_kernel_smoother(model: SurfaceModel, points: np.ndarray) -> np.ndarray:
    inputs = model.parameters["inputs"]
    targets = model.parameters["targets"]
    h = model.hyperparameters["bandwidth"]
    standardized = model.standardization.apply(points)

    out = np.empty(points.shape[0])
    step = settings.EVAL_CHUNK_ROWS
    empty = 0
    for lo in range(0, points.shape[0], step):
        log_w = -cdist(standardized[lo:lo + step], inputs, "sqeuclidean") / (2.0 * h * h)
        top = log_w.max(axis=1)
        weights = np.exp(log_w - top[:, None])
        values = (weights * targets).sum(axis=1) / weights.sum(axis=1)

        starved = top < _LOG_TINY
        if np.any(starved):
            empty += int(starved.sum())
            values[starved] = targets[np.argmax(log_w[starved], axis=1)]
        out[lo:lo + step] = values

    if empty:
        warnings.warn(
            f"{empty} evaluation point(s) had no kernel mass at bandwidth {h:g}; used the nearest sample",
            EmptyNeighborhood,
            stacklevel=2,
        )
    return out
