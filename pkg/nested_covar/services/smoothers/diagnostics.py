# nested_covar/services/smoothers/diagnostics.py
from typing import Callable, Optional, Tuple, Union
import logging

import numpy as np

from ...errors import DomainError
from ...models.surface import SurfaceModel
from ..rng import Stream
from .evaluate import evaluate

logger = logging.getLogger(__name__)

Surface = Union[SurfaceModel, Callable[[np.ndarray], np.ndarray]]


def predict(surface: Surface, points: np.ndarray) -> np.ndarray:
    if isinstance(surface, SurfaceModel):
        return evaluate(surface, points)
    return np.asarray(surface(points), dtype=float)


def sup_error(
    model: Surface,
    oracle: Callable[[np.ndarray], np.ndarray],
    probe: Callable[[int], np.ndarray],
    count: int,
) -> Tuple[float, float]:
    """
    Max and root-mean-square absolute error over `count` probe points.

    With probe drawing fresh scenarios, the max is a Monte Carlo stand-in
    for the essential sup under the scenario law.
    """
    if count < 1:
        raise DomainError(f"probe count must be at least 1, got {count}")
    points = np.atleast_2d(np.asarray(probe(count), dtype=float))
    error = np.abs(predict(model, points) - np.asarray(oracle(points), dtype=float))
    sup, rms = float(error.max()), float(np.sqrt(np.mean(error ** 2)))
    logger.debug(f"Surface error over {count} probes: sup={sup:.4e}, rms={rms:.4e}")
    return sup, rms


def scenario_probe(problem, seed: int, threads: Optional[int] = None) -> Callable[[int], np.ndarray]:
    """Probe drawing fresh outer scenarios of `problem` on their own stream"""

    def draw(count: int) -> np.ndarray:
        return problem.outer(count, seed, Stream.PROBE, threads=threads).features()

    return draw
