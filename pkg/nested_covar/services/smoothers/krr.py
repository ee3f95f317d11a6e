# nested_covar/services/smoothers/krr.py
"""Kernel ridge regression: f(z) = k_z' (K + m lambda I)^{-1} X."""
import logging
import math
import time
from typing import Callable, Dict

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist
from scipy.special import gamma as gamma_fn, kv

from ...config import settings
from ...errors import DomainError, FactorizationFailure
from ...models.surface import SmootherFamily, SurfaceModel, TrainingSet
from ...utils.timing import recorded_elapsed

logger = logging.getLogger(__name__)


def _gaussian(distance: np.ndarray, length_scale: float, nu: float) -> np.ndarray:
    return np.exp(-0.5 * (distance / length_scale) ** 2)


def _matern(distance: np.ndarray, length_scale: float, nu: float) -> np.ndarray:
    r = distance / length_scale
    if nu == 0.5:
        return np.exp(-r)
    if nu == 1.5:
        a = math.sqrt(3.0) * r
        return (1.0 + a) * np.exp(-a)
    if nu == 2.5:
        a = math.sqrt(5.0) * r
        return (1.0 + a + a * a / 3.0) * np.exp(-a)
    a = math.sqrt(2.0 * nu) * r
    with np.errstate(invalid="ignore"):
        values = (2.0 ** (1.0 - nu) / gamma_fn(nu)) * a ** nu * kv(nu, a)
    return np.where(a == 0, 1.0, np.nan_to_num(values, nan=0.0))


KERNELS: Dict[str, Callable[[np.ndarray, float, float], np.ndarray]] = {
    "gaussian": _gaussian,
    "matern": _matern,
}


def kernel_matrix(a: np.ndarray, b: np.ndarray, kernel: str, length_scale: float, nu: float = 2.5) -> np.ndarray:
    if kernel not in KERNELS:
        raise DomainError(f"unknown kernel {kernel!r}; expected one of {sorted(KERNELS)}")
    return KERNELS[kernel](cdist(a, b, "euclidean"), length_scale, nu)


def fit_krr(
    data: TrainingSet,
    kernel: str = "gaussian",
    lam: float = 1e-3,
    length_scale: float = 1.0,
    nu: float = 2.5,
    center_targets: bool = False,
) -> SurfaceModel:
    """
    Dual weights from a Cholesky factorization of (K + m lambda I).

    Args:
        data: Training set; the kernel acts on standardized inputs
        kernel: "gaussian" or "matern"
        lam: Ridge penalty lambda > 0
        length_scale: Kernel length scale in standardized units
        nu: Matern smoothness
        center_targets: Regress target deviations from their mean so that
            a large penalty shrinks towards the mean instead of zero. Off
            by default, where one sample fits to x / (1 + lambda)

    Raises:
        DomainError: lam <= 0 or more rows than settings.KRR_MAX_SAMPLES
        FactorizationFailure: the regularized kernel matrix is not numerically positive definite
    """
    began = time.monotonic()
    if not lam > 0:
        raise DomainError(f"lambda must be strictly positive, got {lam}")
    m = data.size
    if m > settings.KRR_MAX_SAMPLES:
        raise DomainError(f"KRR training size {m} exceeds the cap KRR_MAX_SAMPLES={settings.KRR_MAX_SAMPLES}")

    inputs = data.standardized_inputs()
    offset = float(data.targets.mean()) if center_targets else 0.0
    gram = kernel_matrix(inputs, inputs, kernel, length_scale, nu)
    gram[np.diag_indices_from(gram)] += m * lam

    try:
        factor = linalg.cho_factor(gram, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise FactorizationFailure(f"K + m*lambda*I is not positive definite at lambda={lam:g}: {e}") from e
    weights = linalg.cho_solve(factor, data.targets - offset)
    if not np.all(np.isfinite(weights)):
        raise FactorizationFailure(f"dual weights are not finite at lambda={lam:g}")

    logger.debug(f"KRR fit: m={m}, kernel={kernel}, lambda={lam:g}, length_scale={length_scale:g} "
                 f"in {time.monotonic() - began:.3f}s")
    return SurfaceModel(
        family=SmootherFamily.KRR,
        parameters={"inputs": inputs, "weights": weights, "offset": np.array([offset])},
        hyperparameters={
            "kernel": kernel,
            "lam": float(lam),
            "length_scale": float(length_scale),
            "nu": float(nu),
            "center_targets": bool(center_targets),
        },
        standardization=data.standardization,
        metadata={"sample_size": m, "fit_seconds": recorded_elapsed(began)},
    )


def evaluate_krr(model: SurfaceModel, points: np.ndarray) -> np.ndarray:
    hp = model.hyperparameters
    inputs = model.parameters["inputs"]
    weights = model.parameters["weights"]
    offset = float(model.parameters["offset"][0])
    standardized = model.standardization.apply(points)

    out = np.empty(points.shape[0])
    step = settings.EVAL_CHUNK_ROWS
    for lo in range(0, points.shape[0], step):
        k_z = kernel_matrix(standardized[lo:lo + step], inputs, hp["kernel"], hp["length_scale"], hp["nu"])
        out[lo:lo + step] = (k_z * weights).sum(axis=1) + offset
    return out
