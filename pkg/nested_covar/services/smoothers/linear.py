# nested_covar/services/smoothers/linear.py
"""
Least squares on a fixed basis, solved by column-pivoted QR.

Unlike the other smoothers, the basis is built on raw inputs rather than
standardized ones: hinge knots are strike levels in price units, and the
fitted coefficients read in the units of the data. Conditioning is handled
by equilibrating the design columns before the QR.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Sequence, Tuple
import logging
import time

import numpy as np
from scipy import linalg

from ...errors import DomainError, RankDeficient
from ...utils.timing import recorded_elapsed
from ...models.surface import SmootherFamily, SurfaceModel, TrainingSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BasisSpec:
    """
    Basis {1} + {z_i^p : p = 1..degree} + {(z_c - knot)^+ : hinges}.

    Evaluated on raw (unstandardized) inputs so coefficients read in the
    units of the data.
    """

    degree: int = 2
    hinge_columns: Tuple[int, ...] = field(default_factory=tuple)
    hinge_knots: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.degree < 0:
            raise DomainError(f"basis degree must be non-negative, got {self.degree}")
        if len(self.hinge_columns) != len(self.hinge_knots):
            raise DomainError("every hinge needs exactly one knot")

    @classmethod
    def with_hinges(cls, degree: int, knots: Sequence[Tuple[int, float]]) -> "BasisSpec":
        return cls(degree, tuple(int(c) for c, _ in knots), tuple(float(k) for _, k in knots))

    def size(self, dimension: int) -> int:
        return 1 + self.degree * dimension + len(self.hinge_columns)

    def design(self, points: np.ndarray) -> np.ndarray:
        columns = [np.ones(points.shape[0])]
        for power in range(1, self.degree + 1):
            columns.extend(points.T ** power)
        for column, knot in zip(self.hinge_columns, self.hinge_knots):
            columns.append(np.maximum(points[:, column] - knot, 0.0))
        return np.column_stack(columns)

    def to_dict(self) -> Dict[str, Any]:
        return {"degree": self.degree, "hinge_columns": list(self.hinge_columns), "hinge_knots": list(self.hinge_knots)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BasisSpec":
        return cls(int(data["degree"]), tuple(data.get("hinge_columns", ())), tuple(data.get("hinge_knots", ())))


def fit_linear(data: TrainingSet, basis: BasisSpec) -> SurfaceModel:
    """
    Ordinary least squares coefficients of the targets on the basis.

    Columns are equilibrated to unit norm, then factored with a
    column-pivoted QR; a diagonal entry of R below max(m, s) * eps * |R_00|
    marks the pivoted column as linearly dependent.

    Raises:
        DomainError: not more samples than basis functions
        RankDeficient: with the index of the first dependent basis column
    """
    began = time.monotonic()
    design = basis.design(data.inputs)
    m, s = design.shape
    if m <= s:
        raise DomainError(f"linear regression needs more samples ({m}) than basis functions ({s})")

    norms = np.linalg.norm(design, axis=0)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise RankDeficient(f"basis column {int(zero[0])} is identically zero", int(zero[0]))
    scaled = design / norms

    q, r, pivots = linalg.qr(scaled, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(r))
    tolerance = max(m, s) * np.finfo(float).eps * diagonal[0]
    dependent = np.flatnonzero(diagonal <= tolerance)
    if dependent.size:
        column = int(pivots[dependent[0]])
        raise RankDeficient(f"design matrix is rank deficient at basis column {column}", column)

    solution = linalg.solve_triangular(r, q.T @ data.targets)
    coefficients = np.empty(s)
    coefficients[pivots] = solution
    coefficients /= norms

    logger.debug(f"Linear fit: m={m}, basis size={s} in {time.monotonic() - began:.3f}s")
    return SurfaceModel(
        family=SmootherFamily.LINEAR_REGRESSION,
        parameters={"coefficients": coefficients},
        hyperparameters={"basis": basis.to_dict()},
        standardization=data.standardization,
        metadata={"sample_size": m, "fit_seconds": recorded_elapsed(began)},
    )


def evaluate_linear(model: SurfaceModel, points: np.ndarray) -> np.ndarray:
    basis = BasisSpec.from_dict(model.hyperparameters["basis"])
    return (basis.design(points) * model.parameters["coefficients"]).sum(axis=1)
