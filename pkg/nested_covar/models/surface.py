from dataclasses import dataclass, field
from typing import Any, Dict, Mapping
import enum

import numpy as np
from sklearn.preprocessing import StandardScaler

from ..errors import DimensionMismatch, DomainError
from ..utils.validators import validate_finite


class SmootherFamily(str, enum.Enum):
    LINEAR_REGRESSION = "linear"
    KERNEL_SMOOTHING = "kernel"
    KRR = "krr"
    MLP = "mlp"


@dataclass(frozen=True, eq=False)
class Standardization:
    """Per-column affine map z -> (z - location) / scale; constant columns keep scale 1"""

    location: np.ndarray
    scale: np.ndarray
    constant: np.ndarray

    @classmethod
    def fit(cls, inputs: np.ndarray) -> "Standardization":
        scaler = StandardScaler().fit(inputs)
        location = scaler.mean_
        constant = np.sqrt(scaler.var_) <= 1e-12 * np.maximum(np.abs(location), 1.0)
        scale = np.where(constant, 1.0, scaler.scale_)
        return cls(location, scale, constant)

    @property
    def dimension(self) -> int:
        return self.location.shape[0]

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (points - self.location) / self.scale


@dataclass(frozen=True, eq=False)
class TrainingSet:
    inputs: np.ndarray
    targets: np.ndarray
    standardization: Standardization

    @classmethod
    def from_arrays(cls, inputs, targets) -> "TrainingSet":
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        targets = np.asarray(targets, dtype=float).ravel()
        if inputs.shape[0] != targets.shape[0]:
            raise DimensionMismatch(f"{inputs.shape[0]} inputs but {targets.shape[0]} targets")
        if inputs.shape[0] == 0:
            raise DomainError("training set is empty")
        for array, name in ((inputs, "training inputs"), (targets, "training targets")):
            is_valid, message = validate_finite(array, name)
            if not is_valid:
                raise DomainError(message)
        return cls(inputs, targets, Standardization.fit(inputs))

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def dimension(self) -> int:
        return self.inputs.shape[1]

    def standardized_inputs(self) -> np.ndarray:
        return self.standardization.apply(self.inputs)

    def subset(self, index: np.ndarray) -> "TrainingSet":
        """Rows `index`, re-standardized on the subset"""
        return TrainingSet.from_arrays(self.inputs[index], self.targets[index])


@dataclass(frozen=True, eq=False)
class SurfaceModel:
    """
    A fitted approximation of z -> E[loss | Z = z].

    parameters holds only numpy arrays (the persisted payload);
    hyperparameters and metadata must be JSON-serialisable.
    """

    family: SmootherFamily
    parameters: Mapping[str, np.ndarray]
    hyperparameters: Dict[str, Any]
    standardization: Standardization
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.standardization.dimension

    @property
    def sample_size(self) -> int:
        return int(self.metadata.get("sample_size", 0))
