from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from ..models.surface import SmootherFamily

KernelName = Literal["gaussian", "matern"]


class BasisConfig(BaseModel):
    """Per-dimension powers 1..degree (no cross terms) plus optional payoff hinges on the s_tau block"""

    model_config = ConfigDict(extra="forbid")

    degree: int = Field(2, ge=0, le=6)
    hinges: bool = True


class KRRConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kernel: KernelName = "gaussian"
    length_scale: float = Field(1.0, gt=0)
    lam: float = Field(1e-3, gt=0)
    nu: float = Field(2.5, gt=0)
    center_targets: bool = False


class KernelSmoothingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bandwidth: Union[Literal["auto"], float] = "auto"


class MLPConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    layers: int = Field(2, ge=1)
    width: int = Field(64, ge=1)
    weight_bound: float = Field(10.0, gt=0)
    batch_size: int = Field(256, ge=1)
    epochs: int = Field(200, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    seed: int = Field(0, ge=0)


class HyperparameterGrid(BaseModel):
    """
    Candidate lists for cross-validated tuning.

    Candidates are evaluated in the order the lists are given (outer list
    first); a wall-clock budget truncates that order.
    """

    model_config = ConfigDict(extra="forbid")

    lambdas: List[float] = Field(default_factory=lambda: [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0], min_length=1)
    kernels: List[KernelName] = Field(default_factory=lambda: ["gaussian"], min_length=1)
    length_scales: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0], min_length=1)
    bandwidth_constants: List[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0], min_length=1)
    widths: List[int] = Field(default_factory=lambda: [16, 32, 64], min_length=1)
    learning_rates: List[float] = Field(default_factory=lambda: [1e-3, 3e-3], min_length=1)
    bases: List[BasisConfig] = Field(default_factory=lambda: [BasisConfig()], min_length=1)
    cv_folds: int = Field(5, ge=2)
    budget_seconds: Optional[float] = Field(None, gt=0)
    seed: int = Field(0, ge=0)


class SmoothingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: SmootherFamily = SmootherFamily.KRR
    tune: bool = True
    grid: HyperparameterGrid = Field(default_factory=HyperparameterGrid)
    linear: BasisConfig = Field(default_factory=BasisConfig)
    kernel: KernelSmoothingConfig = Field(default_factory=KernelSmoothingConfig)
    krr: KRRConfig = Field(default_factory=KRRConfig)
    mlp: MLPConfig = Field(default_factory=MLPConfig)
