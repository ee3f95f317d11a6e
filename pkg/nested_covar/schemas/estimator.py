import math
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..config import settings
from ..models.estimation import BudgetStrategy, Coupling, EstimatorMethod
from ..models.surface import SmootherFamily


class EstimatorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha: float = Field(0.95, gt=0, lt=1)
    beta: float = Field(0.95, gt=0, lt=1)
    k: Optional[int] = Field(None, ge=1)
    h: Optional[int] = Field(None, ge=1)
    m: Optional[int] = Field(None, ge=1)
    l: Optional[int] = Field(None, ge=1)
    n: Optional[int] = Field(None, ge=1)
    seed: int = Field(0, ge=0)
    method: EstimatorMethod = EstimatorMethod.DECOUPLED
    keep_concomitants: bool = False

    @model_validator(mode="after")
    def check_batch_shape(self):
        if self.k is not None and self.h is not None and self.n is not None and self.k * self.h != self.n:
            raise ValueError(f"k*h = {self.k * self.h} does not equal n = {self.n}")
        return self


class BudgetConstants(BaseModel):
    """
    Constants of the allocation rules.

    c targets sqrt(k)/h, c1 and c2 scale l and h in the nested rule; l fixes
    the inner count for the smoothing rules; k, h or n pin the batch shape;
    rate_exponent enables the n >= m^(3r) stage-2 sizing rule.
    """

    model_config = ConfigDict(extra="forbid")

    c: float = Field(1.0, gt=0)
    c1: float = Field(1.0, gt=0)
    c2: float = Field(1.0, gt=0)
    l: Optional[int] = Field(None, ge=1)
    k: Optional[int] = Field(None, ge=1)
    h: Optional[int] = Field(None, ge=1)
    n: Optional[int] = Field(None, ge=1)
    rate_exponent: Optional[float] = Field(None, gt=0)


class BudgetSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gamma: int = Field(10_000, ge=1)
    strategy: Optional[BudgetStrategy] = None
    constants: BudgetConstants = Field(default_factory=BudgetConstants)


class BudgetAllocation(BaseModel):
    gamma: int
    strategy: BudgetStrategy
    k: int
    h: int
    l: int
    m: int
    n: int
    constants: BudgetConstants
    exponents: Dict[str, float] = Field(default_factory=dict)

    @property
    def batch_ratio(self) -> float:
        """sqrt(k) / h"""
        return math.sqrt(self.k) / self.h


class PhaseTimings(BaseModel):
    """Wall-clock seconds per stage: simulation, tuning and fitting (stage 1), simulation and estimation (stage 2)"""

    t_sim1: float = Field(0.0, ge=0)
    t_tune: float = Field(0.0, ge=0)
    t_fit: float = Field(0.0, ge=0)
    t_sim2: float = Field(0.0, ge=0)
    t_estimate: float = Field(0.0, ge=0)

    @property
    def total(self) -> float:
        return self.t_sim1 + self.t_tune + self.t_fit + self.t_sim2 + self.t_estimate


class EstimateReport(BaseModel):
    covar_hat: float
    var_hat: float
    method: EstimatorMethod
    coupling: Coupling
    family: Optional[SmootherFamily] = None
    alpha: float
    beta: float
    seed: int
    scenario_block: int = Field(default_factory=lambda: settings.SCENARIO_BLOCK)
    allocation: BudgetAllocation
    timings: PhaseTimings = Field(default_factory=PhaseTimings)
    hyperparameters: Dict[str, Dict[str, Any]] = Field(default_factory=dict)
    batch_var_sd: Optional[float] = None
    concomitants: Optional[List[float]] = None

    @field_validator("covar_hat")
    @classmethod
    def validate_finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("covar_hat must be finite")
        return v
