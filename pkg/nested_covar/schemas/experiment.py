from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..models.estimation import BudgetStrategy, Coupling, EstimatorMethod, RowStatus
from ..models.surface import SmootherFamily

# Emitted column order; CSV header and JSON keys
RESULT_COLUMNS = (
    "gamma", "m", "l", "k", "h", "family", "coupling",
    "r_bias", "r_sd", "r_rmse",
    "t_sim1", "t_tune", "t_fit", "t_sim2", "t_estimate",
)


class EstimatorRow(BaseModel):
    """One estimator configuration of a plan: method x family x budget"""

    model_config = ConfigDict(extra="forbid")

    method: EstimatorMethod
    gamma: int = Field(..., ge=1)
    family: Optional[SmootherFamily] = None
    strategy: Optional[BudgetStrategy] = None
    l: Optional[int] = Field(None, ge=1)
    k: Optional[int] = Field(None, ge=1)
    h: Optional[int] = Field(None, ge=1)
    n: Optional[int] = Field(None, ge=1)
    label: Optional[str] = None

    @model_validator(mode="after")
    def check_family(self):
        smoothed = self.method in (EstimatorMethod.COUPLED, EstimatorMethod.DECOUPLED)
        if smoothed and self.family is None:
            raise ValueError(f"{self.method.value} rows need a smoother family")
        if not smoothed and self.family is not None:
            raise ValueError(f"{self.method.value} rows take no smoother family")
        return self

    @property
    def key(self) -> str:
        """Seed-derivation key; depends only on the row's own content"""
        if self.label:
            return self.label
        family = self.family.value if self.family else "none"
        parts = [self.method.value, family, str(self.gamma)]
        for name in ("strategy", "l", "k", "h", "n"):
            value = getattr(self, name)
            if value is not None:
                parts.append(f"{name}={value.value if hasattr(value, 'value') else value}")
        return "/".join(parts)


class LadderConfig(BaseModel):
    """A budget ladder expands into one row per gamma"""

    model_config = ConfigDict(extra="forbid")

    method: EstimatorMethod
    family: Optional[SmootherFamily] = None
    gammas: List[int] = Field(..., min_length=1)
    strategy: Optional[BudgetStrategy] = None
    l: Optional[int] = Field(None, ge=1)

    def rows(self) -> List[EstimatorRow]:
        return [
            EstimatorRow(method=self.method, family=self.family, gamma=g, strategy=self.strategy, l=self.l)
            for g in self.gammas
        ]


class ReferenceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    theta: Optional[float] = None
    precision: float = Field(0.002, gt=0)
    replications: int = Field(10, ge=2)
    c: float = Field(1.0, gt=0)
    k: Optional[int] = Field(None, ge=1)
    h: Optional[int] = Field(None, ge=1)
    start_n: int = Field(250_000, ge=1)
    max_n: int = Field(64_000_000, ge=1)
    growth: int = Field(4, ge=2)
    seed: int = Field(0, ge=0)


class ReferenceResult(BaseModel):
    theta: float
    half_width: float
    spread: float
    n: int
    k: int
    h: int
    replications: int
    estimates: List[float]

    @property
    def relative_half_width(self) -> float:
        return self.half_width / abs(self.theta) if self.theta else float("inf")


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    replications: int = Field(40, ge=1)
    seed: int = Field(0, ge=0)
    rows: List[EstimatorRow] = Field(default_factory=list)
    ladders: List[LadderConfig] = Field(default_factory=list)
    output_dir: Optional[str] = None
    format: Literal["csv", "json"] = "csv"

    def all_rows(self) -> List[EstimatorRow]:
        expanded = list(self.rows)
        for ladder in self.ladders:
            expanded.extend(ladder.rows())
        return expanded


class MetricRow(BaseModel):
    key: str
    method: EstimatorMethod
    gamma: int
    m: int = 0
    l: int = 0
    k: int = 0
    h: int = 0
    family: str = "none"
    coupling: Coupling = Coupling.EXACT
    r_bias: float = float("nan")
    r_sd: float = float("nan")
    r_rmse: float = float("nan")
    t_sim1: float = 0.0
    t_tune: float = 0.0
    t_fit: float = 0.0
    t_sim2: float = 0.0
    t_estimate: float = 0.0
    replications: int = 0
    status: RowStatus = RowStatus.PENDING
    error: Optional[str] = None

    def columns(self) -> dict:
        values = self.model_dump(mode="json")
        return {name: values[name] for name in RESULT_COLUMNS}
