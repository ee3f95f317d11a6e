from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

Broadcastable = Union[float, List[float]]


class GeneratorConfig(BaseModel):
    """
    Random drift/covariance generator for any q.

    Drifts and volatilities are uniform on their ranges; correlations come
    from a one-factor model rho_ij = b_i * b_j with loadings b_i uniform on
    [loading_low, loading_high], which is positive definite for loadings < 1.
    """

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(20240101, ge=0)
    drift_low: float = 0.0
    drift_high: float = 0.1
    vol_low: float = Field(0.1, gt=0)
    vol_high: float = Field(0.3, gt=0)
    loading_low: float = Field(0.0, ge=0, lt=1)
    loading_high: float = Field(0.6, ge=0, lt=1)

    @model_validator(mode="after")
    def check_ranges(self):
        if self.drift_low > self.drift_high or self.vol_low > self.vol_high or self.loading_low > self.loading_high:
            raise ValueError("generator ranges must satisfy low <= high")
        return self


class MarketConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    q: int = Field(1, ge=1)
    s0: Broadcastable = 100.0
    r_f: float = 0.05
    maturity: float = Field(1.0, gt=0)
    steps: int = Field(50, ge=2)
    tau_index: int = Field(2, ge=1)
    drift: Optional[Broadcastable] = None
    vols: Optional[Broadcastable] = None
    correlation: Optional[Union[float, List[List[float]]]] = None
    cov: Optional[List[List[float]]] = None
    generator: Optional[GeneratorConfig] = None

    @model_validator(mode="after")
    def check_consistency(self):
        if self.tau_index >= self.steps:
            raise ValueError(f"tau_index ({self.tau_index}) must be below steps ({self.steps})")
        if self.generator is None:
            if self.drift is None:
                raise ValueError("market needs either a drift or a generator section")
            if self.cov is None and self.vols is None:
                raise ValueError("market needs cov, vols or a generator section")
        return self
