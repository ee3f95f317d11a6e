from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .estimator import BudgetSection, EstimatorConfig
from .experiment import ExperimentConfig, ReferenceConfig
from .market import MarketConfig
from .portfolio import PortfolioConfig
from .smoothing import SmoothingConfig


class ToyConfig(BaseModel):
    """Bivariate Gaussian problem: mu(z) = z1, pi(z) = z2 with corr(z1, z2) = rho"""

    model_config = ConfigDict(extra="forbid")

    rho: float = Field(0.5, gt=-1, lt=1)
    noise_sd: float = Field(1.0, ge=0)


class PlanConfig(BaseModel):
    """Root of a key-value plan file"""

    model_config = ConfigDict(extra="forbid")

    problem: Literal["portfolio", "gaussian_toy"] = "portfolio"
    seed: int = Field(0, ge=0)
    market: Optional[MarketConfig] = None
    portfolio_x: Optional[PortfolioConfig] = None
    portfolio_y: Optional[PortfolioConfig] = None
    toy: ToyConfig = Field(default_factory=ToyConfig)
    estimator: EstimatorConfig = Field(default_factory=EstimatorConfig)
    budget: BudgetSection = Field(default_factory=BudgetSection)
    smoothing: SmoothingConfig = Field(default_factory=SmoothingConfig)
    experiment: ExperimentConfig = Field(default_factory=ExperimentConfig)
    reference: ReferenceConfig = Field(default_factory=ReferenceConfig)

    @model_validator(mode="after")
    def check_problem_sections(self):
        if self.problem == "portfolio":
            missing = [name for name in ("market", "portfolio_x", "portfolio_y") if getattr(self, name) is None]
            if missing:
                raise ValueError(f"portfolio problem requires sections: {', '.join(missing)}")
        return self
