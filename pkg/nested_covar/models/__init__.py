from .market import (
    MarketModel,
    RiskFactorVector,
    SeedLineage,
    PathBundle,
    ScenarioBatch,
    InnerSummary,
)
from .portfolio import PortfolioSpec, HestonParams
from .surface import SmootherFamily, Standardization, TrainingSet, SurfaceModel
from .estimation import BudgetStrategy, EstimatorMethod, Coupling, RowStatus

__all__ = [
    "MarketModel",
    "RiskFactorVector",
    "SeedLineage",
    "PathBundle",
    "ScenarioBatch",
    "InnerSummary",
    "PortfolioSpec",
    "HestonParams",
    "SmootherFamily",
    "Standardization",
    "TrainingSet",
    "SurfaceModel",
    "BudgetStrategy",
    "EstimatorMethod",
    "Coupling",
    "RowStatus",
]
