# Schemas module
from .market import GeneratorConfig, MarketConfig
from .portfolio import AssetOverride, PortfolioConfig
from .smoothing import (
    BasisConfig,
    HyperparameterGrid,
    KernelSmoothingConfig,
    KRRConfig,
    MLPConfig,
    SmoothingConfig
)
from .estimator import (
    BudgetAllocation,
    BudgetConstants,
    BudgetSection,
    EstimateReport,
    EstimatorConfig,
    PhaseTimings
)
from .experiment import (
    RESULT_COLUMNS,
    EstimatorRow,
    ExperimentConfig,
    LadderConfig,
    MetricRow,
    ReferenceConfig,
    ReferenceResult
)
from .plan import PlanConfig, ToyConfig

__all__ = [
    # Market and portfolio sections
    "GeneratorConfig",
    "MarketConfig",
    "AssetOverride",
    "PortfolioConfig",

    # Smoothing
    "BasisConfig",
    "HyperparameterGrid",
    "KernelSmoothingConfig",
    "KRRConfig",
    "MLPConfig",
    "SmoothingConfig",

    # Estimation
    "BudgetAllocation",
    "BudgetConstants",
    "BudgetSection",
    "EstimateReport",
    "EstimatorConfig",
    "PhaseTimings",

    # Experiments
    "RESULT_COLUMNS",
    "EstimatorRow",
    "ExperimentConfig",
    "LadderConfig",
    "MetricRow",
    "ReferenceConfig",
    "ReferenceResult",

    # Plan root
    "PlanConfig",
    "ToyConfig"
]
