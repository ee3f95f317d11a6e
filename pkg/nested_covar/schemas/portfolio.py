from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field


class AssetOverride(BaseModel):
    model_config = ConfigDict(extra="forbid")

    asset: int = Field(..., ge=0)
    k_asian: Optional[float] = Field(None, gt=0)
    k_barrier: Optional[float] = Field(None, gt=0)
    barrier: Optional[float] = Field(None, gt=0)


class PortfolioConfig(BaseModel):
    """Weights (stock, geometric Asian, up-and-out barrier); scalars broadcast to all assets"""

    model_config = ConfigDict(extra="forbid")

    weights: List[float] = Field(..., min_length=3, max_length=3)
    k_asian: Union[float, List[float]] = 105.0
    k_barrier: Union[float, List[float]] = 105.0
    barrier: Union[float, List[float]] = 120.0
    overrides: List[AssetOverride] = Field(default_factory=list)
