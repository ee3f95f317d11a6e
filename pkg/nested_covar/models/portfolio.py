from dataclasses import dataclass

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True, eq=False)
class PortfolioSpec:
    """
    Stocks, geometric Asian calls and up-and-out barrier calls on every asset.

    weights = (w1, w2, w3); v0_legs holds the weighted time-0 value of each
    leg so that v0 = v0_legs.sum().
    """

    name: str
    weights: np.ndarray
    k_asian: np.ndarray
    k_barrier: np.ndarray
    barrier: np.ndarray
    v0_legs: np.ndarray

    def __post_init__(self):
        for attr in ("weights", "k_asian", "k_barrier", "barrier", "v0_legs"):
            value = np.array(getattr(self, attr), dtype=float, copy=True)
            value.setflags(write=False)
            object.__setattr__(self, attr, value)

        if self.weights.shape != (3,):
            raise DomainError(f"portfolio {self.name}: weights must be a triple")
        if np.any(self.k_asian <= 0) or np.any(self.k_barrier <= 0) or np.any(self.barrier <= 0):
            raise DomainError(f"portfolio {self.name}: strikes and barriers must be strictly positive")
        if not (self.k_asian.shape == self.k_barrier.shape == self.barrier.shape):
            raise DomainError(f"portfolio {self.name}: per-asset arrays differ in length")

    @property
    def v0(self) -> float:
        return float(self.v0_legs.sum())

    @property
    def q(self) -> int:
        return self.k_asian.shape[0]


@dataclass(frozen=True)
class HestonParams:
    kappa: float
    theta: float
    sigma_v: float
    rho: float
    v0: float
    lambda_h: float = 0.0

    def __post_init__(self):
        if min(self.kappa, self.theta, self.sigma_v, self.v0) <= 0:
            raise DomainError("Heston kappa, theta, sigma_v and v0 must be strictly positive")
        if not -1.0 < self.rho < 1.0:
            raise DomainError(f"Heston rho must satisfy |rho| < 1, got {self.rho}")
