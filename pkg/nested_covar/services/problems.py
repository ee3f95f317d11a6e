# nested_covar/services/problems.py
"""
Loss problems: what the estimators need to know about a pair of portfolios.

A problem draws outer scenarios on a named stream, produces averaged inner
losses (X_bar, Y_bar) for them, and, when closed forms exist, the exact
conditional losses (mu(z), pi(z)).
"""
from dataclasses import dataclass
from typing import List, Optional, Protocol, Tuple
import logging
import math

import numpy as np
from scipy.stats import norm

from ..config import settings
from ..errors import DomainError
from ..models.market import MarketModel, ScenarioBatch
from ..models.portfolio import PortfolioSpec
from .market_sim import market_from_config, simulate_inner_summaries, simulate_outer
from .payoffs import build_portfolio, closed_form_losses, inner_losses
from .rng import Stream, generator
from .workers import map_ordered

logger = logging.getLogger(__name__)


class LossProblem(Protocol):
    name: str

    @property
    def feature_dimension(self) -> int: ...

    def outer(self, count: int, seed: int, stream: int, start: int = 0, threads: Optional[int] = None): ...

    def inner_means(self, scenarios, count: int, seed: int, threads: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]: ...

    def exact_from_features(self, features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]: ...

    def exact_losses(self, scenarios) -> Tuple[np.ndarray, np.ndarray]: ...

    def hinge_knots(self) -> List[Tuple[int, float]]: ...


class PortfolioProblem:
    """Two derivative portfolios X and Y on one GBM market, sharing inner paths"""

    name = "portfolio"

    def __init__(self, model: MarketModel, portfolio_x: PortfolioSpec, portfolio_y: PortfolioSpec, bridge: bool = True):
        if portfolio_x.q != model.q or portfolio_y.q != model.q:
            raise DomainError("portfolio asset count differs from the market's")
        self.model = model
        self.portfolio_x = portfolio_x
        self.portfolio_y = portfolio_y
        self.bridge = bridge

    @property
    def feature_dimension(self) -> int:
        return self.model.feature_dimension

    def outer(self, count: int, seed: int, stream: int, start: int = 0, threads: Optional[int] = None) -> ScenarioBatch:
        return simulate_outer(self.model, count, seed, stream=stream, start=start, threads=threads)

    def inner_means(self, scenarios: ScenarioBatch, count: int, seed: int, threads: Optional[int] = None):
        summary = simulate_inner_summaries(
            self.model, scenarios, count, seed, stream=Stream.STAGE1_INNER, bridge=self.bridge, threads=threads
        )
        x = inner_losses(self.portfolio_x, self.model, scenarios, summary)
        y = inner_losses(self.portfolio_y, self.model, scenarios, summary)
        return x.mean(axis=1), y.mean(axis=1)

    def exact_from_features(self, features: np.ndarray):
        q = self.model.q
        s_tau, run_max, geo = features[:, :q], features[:, q:2 * q], features[:, 2 * q:]
        mu = closed_form_losses(self.portfolio_x, self.model, s_tau, run_max, geo)
        pi = closed_form_losses(self.portfolio_y, self.model, s_tau, run_max, geo)
        return mu, pi

    def exact_losses(self, scenarios: ScenarioBatch):
        return self.exact_from_features(scenarios.features())

    def hinge_knots(self) -> List[Tuple[int, float]]:
        """(s_tau column, strike) pairs for the payoff-aware regression basis"""
        knots = []
        for i in range(self.model.q):
            strikes = {
                float(p.k_asian[i]) for p in (self.portfolio_x, self.portfolio_y) if p.weights[1] != 0
            } | {
                float(p.k_barrier[i]) for p in (self.portfolio_x, self.portfolio_y) if p.weights[2] != 0
            }
            knots.extend((i, k) for k in sorted(strikes))
        return knots


@dataclass(frozen=True, eq=False)
class ToyScenarios:
    """Outer draws of the Gaussian problem: z = (mu, pi) values themselves"""

    z: np.ndarray
    ids: np.ndarray

    def __len__(self) -> int:
        return self.z.shape[0]

    def __getitem__(self, index: slice) -> "ToyScenarios":
        return ToyScenarios(self.z[index], self.ids[index])

    def features(self) -> np.ndarray:
        return self.z


class GaussianToyProblem:
    """
    mu(Z) = Z1, pi(Z) = Z2 with (Z1, Z2) standard bivariate normal of correlation rho.

    Inner observations add independent N(0, noise_sd^2) noise, so the
    average of l of them is exact plus N(0, noise_sd^2 / l).
    """

    name = "gaussian_toy"

    def __init__(self, rho: float = 0.5, noise_sd: float = 1.0):
        if not -1.0 < rho < 1.0:
            raise DomainError(f"rho must lie in (-1, 1), got {rho}")
        self.rho = rho
        self.noise_sd = noise_sd

    @property
    def feature_dimension(self) -> int:
        return 2

    def analytic_covar(self, alpha: float, beta: float) -> float:
        return self.rho * norm.ppf(alpha) + math.sqrt(1.0 - self.rho ** 2) * norm.ppf(beta)

    def _blocks(self, count: int, seed: int, stream: int, start: int, draw, threads: Optional[int]) -> np.ndarray:
        size = settings.SCENARIO_BLOCK

        def run_block(block: int) -> np.ndarray:
            values = draw(generator(seed, stream, block))
            lo = max(start - block * size, 0)
            hi = min(start + count - block * size, size)
            return values[lo:hi]

        blocks = list(range(start // size, (start + count - 1) // size + 1))
        return np.concatenate(map_ordered(run_block, blocks, threads))

    def outer(self, count: int, seed: int, stream: int, start: int = 0, threads: Optional[int] = None) -> ToyScenarios:
        size = settings.SCENARIO_BLOCK
        rho, tail = self.rho, math.sqrt(1.0 - self.rho ** 2)

        def draw(gen):
            e = gen.standard_normal((size, 2))
            return np.column_stack((e[:, 0], rho * e[:, 0] + tail * e[:, 1]))

        z = self._blocks(count, seed, int(stream), start, draw, threads)
        return ToyScenarios(z, np.arange(start, start + count))

    def inner_means(self, scenarios: ToyScenarios, count: int, seed: int, threads: Optional[int] = None):
        size = settings.SCENARIO_BLOCK
        scale = self.noise_sd / math.sqrt(count)
        start = int(scenarios.ids[0]) if len(scenarios) else 0
        if len(scenarios) and not np.array_equal(scenarios.ids, np.arange(start, start + len(scenarios))):
            raise DomainError("toy scenarios must carry consecutive ids")
        noise = self._blocks(
            len(scenarios), seed, int(Stream.STAGE1_INNER), start,
            lambda gen: gen.standard_normal((size, 2)), threads,
        )
        return scenarios.z[:, 0] + scale * noise[:, 0], scenarios.z[:, 1] + scale * noise[:, 1]

    def exact_from_features(self, features: np.ndarray):
        return features[:, 0].copy(), features[:, 1].copy()

    def exact_losses(self, scenarios: ToyScenarios):
        return self.exact_from_features(scenarios.features())

    def hinge_knots(self) -> List[Tuple[int, float]]:
        return []


def problem_from_plan(plan, bridge: bool = True):
    """Instantiate the loss problem a validated PlanConfig describes"""
    if plan.problem == "gaussian_toy":
        logger.info(f"Gaussian toy problem: rho={plan.toy.rho}, noise_sd={plan.toy.noise_sd}")
        return GaussianToyProblem(plan.toy.rho, plan.toy.noise_sd)

    model = market_from_config(plan.market)
    portfolio_x = build_portfolio(plan.portfolio_x, model, "portfolio_x")
    portfolio_y = build_portfolio(plan.portfolio_y, model, "portfolio_y")
    logger.info(f"Portfolio problem: q={model.q}, M={model.steps}, tau_index={model.tau_index}")
    return PortfolioProblem(model, portfolio_x, portfolio_y, bridge=bridge)
