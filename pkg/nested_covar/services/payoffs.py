# nested_covar/services/payoffs.py
"""
Portfolio values at the risk horizon and the resulting losses V0 - V_tau.

A portfolio holds w1 of every stock, w2 of a geometric Asian call and w3 of
an up-and-out barrier call on every asset. V0 comes from the closed forms at
inception, never from simulation.
"""
import logging
import math
from typing import Sequence

import numpy as np

from ..errors import ConfigError, DomainError, MismatchedScenario, ShapeMismatch
from ..models.market import InnerSummary, MarketModel, PathBundle, RiskFactorVector, ScenarioBatch
from ..models.portfolio import PortfolioSpec
from ..schemas.portfolio import PortfolioConfig
from .pricing import geometric_asian_prices, barrier_uoc_prices

logger = logging.getLogger(__name__)


def _per_asset(value, q: int, field: str, name: str) -> np.ndarray:
    array = np.atleast_1d(np.asarray(value, dtype=float))
    if array.shape == (1,):
        return np.full(q, array[0])
    if array.shape != (q,):
        raise ConfigError(f"{name}.{field} has {array.shape[0]} entries, expected {q}", f"{name.upper()}__{field.upper()}")
    return array.copy()


def initial_leg_values(model: MarketModel, weights, k_asian, k_barrier, barrier) -> np.ndarray:
    """Weighted time-0 value of the stock, Asian and barrier legs"""
    w1, w2, w3 = weights
    asian = geometric_asian_prices(model.s0, np.ones(model.q), k_asian, model, 0)
    knock = barrier_uoc_prices(model.s0, k_barrier, barrier, model.r_f, model.sigma_bar, model.maturity)
    return np.array([w1 * model.s0.sum(), w2 * asian.sum(), w3 * knock.sum()])


def build_portfolio(config: PortfolioConfig, model: MarketModel, name: str = "portfolio") -> PortfolioSpec:
    """
    Resolve a portfolio section against a market: broadcast strikes, apply overrides, price V0.

    Raises:
        ConfigError: per-asset list of the wrong length or override of a missing asset
        DomainError: a barrier at or below its initial price
    """
    q = model.q
    k_asian = _per_asset(config.k_asian, q, "k_asian", name)
    k_barrier = _per_asset(config.k_barrier, q, "k_barrier", name)
    barrier = _per_asset(config.barrier, q, "barrier", name)

    for override in config.overrides:
        if override.asset >= q:
            raise ConfigError(f"{name} override targets asset {override.asset} but q = {q}", f"{name.upper()}__OVERRIDES")
        for field, target in (("k_asian", k_asian), ("k_barrier", k_barrier), ("barrier", barrier)):
            value = getattr(override, field)
            if value is not None:
                target[override.asset] = value

    if config.weights[2] != 0 and np.any(barrier <= model.s0):
        index = int(np.argmax(barrier <= model.s0))
        raise DomainError(f"{name}: barrier of asset {index} ({barrier[index]}) must exceed s0 ({model.s0[index]})")

    legs = initial_leg_values(model, config.weights, k_asian, k_barrier, barrier)
    logger.info(f"Portfolio {name}: V0 = {legs.sum():.6f} (stock {legs[0]:.4f}, asian {legs[1]:.4f}, barrier {legs[2]:.4f})")
    return PortfolioSpec(name, config.weights, k_asian, k_barrier, barrier, legs)


def _values_on_paths(portfolio: PortfolioSpec, model: MarketModel, s_tau, terminal, bridge_max, geo_mean) -> np.ndarray:
    """V_tau estimate per path; s_tau (..., q) broadcasts against path arrays (..., l, q)"""
    w1, w2, w3 = portfolio.weights
    disc = math.exp(-model.r_f * (model.maturity - model.tau))
    value = w1 * s_tau.sum(axis=-1)
    if w2 != 0:
        value = value + w2 * disc * np.maximum(geo_mean - portfolio.k_asian, 0.0).sum(axis=-1)
    if w3 != 0:
        alive = bridge_max <= portfolio.barrier
        value = value + w3 * disc * (np.maximum(terminal - portfolio.k_barrier, 0.0) * alive).sum(axis=-1)
    return value


def inner_losses(portfolio: PortfolioSpec, model: MarketModel, scenarios: ScenarioBatch, summary: InnerSummary) -> np.ndarray:
    """(n, l) discounted losses from batched inner summaries"""
    if summary.shape[0] != len(scenarios) or summary.shape[2] != model.q:
        raise ShapeMismatch(f"inner summary {summary.shape} does not match {len(scenarios)} scenarios of {model.q} assets")
    values = _values_on_paths(
        portfolio, model, scenarios.s_tau[:, None, :], summary.terminal, summary.bridge_max, summary.geo_mean
    )
    return portfolio.v0 - values


def discounted_losses(
    portfolio: PortfolioSpec,
    model: MarketModel,
    z: RiskFactorVector,
    bundles: Sequence[PathBundle],
) -> np.ndarray:
    """
    Loss V0 - V_tau on each inner path of one scenario.

    Raises:
        MismatchedScenario: a bundle was not simulated from z
    """
    parent = z.fingerprint()
    for bundle in bundles:
        if bundle.seed_lineage.parent != parent:
            raise MismatchedScenario(
                f"path {bundle.seed_lineage.path_index} of scenario {bundle.seed_lineage.scenario_id} "
                f"was not simulated from the given risk factors"
            )
    if not bundles:
        return np.empty(0)

    terminal = np.stack([b.terminal for b in bundles])
    maxima = np.stack([b.bridge_max for b in bundles])
    geo = np.stack([b.geo_mean for b in bundles])
    return portfolio.v0 - _values_on_paths(portfolio, model, z.s_tau[None, :], terminal, maxima, geo)


def closed_form_losses(portfolio: PortfolioSpec, model: MarketModel, s_tau, run_max, geo_partial) -> np.ndarray:
    """Exact conditional loss for arrays of scenarios shaped (n, q)"""
    w1, w2, w3 = portfolio.weights
    value = w1 * s_tau.sum(axis=-1)
    if w2 != 0:
        value = value + w2 * geometric_asian_prices(s_tau, geo_partial, portfolio.k_asian, model, model.tau_index).sum(axis=-1)
    if w3 != 0:
        alive = run_max <= portfolio.barrier
        knock = barrier_uoc_prices(
            s_tau, portfolio.k_barrier, portfolio.barrier, model.r_f, model.sigma_bar, model.maturity - model.tau
        )
        value = value + w3 * (knock * alive).sum(axis=-1)
    return portfolio.v0 - value


def closed_form_loss(portfolio: PortfolioSpec, model: MarketModel, z: RiskFactorVector) -> float:
    """mu(z) or pi(z): V0 - V_tau(z) assembled from the leg closed forms"""
    if z.q != model.q or portfolio.q != model.q:
        raise DomainError("scenario, portfolio and market disagree on the asset count")
    return float(closed_form_losses(portfolio, model, z.s_tau[None, :], z.run_max[None, :], z.geo_partial[None, :])[0])
