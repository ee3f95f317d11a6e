import math

import numpy as np
import pytest

from nested_covar.errors import ConfigError, DomainError, MismatchedScenario
from nested_covar.schemas.portfolio import PortfolioConfig
from nested_covar.services.market_sim import simulate_inner, simulate_outer
from nested_covar.services.payoffs import build_portfolio, closed_form_loss, discounted_losses
from nested_covar.services.pricing import barrier_uoc_price, geometric_asian_call_conditional


def test_v0_combines_closed_form_legs(market):
    portfolio = build_portfolio(PortfolioConfig(weights=[2, 1, -1]), market)
    asian = sum(
        geometric_asian_call_conditional(100.0, 100.0, market, 105.0, tau_index=0) for _ in range(market.q)
    )
    barrier = sum(
        barrier_uoc_price(100.0, 105.0, 120.0, market.r_f, float(sigma), market.maturity) for sigma in market.sigma_bar
    )
    assert portfolio.v0_legs[0] == pytest.approx(2 * 200.0)
    assert portfolio.v0 == pytest.approx(400.0 + asian - barrier, rel=1e-12)


def test_stock_only_portfolio_loss_is_exact(market):
    portfolio = build_portfolio(PortfolioConfig(weights=[1, 0, 0]), market)
    z = simulate_outer(market, 1, seed=1)[0]
    bundles = simulate_inner(market, z, 5, seed=1, scenario_id=0)
    losses = discounted_losses(portfolio, market, z, bundles)
    expected = 200.0 - z.s_tau.sum()
    np.testing.assert_allclose(losses, expected, rtol=1e-12)
    assert closed_form_loss(portfolio, market, z) == pytest.approx(expected, rel=1e-12)


def test_barrier_at_or_below_spot_rejected(market):
    with pytest.raises(DomainError, match="barrier"):
        build_portfolio(PortfolioConfig(weights=[0, 0, 1], barrier=100.0), market)


def test_barrier_ignored_without_barrier_leg(market):
    portfolio = build_portfolio(PortfolioConfig(weights=[1, 1, 0], barrier=90.0), market)
    assert portfolio.v0_legs[2] == 0.0


def test_per_asset_list_of_wrong_length(market):
    with pytest.raises(ConfigError) as info:
        build_portfolio(PortfolioConfig(weights=[1, 1, 1], k_asian=[100.0, 105.0, 110.0]), market, "portfolio_x")
    assert info.value.key == "PORTFOLIO_X__K_ASIAN"


def test_overrides_apply_per_asset(market):
    config = PortfolioConfig(weights=[1, 1, 1], overrides=[{"asset": 1, "barrier": 150.0, "k_asian": 95.0}])
    portfolio = build_portfolio(config, market)
    np.testing.assert_array_equal(portfolio.barrier, [120.0, 150.0])
    np.testing.assert_array_equal(portfolio.k_asian, [105.0, 95.0])


def test_override_of_missing_asset(market):
    with pytest.raises(ConfigError, match="asset 5"):
        build_portfolio(PortfolioConfig(weights=[1, 1, 1], overrides=[{"asset": 5, "barrier": 150.0}]), market)


def test_losses_reject_foreign_bundles(market, portfolio_x):
    scenarios = simulate_outer(market, 2, seed=3)
    bundles = simulate_inner(market, scenarios[1], 3, seed=3, scenario_id=1)
    with pytest.raises(MismatchedScenario):
        discounted_losses(portfolio_x, market, scenarios[0], bundles)


def test_losses_of_no_paths_are_empty(market, portfolio_x):
    z = simulate_outer(market, 1, seed=3)[0]
    assert discounted_losses(portfolio_x, market, z, []).shape == (0,)


def test_closed_form_loss_rejects_foreign_market(single_market, portfolio_x):
    z = simulate_outer(single_market, 1, seed=3)[0]
    with pytest.raises(DomainError):
        closed_form_loss(portfolio_x, single_market, z)


@pytest.mark.slow
@pytest.mark.parametrize("portfolio", ["portfolio_x", "portfolio_y"])
def test_inner_mean_converges_to_closed_form(market, portfolio, request):
    spec = request.getfixturevalue(portfolio)
    z = simulate_outer(market, 1, seed=11)[0]
    bundles = simulate_inner(market, z, 50_000, seed=11, scenario_id=0)
    losses = discounted_losses(spec, market, z, bundles)
    se = losses.std() / math.sqrt(losses.size)
    assert abs(losses.mean() - closed_form_loss(spec, market, z)) < 4 * se
