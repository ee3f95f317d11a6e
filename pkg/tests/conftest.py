import numpy as np
import pytest

from nested_covar.config import settings
from nested_covar.schemas.market import MarketConfig
from nested_covar.schemas.portfolio import PortfolioConfig
from nested_covar.services.market_sim import market_from_config
from nested_covar.services.payoffs import build_portfolio
from nested_covar.services.problems import GaussianToyProblem, PortfolioProblem

TOY_COVAR = 2.2469


@pytest.fixture(autouse=True)
def restore_settings(monkeypatch):
    """CLI flags mutate the shared settings object; undo that after every test"""
    for name in ("DETERMINISTIC_OUTPUT", "THREADS", "KRR_MAX_SAMPLES", "SCENARIO_BLOCK"):
        monkeypatch.setattr(settings, name, getattr(settings, name))


@pytest.fixture
def deterministic(monkeypatch):
    monkeypatch.setattr(settings, "DETERMINISTIC_OUTPUT", True)


@pytest.fixture
def market_config():
    return MarketConfig(
        q=2, s0=100.0, r_f=0.05, maturity=1.0, steps=10, tau_index=2,
        drift=[0.08, 0.06], vols=[0.2, 0.25], correlation=0.3,
    )


@pytest.fixture
def market(market_config):
    return market_from_config(market_config)


@pytest.fixture
def single_market():
    return market_from_config(MarketConfig(
        q=1, s0=100.0, r_f=0.05, maturity=1.0, steps=10, tau_index=2, drift=0.08, vols=0.2,
    ))


@pytest.fixture
def portfolio_x(market):
    return build_portfolio(PortfolioConfig(weights=[2, 1, -1]), market, "portfolio_x")


@pytest.fixture
def portfolio_y(market):
    return build_portfolio(PortfolioConfig(weights=[2, -1, 3]), market, "portfolio_y")


@pytest.fixture
def portfolio_problem(market, portfolio_x, portfolio_y):
    return PortfolioProblem(market, portfolio_x, portfolio_y)


@pytest.fixture
def toy_problem():
    return GaussianToyProblem(rho=0.5, noise_sd=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_plan(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def toy_plan(tmp_path):
    return write_plan(tmp_path / "toy.env", [
        "PROBLEM=gaussian_toy",
        "SEED=4",
        "TOY__RHO=0.5",
        "ESTIMATOR__ALPHA=0.95",
        "ESTIMATOR__BETA=0.95",
        "BUDGET__GAMMA=20000",
        "SMOOTHING__FAMILY=linear",
        "SMOOTHING__TUNE=false",
        "EXPERIMENT__REPLICATIONS=3",
        "EXPERIMENT__SEED=8",
        f"EXPERIMENT__OUTPUT_DIR={tmp_path / 'results'}",
        "EXPERIMENT__ROWS='[{\"method\": \"batching\", \"gamma\": 10000, \"k\": 100, \"h\": 100}]'",
    ])


@pytest.fixture
def portfolio_plan(tmp_path):
    return write_plan(tmp_path / "portfolio.env", [
        "PROBLEM=portfolio",
        "SEED=2",
        "MARKET__Q=2",
        "MARKET__STEPS=10",
        "MARKET__TAU_INDEX=2",
        "MARKET__DRIFT=[0.08, 0.06]",
        "MARKET__VOLS=[0.2, 0.25]",
        "MARKET__CORRELATION=0.3",
        "PORTFOLIO_X__WEIGHTS=[2, 1, -1]",
        "PORTFOLIO_Y__WEIGHTS=[2, -1, 3]",
        "BUDGET__GAMMA=5000",
        "BUDGET__CONSTANTS={\"l\": 5, \"k\": 40, \"h\": 25}",
        "SMOOTHING__FAMILY=linear",
        "SMOOTHING__TUNE=false",
    ])
