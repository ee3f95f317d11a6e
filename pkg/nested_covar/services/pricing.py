# nested_covar/services/pricing.py
"""
Closed-form prices used as oracles and as ground-truth loss surfaces.

The scalar entry points validate their inputs; the *_prices helpers are
vectorised over numpy arrays and trust the caller.
"""
import logging
import math
import warnings
from typing import Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.stats import norm

from ..config import settings
from ..errors import DomainError, IntegrationFailure, KnockedOut
from ..models.market import MarketModel
from ..models.portfolio import HestonParams

logger = logging.getLogger(__name__)


def _require_positive(**values):
    for name, value in values.items():
        if not np.all(np.asarray(value, dtype=float) > 0):
            raise DomainError(f"{name} must be strictly positive, got {value}")


def _bs_call(s, k, r, sigma, ttm):
    vol = sigma * np.sqrt(ttm)
    d1 = (np.log(s / k) + (r + 0.5 * sigma ** 2) * ttm) / vol
    d2 = d1 - vol
    return s * norm.cdf(d1) - k * np.exp(-r * ttm) * norm.cdf(d2)


def bs_call_price(s: float, k: float, r: float, sigma: float, ttm: float) -> float:
    """
    Black-Scholes European call.

    Args:
        s: Spot
        k: Strike
        r: Continuously compounded rate
        sigma: Volatility
        ttm: Time to maturity; 0 gives the intrinsic value

    Returns:
        s N(d1) - k exp(-r ttm) N(d2)
    """
    _require_positive(s=s, k=k, sigma=sigma)
    if ttm < 0:
        raise DomainError(f"ttm must be non-negative, got {ttm}")
    if ttm == 0:
        return max(s - k, 0.0)
    return float(_bs_call(s, k, r, sigma, ttm))


def _uoc_call(s, k, b, r, sigma, ttm):
    """Up-and-out call for 0 < s < b and k < b; broadcast over arrays"""
    vol = sigma * np.sqrt(ttm)

    def delta(sign, ratio):
        return (np.log(ratio) + (r + sign * 0.5 * sigma ** 2) * ttm) / vol

    power = -2.0 * r / sigma ** 2
    reflection = s / b
    disc = np.exp(-r * ttm)
    mirrored = b ** 2 / (k * s)
    up = b / s

    return (
        s * (norm.cdf(delta(1, s / k)) - norm.cdf(delta(1, reflection)))
        - disc * k * (norm.cdf(delta(-1, s / k)) - norm.cdf(delta(-1, reflection)))
        - b * reflection ** power * (norm.cdf(delta(1, mirrored)) - norm.cdf(delta(1, up)))
        + disc * k * reflection ** (power + 1.0) * (norm.cdf(delta(-1, mirrored)) - norm.cdf(delta(-1, up)))
    )


def barrier_uoc_prices(s, k, b, r: float, sigma, ttm: float) -> np.ndarray:
    """Vectorised up-and-out call; 0 wherever s >= b or k >= b"""
    s, k, b, sigma = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s, k, b, sigma)))
    alive = (s < b) & (k < b)
    out = np.zeros(s.shape)
    if np.any(alive):
        out[alive] = _uoc_call(s[alive], k[alive], b[alive], r, sigma[alive], ttm)
    # rounding can leave tiny negatives near the barrier
    return np.maximum(out, 0.0)


def barrier_uoc_price(s: float, k: float, b: float, r: float, sigma: float, ttm: float) -> float:
    """
    Up-and-out barrier call under GBM.

    Raises:
        KnockedOut: s >= b; the option is worth KnockedOut.price (zero)
        DomainError: non-positive strike, volatility or maturity
    """
    _require_positive(k=k, b=b, sigma=sigma, ttm=ttm)
    if s <= 0:
        raise DomainError(f"s must be strictly positive, got {s}")
    if s >= b:
        raise KnockedOut(f"spot {s} is at or above the barrier {b}")
    return float(barrier_uoc_prices(s, k, b, r, sigma, ttm))


def _heston_integrand(phi, j: int, x: float, log_k: float, v0: float, r: float, ttm: float, params: HestonParams):
    sigma = params.sigma_v
    a = params.kappa * params.theta
    u = 0.5 if j == 1 else -0.5
    b = params.kappa + params.lambda_h - (params.rho * sigma if j == 1 else 0.0)

    iphi = 1j * phi
    beta = b - params.rho * sigma * iphi
    d = np.sqrt(beta ** 2 - sigma ** 2 * (2.0 * u * iphi - phi ** 2))
    g = (beta - d) / (beta + d)
    decay = np.exp(-d * ttm)
    big_c = r * iphi * ttm + a / sigma ** 2 * ((beta - d) * ttm - 2.0 * np.log((1.0 - g * decay) / (1.0 - g)))
    big_d = (beta - d) / sigma ** 2 * (1.0 - decay) / (1.0 - g * decay)
    f = np.exp(big_c + big_d * v0 + iphi * x)
    return np.real(np.exp(-iphi * log_k) * f / iphi)


def _integrate_tail(func, phi_max: float) -> float:
    tolerance = settings.HESTON_ABS_TOL
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            total, _ = integrate.quad(func, 0.0, phi_max, epsabs=tolerance, epsrel=0.0, limit=500)
            for _ in range(8):
                tail, _ = integrate.quad(func, phi_max, 2.0 * phi_max, epsabs=tolerance, epsrel=0.0, limit=500)
                total += tail
                phi_max *= 2.0
                if abs(tail) < 1e-10:
                    return total
        except integrate.IntegrationWarning as e:
            raise IntegrationFailure(f"Heston quadrature did not converge: {e}") from e
    raise IntegrationFailure(f"Heston integrand tail still above 1e-10 at phi = {phi_max:g}")


def heston_probabilities(s: float, params: HestonParams, k: float, r: float, ttm: float) -> Tuple[float, float]:
    """The exercise probabilities P1 (stock measure) and P2 (risk-neutral measure)"""
    _require_positive(s=s, k=k, ttm=ttm)
    x, log_k = math.log(s), math.log(k)
    probabilities = []
    for j in (1, 2):
        integral = _integrate_tail(
            lambda phi: _heston_integrand(phi, j, x, log_k, params.v0, r, ttm, params),
            settings.HESTON_PHI_MAX,
        )
        probabilities.append(0.5 + integral / math.pi)
    return probabilities[0], probabilities[1]


def heston_call_price(s: float, params: HestonParams, k: float, r: float, ttm: float) -> float:
    """European call under Heston stochastic volatility: s P1 - k exp(-r ttm) P2"""
    p1, p2 = heston_probabilities(s, params, k, r, ttm)
    logger.debug(f"Heston P1={p1:.10f} P2={p2:.10f}")
    return s * p1 - k * math.exp(-r * ttm) * p2


def _asian_moments(model: MarketModel, tau_index: int):
    """
    Remaining-fixing moments of the log geometric mean.

    Returns (origin, remaining offsets u_j, sum of u_j, sum_ij min(u_i, u_j)).
    """
    origin = float(model.grid[tau_index - 1]) if tau_index > 0 else 0.0
    offsets = model.grid[tau_index:] - origin
    covariance_sum = float(np.minimum.outer(offsets, offsets).sum()) if offsets.size else 0.0
    return origin, offsets, float(offsets.sum()), covariance_sum


def geometric_asian_prices(s, geo_partial, k, model: MarketModel, tau_index: int):
    """
    Price at the fixing tau_index of a geometric Asian call given the first tau_index fixings.

    The remaining log fixings are jointly Gaussian, so ln G is normal with
    mean (M_tau ln g + n' ln s + nu sum u_j) / M and variance
    sigma^2 sum_ij min(u_i, u_j) / M^2. Broadcasts over the asset axis.
    """
    m_total = model.steps
    remaining = m_total - tau_index
    sigma = model.sigma_bar
    r = model.r_f
    origin, _, offset_sum, covariance_sum = _asian_moments(model, tau_index)
    ttm = model.maturity - origin

    known = tau_index * np.log(geo_partial) if tau_index > 0 else 0.0
    mean = (known + remaining * np.log(s) + (r - 0.5 * sigma ** 2) * offset_sum) / m_total
    variance = sigma ** 2 * covariance_sum / m_total ** 2
    disc = math.exp(-r * ttm)

    sd = np.sqrt(variance)
    forward = np.exp(mean + 0.5 * variance)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (mean - np.log(k) + variance) / sd
        priced = disc * (forward * norm.cdf(d1) - k * norm.cdf(d1 - sd))
    intrinsic = disc * np.maximum(np.exp(mean) - k, 0.0)
    return np.where(variance > 0, priced, intrinsic)


def geometric_asian_call_conditional(
    s_tau,
    geo_partial,
    model: MarketModel,
    k,
    tau_index: Optional[int] = None,
):
    """
    Time-tau price of the discretely monitored geometric Asian call.

    Args:
        s_tau: Spot at the conditioning date (per asset)
        geo_partial: Geometric mean of the fixings already observed
        model: Market fixing the grid, r_f and sigma_bar
        k: Strike
        tau_index: Number of fixings observed; defaults to the model's tau_index,
            0 prices at inception and M leaves only the discounted intrinsic value

    Returns:
        Price per asset (float when the model has one asset and scalars are given)
    """
    tau_index = model.tau_index if tau_index is None else tau_index
    if not 0 <= tau_index <= model.steps:
        raise DomainError(f"tau_index must lie in [0, {model.steps}], got {tau_index}")
    _require_positive(s_tau=s_tau, geo_partial=geo_partial, k=k)

    price = geometric_asian_prices(
        np.asarray(s_tau, dtype=float), np.asarray(geo_partial, dtype=float), np.asarray(k, dtype=float),
        model, tau_index,
    )
    if np.ndim(price) == 0 or (np.size(price) == 1 and np.ndim(s_tau) == 0):
        return float(np.ravel(price)[0])
    return price
