# nested_covar/services/market_sim.py
"""
Correlated multi-asset GBM simulation.

Outer scenarios run under the real-world drift on [0, tau] and are drawn in
fixed blocks of settings.SCENARIO_BLOCK from a counter-based stream, so
scenario i depends only on (seed, i). Inner continuations run under r_f on
[tau, T]; scenario s owns its own stream and path j is row j of that
stream's draws. Per-interval running maxima use the Brownian-bridge
maximum of the log price, asset by asset.
"""
import logging
import math
import time
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import settings
from ..errors import ConfigError, DomainError, NotPositiveDefinite, ShapeMismatch
from ..models.market import (
    InnerSummary,
    MarketModel,
    PathBundle,
    RiskFactorVector,
    ScenarioBatch,
    SeedLineage,
)
from ..schemas.market import MarketConfig
from ..utils.validators import validate_count, validate_symmetric
from .rng import Stream, generator, uniform_open
from .workers import map_ordered

logger = logging.getLogger(__name__)

# Cap on doubles per inner work unit (per draw array)
_INNER_CELLS = 20_000_000


def cholesky_factor(cov) -> np.ndarray:
    """
    Lower-triangular A with A @ A.T == cov.

    Raises:
        DomainError: cov is not square or not symmetric within 1e-12
        NotPositiveDefinite: a pivot falls at or below 1e-12 * max diagonal
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise DomainError(f"covariance must be square, got shape {cov.shape}")
    ok, message = validate_symmetric(cov)
    if not ok:
        raise DomainError(message)

    diagonal = np.diag(cov)
    if np.any(diagonal <= 0):
        index = int(np.argmin(diagonal))
        raise NotPositiveDefinite(f"non-positive variance at asset {index}", index)

    try:
        chol = np.linalg.cholesky(0.5 * (cov + cov.T))
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"covariance is not positive definite: {e}", -1) from e

    pivots = np.diag(chol) ** 2
    floor = 1e-12 * diagonal.max()
    bad = np.flatnonzero(pivots <= floor)
    if bad.size:
        raise NotPositiveDefinite(
            f"Cholesky pivot {int(bad[0])} is {pivots[bad[0]]:.3e}, below {floor:.3e}", int(bad[0])
        )
    return chol


def _bridge_max_log(log_start, log_end, sigma, dt, u):
    spread = (log_end - log_start) ** 2 - 2.0 * sigma ** 2 * dt * np.log(u)
    return 0.5 * (log_start + log_end + np.sqrt(spread))


def bridge_max_sample(s_start, s_end, sigma, dt, u) -> Union[float, np.ndarray]:
    """
    Sample the maximum over one interval of a GBM bridge pinned at s_start and s_end.

    With x = ln s_start and y = ln s_end the draw is
    exp((x + y + sqrt((y - x)^2 - 2 sigma^2 dt ln u)) / 2), which is never
    below max(s_start, s_end). Broadcasts over arrays.
    """
    s_start, s_end, sigma, dt, u = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (s_start, s_end, sigma, dt, u))
    )
    if np.any(s_start <= 0) or np.any(s_end <= 0):
        raise DomainError("bridge endpoints must be strictly positive")
    if np.any(sigma <= 0) or np.any(dt <= 0):
        raise DomainError("bridge sigma and dt must be strictly positive")
    if np.any(u <= 0) or np.any(u > 1):
        raise DomainError("bridge uniform must lie in (0, 1)")

    result = np.exp(_bridge_max_log(np.log(s_start), np.log(s_end), sigma, dt, u))
    result = np.maximum(result, np.maximum(s_start, s_end))
    return float(result) if result.ndim == 0 else result


def _broadcast(value, q: int, name: str) -> np.ndarray:
    array = np.atleast_1d(np.asarray(value, dtype=float))
    if array.shape == (1,):
        return np.full(q, array[0])
    if array.shape != (q,):
        raise ConfigError(f"market.{name} has {array.shape[0]} entries, expected {q}", f"MARKET__{name.upper()}")
    return array


def _generated_parameters(config: MarketConfig) -> Tuple[np.ndarray, np.ndarray]:
    gen_config = config.generator
    gen = generator(gen_config.seed, "market-generator", config.q)
    drift = gen.uniform(gen_config.drift_low, gen_config.drift_high, config.q)
    vols = gen.uniform(gen_config.vol_low, gen_config.vol_high, config.q)
    loadings = gen.uniform(gen_config.loading_low, gen_config.loading_high, config.q)
    corr = np.outer(loadings, loadings)
    np.fill_diagonal(corr, 1.0)
    return drift, corr * np.outer(vols, vols)


def market_from_config(config: MarketConfig) -> MarketModel:
    """Build the MarketModel described by a validated market section"""
    q = config.q
    if config.generator is not None and config.drift is None and config.cov is None and config.vols is None:
        drift, cov = _generated_parameters(config)
    else:
        drift = _broadcast(config.drift, q, "drift")
        if config.cov is not None:
            cov = np.asarray(config.cov, dtype=float)
            if cov.shape != (q, q):
                raise ConfigError(f"market.cov must be {q}x{q}, got {cov.shape}", "MARKET__COV")
        else:
            vols = _broadcast(config.vols, q, "vols")
            if config.correlation is None:
                corr = np.eye(q)
            elif isinstance(config.correlation, (int, float)):
                corr = np.full((q, q), float(config.correlation))
                np.fill_diagonal(corr, 1.0)
            else:
                corr = np.asarray(config.correlation, dtype=float)
                if corr.shape != (q, q):
                    raise ConfigError(f"market.correlation must be {q}x{q}", "MARKET__CORRELATION")
            cov = corr * np.outer(vols, vols)

    grid = config.maturity * np.arange(1, config.steps + 1) / config.steps
    return MarketModel(
        drift_real=drift,
        r_f=config.r_f,
        cov=cov,
        chol=cholesky_factor(cov),
        grid=grid,
        tau_index=config.tau_index,
        s0=_broadcast(config.s0, q, "s0"),
    )


def _outer_block(model: MarketModel, seed: int, stream: int, block: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    size = settings.SCENARIO_BLOCK
    steps = model.tau_index
    normals = generator(seed, stream, block, Stream.normal_lane()).standard_normal((size, steps, model.q))
    uniforms = uniform_open(generator(seed, stream, block, Stream.uniform_lane()), (size, steps, model.q))

    sigma = model.sigma_bar
    log_s = np.broadcast_to(np.log(model.s0), (size, model.q)).copy()
    log_max = log_s.copy()
    log_sum = np.zeros_like(log_s)
    for step, dt in enumerate(model.outer_increments):
        shock = normals[:, step, :] @ model.chol.T
        log_next = log_s + (model.drift_real - 0.5 * sigma ** 2) * dt + math.sqrt(dt) * shock
        log_max = np.maximum(log_max, _bridge_max_log(log_s, log_next, sigma, dt, uniforms[:, step, :]))
        log_max = np.maximum(log_max, log_next)
        log_sum += log_next
        log_s = log_next

    return np.exp(log_s), np.exp(log_max), np.exp(log_sum / steps)


def simulate_outer(
    model: MarketModel,
    count: int,
    seed: int,
    stream: int = Stream.STAGE1_OUTER,
    start: int = 0,
    threads: Optional[int] = None,
) -> ScenarioBatch:
    """
    Draw scenarios start .. start+count-1 of the given stream.

    Args:
        model: Market under which to simulate
        count: Number of scenarios m (>= 1)
        seed: Root seed
        stream: Stream tag separating stage 1, stage 2 and reference draws
        start: First scenario index

    Returns:
        ScenarioBatch whose ids are the global scenario indices
    """
    ok, message = validate_count(count, "scenario count")
    if not ok:
        raise DomainError(message)

    size = settings.SCENARIO_BLOCK
    first_block, last_block = start // size, (start + count - 1) // size

    def run_block(block: int):
        s_tau, run_max, geo = _outer_block(model, seed, int(stream), block)
        lo = max(start - block * size, 0)
        hi = min(start + count - block * size, size)
        ids = np.arange(block * size + lo, block * size + hi)
        return ScenarioBatch(s_tau[lo:hi], run_max[lo:hi], geo[lo:hi], ids, seed, int(stream))

    began = time.monotonic()
    parts = map_ordered(run_block, list(range(first_block, last_block + 1)), threads)
    batch = ScenarioBatch.concatenate(parts)
    logger.debug(f"Simulated {count} outer scenarios (stream {int(stream)}) in {time.monotonic() - began:.3f}s")
    return batch


def _inner_draws(model: MarketModel, seed: int, stream: int, scenario_id: int, count: int):
    shape = (count, model.steps - model.tau_index, model.q)
    normals = generator(seed, stream, scenario_id, Stream.normal_lane()).standard_normal(shape)
    uniforms = uniform_open(generator(seed, stream, scenario_id, Stream.uniform_lane()), shape)
    return normals, uniforms


def _continue_paths(
    model: MarketModel,
    s_tau: np.ndarray,
    run_max: np.ndarray,
    geo_partial: np.ndarray,
    normals: np.ndarray,
    uniforms: np.ndarray,
    bridge: bool = True,
    keep_prices: bool = False,
):
    """
    Risk-neutral continuation of a stack of scenarios.

    s_tau, run_max, geo_partial: (c, q); normals, uniforms: (c, l, n', q).
    Returns terminal, cumulative max and full-horizon geometric mean, each
    (c, l, q), plus the (c, l, n', q) price stack when keep_prices is set.
    """
    sigma = model.sigma_bar
    drift = model.r_f - 0.5 * sigma ** 2
    paths = normals.shape[1]

    log_s = np.repeat(np.log(s_tau)[:, None, :], paths, axis=1)
    log_max = np.repeat(np.log(run_max)[:, None, :], paths, axis=1)
    log_sum = np.repeat((model.tau_index * np.log(geo_partial))[:, None, :], paths, axis=1)
    prices = np.empty(normals.shape) if keep_prices else None

    for step, dt in enumerate(model.inner_increments):
        shock = normals[:, :, step, :] @ model.chol.T
        log_next = log_s + drift * dt + math.sqrt(dt) * shock
        if bridge:
            log_max = np.maximum(log_max, _bridge_max_log(log_s, log_next, sigma, dt, uniforms[:, :, step, :]))
        log_max = np.maximum(log_max, log_next)
        log_sum += log_next
        if keep_prices:
            prices[:, :, step, :] = np.exp(log_next)
        log_s = log_next

    return np.exp(log_s), np.exp(log_max), np.exp(log_sum / model.steps), prices


def simulate_inner(
    model: MarketModel,
    z: RiskFactorVector,
    count: int,
    seed: int,
    scenario_id: int,
    stream: int = Stream.STAGE1_INNER,
    bridge: bool = True,
) -> List[PathBundle]:
    """
    l risk-neutral continuations of one scenario from tau to T.

    Path j of (seed, stream, scenario_id) is the same draw whatever l is.
    Each bundle's lineage names z's fingerprint as its parent.
    """
    ok, message = validate_count(count, "inner path count")
    if not ok:
        raise DomainError(message)
    if z.q != model.q:
        raise ShapeMismatch(f"scenario has {z.q} assets, market has {model.q}")

    normals, uniforms = _inner_draws(model, seed, int(stream), scenario_id, count)
    _, maxima, geo, prices = _continue_paths(
        model, z.s_tau[None, :], z.run_max[None, :], z.geo_partial[None, :],
        normals[None], uniforms[None], bridge=bridge, keep_prices=True,
    )
    parent = z.fingerprint()
    return [
        PathBundle(
            prices=prices[0, j].T,
            bridge_max=maxima[0, j],
            geo_mean=geo[0, j],
            seed_lineage=SeedLineage(seed, int(stream), int(scenario_id), j, parent),
        )
        for j in range(count)
    ]


def simulate_inner_summaries(
    model: MarketModel,
    scenarios: ScenarioBatch,
    count: int,
    seed: int,
    stream: int = Stream.STAGE1_INNER,
    bridge: bool = True,
    threads: Optional[int] = None,
) -> InnerSummary:
    """
    Batched inner simulation keeping only what the payoffs need.

    Equivalent to calling simulate_inner for every scenario with the
    scenario's own id, without materialising the full price matrices.
    """
    ok, message = validate_count(count, "inner path count")
    if not ok:
        raise DomainError(message)

    n_steps = model.steps - model.tau_index
    chunk = max(1, min(settings.INNER_CHUNK, _INNER_CELLS // max(count * n_steps * model.q, 1)))
    starts: Sequence[int] = list(range(0, len(scenarios), chunk))

    def run_chunk(lo: int):
        hi = min(lo + chunk, len(scenarios))
        draws = [_inner_draws(model, seed, int(stream), int(sid), count) for sid in scenarios.ids[lo:hi]]
        normals = np.stack([d[0] for d in draws])
        uniforms = np.stack([d[1] for d in draws])
        terminal, maxima, geo, _ = _continue_paths(
            model, scenarios.s_tau[lo:hi], scenarios.run_max[lo:hi], scenarios.geo_partial[lo:hi],
            normals, uniforms, bridge=bridge,
        )
        return terminal, maxima, geo

    began = time.monotonic()
    parts = map_ordered(run_chunk, starts, threads)
    summary = InnerSummary(
        terminal=np.concatenate([p[0] for p in parts]),
        bridge_max=np.concatenate([p[1] for p in parts]),
        geo_mean=np.concatenate([p[2] for p in parts]),
    )
    logger.debug(
        f"Simulated {len(scenarios)} x {count} inner paths in {time.monotonic() - began:.3f}s (bridge={bridge})"
    )
    return summary
