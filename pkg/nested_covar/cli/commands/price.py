# nested_covar/cli/commands/price.py
import argparse
import logging
import sys

import numpy as np

from ...errors import KnockedOut
from ...models.portfolio import HestonParams
from ...schemas.market import MarketConfig
from ...services.market_sim import market_from_config
from ...services.pricing import barrier_uoc_price, bs_call_price, geometric_asian_call_conditional, heston_call_price

logger = logging.getLogger(__name__)


def _add_market_flags(parser: argparse.ArgumentParser, sigma: bool = True) -> None:
    parser.add_argument("--s", type=float, required=True, help="spot")
    parser.add_argument("--k", type=float, required=True, help="strike")
    parser.add_argument("--r", type=float, default=0.05, help="risk-free rate")
    if sigma:
        parser.add_argument("--sigma", type=float, default=0.2, help="volatility")


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("price", help="closed-form option prices")
    instruments = parser.add_subparsers(dest="instrument", required=True)

    bs = instruments.add_parser("bs", help="Black-Scholes call", parents=parents)
    _add_market_flags(bs)
    bs.add_argument("--ttm", type=float, required=True, help="time to maturity")

    barrier = instruments.add_parser("barrier", help="up-and-out barrier call", parents=parents)
    _add_market_flags(barrier)
    barrier.add_argument("--b", type=float, required=True, help="barrier")
    barrier.add_argument("--ttm", type=float, required=True)

    heston = instruments.add_parser("heston", help="Heston call", parents=parents)
    _add_market_flags(heston, sigma=False)
    heston.add_argument("--ttm", type=float, required=True)
    heston.add_argument("--kappa", type=float, default=2.0)
    heston.add_argument("--theta", type=float, default=0.04)
    heston.add_argument("--sigma-v", type=float, default=0.3)
    heston.add_argument("--rho", type=float, default=-0.7)
    heston.add_argument("--v0", type=float, default=0.04)
    heston.add_argument("--lambda-h", type=float, default=0.0)

    asian = instruments.add_parser("asian", help="geometric Asian call at the conditioning date", parents=parents)
    _add_market_flags(asian)
    asian.add_argument("--geo", type=float, help="geometric mean of observed fixings (default: spot)")
    asian.add_argument("--maturity", type=float, default=1.0)
    asian.add_argument("--steps", type=int, default=50, help="fixings on the grid T*j/steps")
    asian.add_argument("--tau-index", type=int, default=2, help="fixings already observed")

    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    if args.instrument == "bs":
        price = bs_call_price(args.s, args.k, args.r, args.sigma, args.ttm)
    elif args.instrument == "barrier":
        try:
            price = barrier_uoc_price(args.s, args.k, args.b, args.r, args.sigma, args.ttm)
        except KnockedOut as e:
            print(f"note: knocked out ({e})", file=sys.stderr)
            price = KnockedOut.price
    elif args.instrument == "heston":
        params = HestonParams(args.kappa, args.theta, args.sigma_v, args.rho, args.v0, args.lambda_h)
        price = heston_call_price(args.s, params, args.k, args.r, args.ttm)
    else:
        model = market_from_config(MarketConfig(
            q=1, s0=args.s, r_f=args.r, maturity=args.maturity, steps=args.steps,
            tau_index=args.tau_index, drift=args.r, vols=args.sigma,
        ))
        geo = args.s if args.geo is None else args.geo
        price = float(np.ravel(geometric_asian_call_conditional(args.s, geo, model, args.k))[0])

    print(f"{price:.10g}")
    return 0
