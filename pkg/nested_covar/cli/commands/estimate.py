# nested_covar/cli/commands/estimate.py
import argparse
import json
import logging
from pathlib import Path

from ...errors import ConfigError
from ...models.estimation import EstimatorMethod
from ...models.surface import SmootherFamily
from ...services.estimators import oracle_surfaces, run_estimator
from ...services.smoothers.persistence import load_model
from .. import deps
from .fit import SURFACE_FILES

logger = logging.getLogger(__name__)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("estimate", help="one CoVaR estimate as a JSON report", parents=parents)
    parser.add_argument("--method", choices=[m.value for m in EstimatorMethod], help="estimator")
    parser.add_argument("--family", choices=[f.value for f in SmootherFamily], help="smoother family")
    parser.add_argument("--fitted", metavar="DIR", help="surfaces saved by `fit`; skips stage 1")
    parser.add_argument("--oracle", action="store_true", help="exact loss surfaces in place of fitted ones")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    plan = deps.get_plan(args)
    problem = deps.get_problem(plan)
    method = EstimatorMethod(args.method) if args.method else plan.estimator.method
    family = SmootherFamily(args.family) if args.family else plan.smoothing.family

    fitted = None
    if args.fitted or args.oracle:
        if method is not EstimatorMethod.DECOUPLED:
            raise ConfigError(f"--fitted and --oracle apply to the decoupled estimator, not {method.value}", key="--method")
        if args.oracle:
            fitted = oracle_surfaces(problem)
            family = None
        else:
            directory = Path(args.fitted)
            fitted = (load_model(directory / SURFACE_FILES["x"]), load_model(directory / SURFACE_FILES["y"]))
            family = fitted[0].family

    allocation = deps.get_allocation(plan, method)
    report = run_estimator(
        problem, method, plan.estimator, allocation, plan.smoothing,
        family=family if method in (EstimatorMethod.COUPLED, EstimatorMethod.DECOUPLED) else None,
        fitted=fitted, threads=deps.get_threads(args),
    )
    deps.emit_json(json.loads(report.model_dump_json()), args.out)
    return 0
