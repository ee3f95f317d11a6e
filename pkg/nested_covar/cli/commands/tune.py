# nested_covar/cli/commands/tune.py
import argparse
import logging
import math

from ...errors import BudgetExhausted
from ...models.estimation import EstimatorMethod
from ...models.surface import SmootherFamily, TrainingSet
from ...services.rng import Stream
from ...services.smoothers.tuning import tune
from .. import deps

logger = logging.getLogger(__name__)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("tune", help="cross-validate a smoother grid on stage-1 data", parents=parents)
    parser.add_argument("--family", choices=[f.value for f in SmootherFamily], help="smoother family")
    parser.add_argument("--side", choices=("x", "y"), default="x", help="portfolio whose inner means are the targets")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    plan = deps.get_plan(args)
    problem = deps.get_problem(plan)
    threads = deps.get_threads(args)
    family = SmootherFamily(args.family) if args.family else plan.smoothing.family
    allocation = deps.get_allocation(plan, EstimatorMethod.DECOUPLED)

    seed = plan.estimator.seed
    scenarios = problem.outer(allocation.m, seed, Stream.STAGE1_OUTER, threads=threads)
    x_bar, y_bar = problem.inner_means(scenarios, allocation.l, seed, threads=threads)
    data = TrainingSet.from_arrays(scenarios.features(), x_bar if args.side == "x" else y_bar)

    exhausted = False
    try:
        best, table = tune(data, family, plan.smoothing.grid, plan.smoothing, problem.hinge_knots(), threads)
    except BudgetExhausted as e:
        best, table, exhausted = e.best, e.table, True

    deps.emit_json({
        "family": family.value,
        "side": args.side,
        "m": allocation.m,
        "l": allocation.l,
        "best": best,
        "budget_exhausted": exhausted,
        "candidates": [
            {**row, "cv_mse": row["cv_mse"] if math.isfinite(row["cv_mse"]) else None} for row in table
        ],
    }, args.out)
    return 0
