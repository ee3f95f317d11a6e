# nested_covar/cli/commands/fit.py
"""
Offline stage: simulate stage-1 data, tune, fit and persist the mu and pi surfaces
"""
import argparse
import logging
from pathlib import Path

from ...config import settings
from ...models.estimation import EstimatorMethod
from ...models.surface import SmootherFamily
from ...services.estimators import fit_stage_one
from ...services.smoothers.persistence import save_model
from .. import deps

logger = logging.getLogger(__name__)

SURFACE_FILES = {"x": "mu.cvsm", "y": "pi.cvsm"}


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("fit", help="fit and save loss surfaces", parents=parents)
    parser.add_argument("--family", choices=[f.value for f in SmootherFamily], help="smoother family")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    plan = deps.get_plan(args)
    problem = deps.get_problem(plan)
    family = SmootherFamily(args.family) if args.family else plan.smoothing.family
    allocation = deps.get_allocation(plan, EstimatorMethod.DECOUPLED)

    stage = fit_stage_one(
        problem, allocation.m, allocation.l, family, plan.smoothing, plan.estimator.seed, deps.get_threads(args)
    )
    directory = Path(args.out or Path(settings.OUTPUT_DIR) / "surfaces")
    paths = {
        "x": save_model(stage.surface_x, directory / SURFACE_FILES["x"]),
        "y": save_model(stage.surface_y, directory / SURFACE_FILES["y"]),
    }
    deps.emit_json({
        "family": family.value,
        "m": allocation.m,
        "l": allocation.l,
        "seed": plan.estimator.seed,
        "scenario_block": settings.SCENARIO_BLOCK,
        "hyperparameters": stage.hyperparameters,
        "surfaces": {side: str(path) for side, path in paths.items()},
        "timings": {"t_sim1": stage.t_sim1, "t_tune": stage.t_tune, "t_fit": stage.t_fit},
    })
    return 0
