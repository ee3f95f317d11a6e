"""
Shared command plumbing: common flags, logging, plan loading and output
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, List, Optional

from ..config import settings
from ..errors import ResultsIOError
from ..models.estimation import BudgetStrategy, EstimatorMethod
from ..schemas.estimator import BudgetAllocation
from ..schemas.plan import PlanConfig
from ..services.budget import allocate_budget
from ..services.config_loader import load_plan
from ..services.problems import problem_from_plan

logger = logging.getLogger(__name__)

_SEEDED_SECTIONS = ("SEED", "ESTIMATOR__SEED", "EXPERIMENT__SEED", "REFERENCE__SEED")


def common_parser() -> argparse.ArgumentParser:
    """Flags every subcommand accepts"""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="key-value plan file")
    parser.add_argument("--seed", type=int, help="root seed for every random stream")
    parser.add_argument("--threads", type=int, help="worker cap (default: COVAR_THREADS or all cores)")
    parser.add_argument("--out", help="output file or directory")
    parser.add_argument("--format", choices=("csv", "json"), help="result file format")
    parser.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="plan key override, repeatable")
    parser.add_argument("--deterministic", action="store_true", help="write zero timings")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    return parser


def configure_logging(verbosity: int) -> None:
    level = getattr(logging, settings.LOG_LEVEL)
    if verbosity >= 2:
        level = logging.DEBUG
    elif verbosity == 1:
        level = min(level, logging.INFO)
    logging.basicConfig(level=level, format=settings.LOG_FORMAT, stream=sys.stderr, force=True)


def apply_runtime_flags(args: argparse.Namespace) -> None:
    if getattr(args, "deterministic", False):
        settings.DETERMINISTIC_OUTPUT = True


def get_plan(args: argparse.Namespace) -> PlanConfig:
    """Plan file plus --override pairs; --seed wins over every seed key, tuning folds and MLP training included"""
    overrides: List[str] = list(args.override or [])
    if args.seed is not None:
        overrides.extend(f"{key}={args.seed}" for key in _SEEDED_SECTIONS)
    plan = load_plan(args.config, overrides)
    if args.seed is None:
        return plan
    smoothing = plan.smoothing.model_copy(update={
        "grid": plan.smoothing.grid.model_copy(update={"seed": args.seed}),
        "mlp": plan.smoothing.mlp.model_copy(update={"seed": args.seed}),
    })
    return plan.model_copy(update={"smoothing": smoothing})


def get_problem(plan: PlanConfig):
    return problem_from_plan(plan)


def get_threads(args: argparse.Namespace) -> Optional[int]:
    return args.threads if args.threads and args.threads > 0 else None


def get_allocation(plan: PlanConfig, method: EstimatorMethod) -> BudgetAllocation:
    """Budget section resolved for one method; estimator k, h, l and n pin the shape"""
    default = {
        EstimatorMethod.SNS: BudgetStrategy.SNS_OPT,
        EstimatorMethod.COUPLED: BudgetStrategy.SMOOTH_FIXED_L,
    }.get(method, BudgetStrategy.DECOUPLED)
    pinned = {
        name: getattr(plan.estimator, name)
        for name in ("k", "h", "l", "n")
        if getattr(plan.estimator, name) is not None
    }
    if method is EstimatorMethod.BATCHING and "n" not in pinned:
        pinned["n"] = plan.budget.gamma
    constants = plan.budget.constants.model_copy(update=pinned)
    return allocate_budget(plan.budget.gamma, plan.budget.strategy or default, constants)


def emit_text(text: str, out: Optional[str] = None) -> None:
    """Write to --out when given, stdout otherwise"""
    if not out:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    path = Path(out)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    except OSError as e:
        raise ResultsIOError(f"cannot write {path}: {e}") from e
    logger.info(f"Wrote {path}")


def emit_json(payload: Any, out: Optional[str] = None) -> None:
    emit_text(json.dumps(payload, indent=2, sort_keys=True), out)
