# nested_covar/cli/commands/reference.py
import argparse
import logging

from ...services.harness import compute_reference
from ...services.problems import GaussianToyProblem
from .. import deps

logger = logging.getLogger(__name__)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("reference", help="ground-truth CoVaR from exact losses", parents=parents)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    plan = deps.get_plan(args)
    problem = deps.get_problem(plan)
    alpha, beta = plan.estimator.alpha, plan.estimator.beta

    result = compute_reference(problem, plan.reference, alpha, beta, deps.get_threads(args))
    payload = result.model_dump()
    payload["relative_half_width"] = result.relative_half_width
    if isinstance(problem, GaussianToyProblem):
        payload["analytic"] = problem.analytic_covar(alpha, beta)
    deps.emit_json(payload, args.out)
    return 0
