# nested_covar/cli/commands/simulate.py
import argparse
import csv
import io
import logging

import numpy as np

from ...services.problems import PortfolioProblem
from ...services.rng import Stream
from .. import deps

logger = logging.getLogger(__name__)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("simulate", help="draw outer scenarios (and inner means)", parents=parents)
    parser.add_argument("--count", type=int, default=10, help="outer scenarios")
    parser.add_argument("--inner", type=int, default=0, help="inner paths per scenario; 0 skips them")
    parser.add_argument("--exact", action="store_true", help="append exact conditional losses")
    parser.set_defaults(handler=run)


def feature_names(problem) -> list:
    if isinstance(problem, PortfolioProblem):
        q = problem.model.q
        return [f"{kind}_{i}" for kind in ("s_tau", "run_max", "geo") for i in range(q)]
    return [f"z{i + 1}" for i in range(problem.feature_dimension)]


def run(args: argparse.Namespace) -> int:
    plan = deps.get_plan(args)
    problem = deps.get_problem(plan)
    threads = deps.get_threads(args)

    scenarios = problem.outer(args.count, plan.seed, Stream.STAGE1_OUTER, threads=threads)
    columns = {"id": np.arange(args.count)}
    features = scenarios.features()
    for index, name in enumerate(feature_names(problem)):
        columns[name] = features[:, index]
    if args.inner > 0:
        columns["x_bar"], columns["y_bar"] = problem.inner_means(scenarios, args.inner, plan.seed, threads=threads)
    if args.exact:
        columns["mu"], columns["pi"] = problem.exact_losses(scenarios)
    logger.info(f"Simulated {args.count} scenarios with {args.inner} inner paths each")

    names = list(columns)
    if (args.format or "csv") == "json":
        records = [{name: columns[name][row].item() for name in names} for row in range(args.count)]
        deps.emit_json(records, args.out)
        return 0

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(names)
    for row in range(args.count):
        writer.writerow([columns[name][row] if name == "id" else f"{columns[name][row]:.10g}" for name in names])
    deps.emit_text(buffer.getvalue(), args.out)
    return 0
