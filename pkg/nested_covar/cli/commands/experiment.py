# nested_covar/cli/commands/experiment.py
import argparse
import logging
from pathlib import Path

from ...config import settings
from ...errors import EXIT_OK, EXIT_RUNTIME
from ...models.estimation import RowStatus
from ...services.harness import ladder_slopes, resolve_theta, run_experiment
from ...services.results import ResultWriter, render_table
from .. import deps

logger = logging.getLogger(__name__)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("experiment", help="replicated study of every estimator row", parents=parents)
    parser.add_argument("--theta", type=float, help="reference CoVaR; skips computing it")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    plan = deps.get_plan(args)
    problem = deps.get_problem(plan)
    threads = deps.get_threads(args)
    fmt = args.format or plan.experiment.format

    if args.out:
        path = Path(args.out)
    else:
        path = Path(plan.experiment.output_dir or settings.OUTPUT_DIR) / f"experiment.{fmt}"

    theta = args.theta if args.theta is not None else resolve_theta(plan, problem, threads)
    with ResultWriter(path, fmt) as writer:
        rows = run_experiment(plan, problem, theta, writer=writer, threads=threads)
    record = path.with_name(path.name + ".run.json")
    deps.emit_json({
        "theta": theta,
        "seed": plan.seed,
        "experiment_seed": plan.experiment.seed,
        "replications": plan.experiment.replications,
        "scenario_block": settings.SCENARIO_BLOCK,
    }, str(record))

    completed = [row for row in rows if row.status is RowStatus.COMPLETED]
    lines = [f"theta = {theta:.6g}", render_table(completed)]
    for label, fit in ladder_slopes(completed).items():
        lines.append(f"slope[{label}] = {fit.slope:.4f} +/- {fit.stderr:.4f} ({fit.points} points)")
    failed = [row for row in rows if row.status is RowStatus.FAILED]
    for row in failed:
        lines.append(f"FAILED {row.key}: {row.error}")
    lines.append(f"results: {path}")
    lines.append(f"run record: {record}")
    print("\n".join(lines))
    return EXIT_RUNTIME if failed else EXIT_OK
