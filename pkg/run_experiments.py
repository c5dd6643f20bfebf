"""
Command-line entry point for simulation runs and experiment sweeps.

    python run_experiments.py run --config conf/default.conf --split auto --workload mixed --out results/
    python run_experiments.py sweep --config conf/default.conf --out results/
"""

import argparse
import sys
from typing import Dict, List, Optional

from config import AUTO_SPLIT, WORKLOAD_NAMES, config_snapshot, load_config, normalize_split, parse_override, settings
from simulation.engine import run
from simulation.export import export, preflight
from simulation.sweep import ExperimentMatrix, select_workers, sweep
from utils.errors import ConfigError, OutputError, SimulationError
from utils.logger import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CELL_FAILED = 1
EXIT_BAD_INPUT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Edge-to-cloud offloading simulator")
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--config", default=settings.DEFAULT_CONFIG_PATH, help="flat key = value config file")
        sub.add_argument("--out", default=settings.OUTPUT_DIR, help="output directory")
        sub.add_argument("--seed", type=int, help="base seed (overrides run.seed)")
        sub.add_argument(
            "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
            help="override a config key, may be repeated"
        )

    run_cmd = commands.add_parser("run", help="simulate a single (workload, split) cell")
    common(run_cmd)
    run_cmd.add_argument("--split", help="0-100 or 'auto'")
    run_cmd.add_argument("--workload", choices=WORKLOAD_NAMES)

    sweep_cmd = commands.add_parser("sweep", help="run the workload x split matrix")
    common(sweep_cmd)
    sweep_cmd.add_argument("--workers", type=int, help="worker processes (default SWEEP_WORKERS)")
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, str]:
    """--set values first, then the dedicated flags on top."""
    overrides = dict(parse_override(item) for item in args.overrides)
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    split = getattr(args, "split", None)
    if split is not None:
        try:
            split = normalize_split(split)
        except ValueError as e:
            raise ConfigError("Invalid --split", [str(e)])
        if split == AUTO_SPLIT:
            overrides["gateway.mode"] = "auto"
        else:
            overrides["gateway.mode"] = "fixed"
            overrides["gateway.fixed_pct"] = split
    workload = getattr(args, "workload", None)
    if workload is not None:
        overrides["workload.name"] = workload
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        config = load_config(args.config, collect_overrides(args))
        out_dir = preflight(args.out)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        for diagnostic in e.diagnostics:
            print(f"  {diagnostic}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except OutputError as e:
        logger.error(str(e))
        return EXIT_BAD_INPUT

    if args.command == "run":
        try:
            result = run(config)
        except SimulationError as e:
            logger.error(f"Run failed: {e}")
            return EXIT_CELL_FAILED
        export([result], out_dir, config=config_snapshot(config))
        print(
            f"{result.workload} @ {result.split}: {result.successful} successful, "
            f"{result.failed} failed, mean latency {result.mean_latency_s:.3f}s"
        )
        return EXIT_OK

    matrix = ExperimentMatrix.from_config(config)
    workers = select_workers(args.workers, settings.SWEEP_WORKERS, matrix.cells())
    outcome = sweep(config, matrix, workers=workers)
    export(outcome.results, out_dir, config=config_snapshot(config), errors=outcome.errors)
    for result in outcome.results:
        print(f"{result.workload:>8} {result.split:>5}  successful={result.successful:<6} failed={result.failed}")
    if not outcome.ok:
        print(f"{len(outcome.errors)} cells failed, see {out_dir / 'summary.json'}", file=sys.stderr)
        return EXIT_CELL_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
