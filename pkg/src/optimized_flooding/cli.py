"""
Command line interface

    ofp-sim run <preset|config|manifest> [--out DIR] [--seed N] [--max-trials N] [--jobs N] [--event-logs]
    ofp-sim list-presets
    ofp-sim render-skew <log> [--out FILE]
    ofp-sim validate <config>
"""

import argparse
import asyncio
import logging
import os
from pathlib import Path
import sys
from typing import Optional, Sequence

from .config import emit_config, load_config
from .exceptions import ConfigError, ExperimentIOError, OutOfRange, ScenarioError, UnknownPreset
from .experiment import render_skew, run_experiment
from .presets import get_preset, list_presets
from .version import __version__

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "OFP_OUTPUT_DIR"

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ofp-sim", description="Optimized flooding simulator and experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a preset, a configuration file or a manifest")
    run.add_argument("source")
    run.add_argument("--out", type=Path, default=None, help=f"output directory, default ${OUTPUT_DIR_ENV} or ./results")
    run.add_argument("--seed", type=int, default=None, help="base seed for every configuration")
    run.add_argument("--max-trials", type=int, default=None)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--event-logs", action="store_true", help="write the event log of the first trial")

    commands.add_parser("list-presets", help="list experiment presets")

    skew = commands.add_parser("render-skew", help="transmitter plot data from an event log")
    skew.add_argument("log", type=Path)
    skew.add_argument("--out", type=Path, default=None, help="default <log>.skew.csv")

    validate = commands.add_parser("validate", help="check a configuration file")
    validate.add_argument("config", type=Path)
    return parser


def output_dir(explicit: Optional[Path]) -> Path:
    if explicit is not None:
        return explicit
    return Path(os.environ.get(OUTPUT_DIR_ENV, "results"))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    try:
        match args.command:
            case "run":
                if args.jobs < 1:
                    raise OutOfRange(f"--jobs must be >= 1, got {args.jobs}")
                result = asyncio.run(
                    run_experiment(
                        args.source,
                        output_dir(args.out),
                        seed=args.seed,
                        max_trials=args.max_trials,
                        jobs=args.jobs,
                        event_logs=args.event_logs,
                    )
                )
                print(result.csv_path)
                return EXIT_OK if result.converged else EXIT_NOT_CONVERGED
            case "list-presets":
                for name in list_presets():
                    experiment = get_preset(name)
                    print(f"{name:20} {len(experiment.configs):4} configs  {experiment.caption}")
                return EXIT_OK
            case "render-skew":
                out = args.out if args.out is not None else args.log.with_suffix(".skew.csv")
                asyncio.run(render_skew(args.log, out))
                print(out)
                return EXIT_OK
            case "validate":
                config = load_config(args.config)
                sys.stdout.write(emit_config(config))
                return EXIT_OK
    except (ConfigError, OutOfRange, ScenarioError, UnknownPreset) as e:
        logger.error(str(e))
        return EXIT_ERROR
    except (ExperimentIOError, FileNotFoundError) as e:
        logger.error(f"I/O error: {e}")
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
