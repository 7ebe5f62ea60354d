import argparse
import sys
from typing import Optional, Sequence

from loguru import logger

from coach_flow.cli.commands import COMMANDS
from coach_flow.exceptions import CoachFlowError


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML configuration document")
    common.add_argument("--out", metavar="DIR", help="output directory, overrides run.output_dir")
    common.add_argument("--seed", metavar="N", type=int, help="single seed, overrides run.seeds")
    common.add_argument("--quiet", action="store_true", help="only log warnings and errors")

    parser = argparse.ArgumentParser(
        prog="coach-flow",
        description="Single-state multiple-actions actor-critic training and benchmarks",
    )
    subcommands = parser.add_subparsers(dest="command", required=True)
    subcommands.add_parser("train", parents=[common], help="train the configured method")
    subcommands.add_parser("compare", parents=[common], help="compare training efficiency of methods")
    subcommands.add_parser("estimator-lab", parents=[common], help="run the advantage estimator checks")
    subcommands.add_parser("prm", parents=[common], help="build the step-label dataset and fit the PRM")
    subcommands.add_parser("eval", parents=[common], help="evaluate trained policy checkpoints")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CoachFlowError as error:
        logger.error(
            "{command} failed with exit code {exit_code}: {error}",
            command=args.command,
            exit_code=error.exit_code,
            error=str(error),
        )
        print(f"error: {error}", file=sys.stderr)
        return error.exit_code
    except OSError as error:
        logger.error("{command} failed on I/O: {error}", command=args.command, error=str(error))
        print(f"error: {error}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
