import argparse
import logging
import sys

import settings
from Harness import Pipeline, load_run_config
from errors import GendaugError

COMMANDS = (
    "make-data", "pretrain", "finetune", "sample", "generate", "eval-fid", "eval-is", "eval-cas",
    "sweep", "mix", "augment-exp", "report",
)

logger = logging.getLogger("gendaug")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gendaug", description="Synthetic training data from diffusion models.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON run description")
    parser.add_argument("--seed", type=int, help="master seed, overrides the run description")
    parser.add_argument("--out", default=str(settings.DATA_DIR), help="artifact root")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    parser.add_argument("--resume", action="store_true", help="skip sweep cells already committed")
    parser.add_argument("--target", help="sweep or experiment directory for the report command")
    return parser


def main(argv=None) -> int:
    """
    Runs one lab command.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=settings.LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        config = load_run_config(args.config, seed=args.seed)
        pipeline = Pipeline(config, args.out, jobs=args.jobs, resume=args.resume)
        logger.info("Running %s (seed %d) in %s...", args.command, config.seed, args.out)
        if args.command == "report":
            pipeline.report(args.target)
        else:
            pipeline.run(args.command)
    except GendaugError as e:
        logger.error("%s failed: %s", args.command, e)
        return 1
    logger.info("Successfully finished %s", args.command)
    return 0


if __name__ == "__main__":
    sys.exit(main())
