"""Command line entry point.

    bookdist run      --config cfg.toml [--out DIR] [--seed N] [--threads N]
    bookdist ingest   --config cfg.toml ...
    bookdist dtm      --config cfg.toml ...
    bookdist dist     --config cfg.toml ...
    bookdist cluster  --config cfg.toml ...
    bookdist classify --config cfg.toml ...
    bookdist report   --config cfg.toml ...

`run` executes all six stages in order; `run --stage NAME` (or the named
subcommand) executes one stage against the artifacts already present in
the output directory. The BOOKDIST_THREADS environment variable sets the
default for --threads.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config, override
from .errors import BookdistError
from .pipeline import STAGES, StageError, run, run_stage


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="pipeline config file (TOML)")
    parser.add_argument("--out", help="output directory (overrides [output].dir)")
    parser.add_argument("--seed", type=int, help="override the clustering and split seeds")
    parser.add_argument("--threads", type=int,
                        help="worker threads for matrix fills and forests (default: "
                             "BOOKDIST_THREADS or 1)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log stage progress")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bookdist",
                                     description="Book-corpus distance and classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute the whole pipeline")
    run_p.add_argument("--stage", choices=STAGES, help="run only this stage")
    _add_common(run_p)

    for stage in STAGES:
        stage_p = sub.add_parser(stage, help=f"run the {stage} stage only")
        _add_common(stage_p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
        cfg = override(cfg, out_dir=args.out, seed=args.seed, threads=args.threads)
        if args.command == "run" and not args.stage:
            run(cfg)
        else:
            stage = args.stage if args.command == "run" else args.command
            run_stage(cfg, stage)
    except StageError as exc:
        print(f"bookdist: {exc}", file=sys.stderr)
        return 1
    except BookdistError as exc:
        print(f"bookdist: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
