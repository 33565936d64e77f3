"""``civic-lens`` command line.

Exit codes: 0 success, 1 invalid config or input (nothing written),
2 failure while computing.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__, pipeline

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

# subcommand flag -> config key it overrides
_PATH_FLAGS = {
    "extract": ("transcripts",),
    "filter": ("comments",),
    "train": ("comments", "annotations"),
    "evaluate": ("comments", "annotations"),
    "predict": ("comments", "models", "predictions"),
    "summarize": ("comments", "labels"),
    "sankey": ("labels",),
    "select-cities": ("cities", "state_cities"),
}

_HELP = {
    "extract": "assemble and filter public comments from transcript JSONL files",
    "filter": "re-apply the comment filter to a comments.jsonl",
    "train": "tune, evaluate and save the 23 binary models for every seed",
    "evaluate": "tune and score every target; write report.json/report.csv",
    "predict": "label comments by majority vote over the per-seed models",
    "summarize": "per-city summary, co-occurrence matrix and coverage",
    "sankey": "plot-ready Sankey nodes and links",
    "select-cities": "pick a representative city subset by KL matching",
}


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="PATH", default=default, help="YAML or JSON run configuration")
    parser.add_argument("--seed", type=int, metavar="INT", default=default, help="root seed")
    parser.add_argument("--jobs", type=int, metavar="INT", default=default, help="worker processes")
    parser.add_argument("--out", metavar="DIR", default=default, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="civic-lens", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, keys in _PATH_FLAGS.items():
        sp = sub.add_parser(name, help=_HELP[name])
        _global_flags(sp, suppress=True)
        for key in keys:
            sp.add_argument("--" + key.replace("_", "-"), dest=f"path_{key}", metavar="PATH")
        if name == "sankey":
            sp.add_argument("--direction", choices=("local_first", "societal_first"))
            sp.add_argument("--top-k", type=int, dest="top_k")
        if name == "select-cities":
            sp.add_argument("--subset-size", type=int, dest="subset_size")
            sp.add_argument("--n-subsets", type=int, dest="n_subsets")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    over: dict = {}
    for key in ("seed", "jobs", "out"):
        if getattr(args, key, None) is not None:
            over[key] = getattr(args, key)
    paths = {k[5:]: v for k, v in vars(args).items() if k.startswith("path_") and v is not None}
    if paths:
        over["paths"] = paths
    a = {k: getattr(args, k) for k in ("direction", "top_k") if getattr(args, k, None) is not None}
    if a:
        over["analytics"] = a
    g = {k: getattr(args, k) for k in ("subset_size", "n_subsets") if getattr(args, k, None) is not None}
    if g:
        over["goldset"] = g
    return over


def _setup_logging() -> None:
    level = os.environ.get("CIVIC_LENS_LOG", "warn").strip().lower()
    if level not in LOG_LEVELS:
        raise pipeline.ValidationError(f"CIVIC_LENS_LOG must be one of {', '.join(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are validation errors here
        return 0 if exc.code == 0 else 1
    try:
        _setup_logging()
        cfg = pipeline.load_config(args.config, _overrides(args))
        result = pipeline.run(args.command, cfg)
    except pipeline.ValidationError as exc:
        print(f"civic-lens {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        logging.getLogger("civic_lens").debug("runtime failure", exc_info=True)
        print(f"civic-lens {args.command}: runtime error: {exc}", file=sys.stderr)
        return 2
    json.dump(result, sys.stdout, indent=2, sort_keys=True, default=str)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
