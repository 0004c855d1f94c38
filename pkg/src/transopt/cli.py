"""Command line entry point: ``transopt generate|train|sweep|report``.

Exit codes: 0 success, 2 configuration error, 3 design-cache error,
4 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import experiments
from .config import ExperimentConfig
from .errors import CacheError, ConfigError, TransOptError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CACHE = 3
EXIT_RUNTIME = 4

log = logging.getLogger("transopt")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="YAML/JSON file with ExperimentConfig keys")
    parser.add_argument("--seed", type=int, help="dataset and training seed")
    parser.add_argument("--out", help="output directory (cache, reports, sweep.csv)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes; 1 is the bit-deterministic mode")
    parser.add_argument("--dim", type=int, action="append", help="problem dimension (repeatable)")
    parser.add_argument("--multiplier", type=int, action="append", help="sample size factor, 50 or 100 (repeatable)")
    parser.add_argument("--instances", type=int, help="instances per class")
    parser.add_argument("--embed", type=int, action="append", help="embedding size e (repeatable)")
    parser.add_argument("--heads", type=int, action="append", help="attention heads h (repeatable)")
    parser.add_argument("--layers", type=int, action="append", help="encoder layers L (repeatable)")
    parser.add_argument("--max-epochs", type=int, help="override the epoch cap")
    parser.add_argument("--folds", type=int, help="override the number of CV folds")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build and cache design matrices")
    _common(p)

    p = sub.add_parser("train", help="cross-validate one configuration")
    _common(p)

    p = sub.add_parser("sweep", help="cross-validate every grid point, write sweep.csv")
    _common(p)
    p.add_argument("--no-timing", action="store_true", help="leave wall_seconds empty (byte-reproducible CSV)")
    p.add_argument("--resume", action="store_true", help="keep finished rows of an existing sweep.csv")

    p = sub.add_parser("report", help="render a markdown summary of a sweep CSV")
    _common(p)
    p.add_argument("--csv", type=Path, help="sweep CSV (default: <out>/sweep.csv)")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["out"] = args.out
    if args.dim:
        updates["dims"] = args.dim
    if args.multiplier:
        updates["multipliers"] = args.multiplier
    if args.instances is not None:
        updates["instances_per_class"] = args.instances
    grid = dict(cfg.grid)
    for flag, key in (("embed", "e"), ("heads", "h"), ("layers", "L")):
        if getattr(args, flag):
            grid[key] = getattr(args, flag)
    updates["grid"] = grid
    train = dict(cfg.train)
    if args.max_epochs is not None:
        train["max_epochs"] = args.max_epochs
    if args.folds is not None:
        train["folds"] = args.folds
    updates["train"] = train
    return dataclasses.replace(cfg, **updates)


def _single_point(cfg: ExperimentConfig) -> tuple[int, int, int, int, int]:
    values = [cfg.dims, cfg.multipliers, cfg.grid["e"], cfg.grid["h"], cfg.grid["L"]]
    names = ["--dim", "--multiplier", "--embed", "--heads", "--layers"]
    for v, n in zip(values, names):
        if len(v) != 1:
            raise ConfigError(f"train runs a single configuration; give exactly one {n} (got {v})")
    return tuple(v[0] for v in values)


BEST_POINT = {"dims": 3, "e": 30, "h": 1, "L": 1}


def _collapse_to_best(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    """Multi-valued axes not set on the command line fall back to the best known configuration."""

    def pick(values, best):
        return values if len(values) == 1 else [best if best in values else values[0]]

    dims = cfg.dims if args.dim else pick(cfg.dims, BEST_POINT["dims"])
    grid = {
        key: cfg.grid[key] if getattr(args, flag) else pick(cfg.grid[key], BEST_POINT[key])
        for key, flag in (("e", "embed"), ("h", "heads"), ("L", "layers"))
    }
    return dataclasses.replace(cfg, dims=dims, grid=grid)


def run(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    if args.command == "train":
        report, path = experiments.train_point(cfg, _single_point(_collapse_to_best(cfg, args)), jobs=args.jobs)
        print(path.with_suffix(".txt").read_text(), end="")
        return EXIT_OK

    if args.command == "generate":
        entries = experiments.generate(cfg)
        print(f"wrote {len(entries)} designs to {experiments.cache_root(cfg)}")
    elif args.command == "sweep":
        path = experiments.sweep(cfg, jobs=args.jobs, timing=not args.no_timing, resume=args.resume)
        experiments.report(path, Path(cfg.out) / "report.md")
        print(f"wrote {path} and {Path(cfg.out) / 'report.md'}")
    elif args.command == "report":
        csv_path = args.csv or Path(cfg.out) / "sweep.csv"
        if not Path(csv_path).exists():
            raise ConfigError(f"sweep CSV {csv_path} does not exist")
        print(experiments.report(csv_path, Path(csv_path).with_name("report.md")), end="")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return run(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except CacheError as exc:
        log.error("cache error: %s", exc)
        return EXIT_CACHE
    except (TransOptError, RuntimeError, OSError, ValueError) as exc:
        log.error("runtime error: %s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
