"""Command line front end.

Exit codes: 0 success, 1 failure during a run (checkpoint left intact),
2 invalid configuration, checkpoint or trajectory.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config, validate_config
from .core import Trajectory
from .engine import CONFIG_FILE, SUMMARY_FILE, TRAJECTORY_FILE, load_checkpoint, run_generation_loop
from .errors import CheckpointError, ConfigurationError, TwoLoopError

logger = logging.getLogger("twoloop")

EXIT_OK, EXIT_FAILURE, EXIT_INVALID = 0, 1, 2


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "max_parallel", None) is not None:
        config.max_parallel = args.max_parallel
    if getattr(args, "generations", None) is not None:
        config.generations = args.generations
    return config


def _execute(config: RunConfig, resume: bool, config_path=None) -> int:
    text = source = None
    if config_path is not None:
        text, source = Path(config_path).read_text(encoding="utf-8"), str(config_path)
    try:
        optimizee, optimizer = validate_config(config, text, source)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        trajectory = run_generation_loop(config, optimizee, optimizer, resume=resume)
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (TwoLoopError, OSError) as exc:
        logger.exception("run %s failed", config.run_name)
        print(f"error: run failed: {exc}; the last checkpoint is intact", file=sys.stderr)
        return EXIT_FAILURE
    summary_path = config.results_dir / SUMMARY_FILE
    if summary_path.exists():
        summary = json.loads(summary_path.read_text(encoding="utf-8"))
        print(f"{config.run_name}: {len(trajectory)} generations, best fitness {summary['best_fitness']!r} "
              f"(generation {summary['best_generation']}, index {summary['best_index']})")
    return EXIT_OK


def cmd_run(config_path, args=None) -> int:
    try:
        config = load_config(config_path, check=False)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args is not None:
        _apply_overrides(config, args)
    config.results_dir.mkdir(parents=True, exist_ok=True)
    config.save(config.results_dir / CONFIG_FILE)
    return _execute(config, resume=False, config_path=config_path)


def cmd_resume(results_dir, args=None) -> int:
    results_dir = Path(results_dir)
    try:
        config = load_config(results_dir / CONFIG_FILE)
        ckpt = load_checkpoint(results_dir)
    except (ConfigurationError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    config.results_root = str(results_dir.parent)
    config.run_name = results_dir.name
    if args is not None:
        if getattr(args, "seed", None) is not None and args.seed != config.seed:
            print("error: --seed cannot change the seed of an existing run", file=sys.stderr)
            return EXIT_INVALID
        _apply_overrides(config, args)
    if ckpt["completed"]:
        print(f"{config.run_name}: already completed after {ckpt['generation'] + 1} generations; nothing to do")
        return EXIT_OK
    return _execute(config, resume=True)


def export_rows(trajectory: Trajectory) -> list[dict]:
    rows, best_so_far = [], -math.inf
    for record in trajectory:
        f = record.ok_fitnesses()
        if f.size:
            best_so_far = max(best_so_far, float(f.max()))
            rows.append({"generation": record.generation, "mean_fitness": float(f.mean()),
                         "std_fitness": float(f.std()), "best_fitness": float(f.max()),
                         "best_so_far": best_so_far})
        else:
            rows.append({"generation": record.generation, "mean_fitness": math.nan, "std_fitness": math.nan,
                         "best_fitness": math.nan, "best_so_far": best_so_far if best_so_far > -math.inf else math.nan})
    return rows


def cmd_export(results_dir, out_csv) -> int:
    path = Path(results_dir) / TRAJECTORY_FILE
    try:
        trajectory = Trajectory.read_jsonl(path)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot read trajectory {path}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if not any(e.ok for e in trajectory.entries()):
        print(f"error: trajectory {path} has no successfully evaluated individuals", file=sys.stderr)
        return EXIT_INVALID
    fields = ["generation", "mean_fitness", "std_fitness", "best_fitness", "best_so_far"]
    with open(out_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in export_rows(trajectory):
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return EXIT_OK


def cmd_validate(config_path, args=None) -> int:
    try:
        config = load_config(config_path, check=False)
        if args is not None:
            _apply_overrides(config, args)
        text = Path(config_path).read_text(encoding="utf-8")
        optimizee, optimizer = validate_config(config, text, str(config_path))
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"{config_path}: ok ({config.optimizee} [{optimizee.bounds.dimension} parameters] "
          f"optimized by {config.optimizer}, population {config.population_size}, "
          f"{config.generations} generations)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override the configured master seed")
    common.add_argument("--max-parallel", type=int, help="override the number of concurrent evaluations")
    common.add_argument("--generations", type=int, help="override the generation budget")
    common.add_argument("-v", "--verbose", action="store_true", help="log every generation")

    parser = argparse.ArgumentParser(prog="twoloop", description="Two-loop black-box parameter optimization.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run an experiment from a JSON config")
    p.add_argument("config")
    p = sub.add_parser("resume", parents=[common], help="continue an interrupted run")
    p.add_argument("results_dir")
    p = sub.add_parser("export", parents=[common], help="write per-generation fitness statistics as CSV")
    p.add_argument("results_dir")
    p.add_argument("out_csv")
    p = sub.add_parser("validate", parents=[common], help="check a config without running it")
    p.add_argument("config")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args.config, args)
    if args.command == "resume":
        return cmd_resume(args.results_dir, args)
    if args.command == "export":
        return cmd_export(args.results_dir, args.out_csv)
    return cmd_validate(args.config, args)


if __name__ == "__main__":
    sys.exit(main())
