"""Command-line interface: run scenarios, validate configs, aggregate results.

Exit codes: 0 success, 1 configuration/validation error, 2 runtime error.
"""

import argparse
import os
import sys
from dataclasses import replace

import yaml

from .config import config_to_dict, parse_config
from .errors import ConfigError, VisionFlockError
from .runlog import format_report, summarize, write_log
from .sim import run_scenario


def _cmd_run(args) -> int:
    config = parse_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.duration is not None:
        if args.duration <= 0:
            raise ConfigError(f"--duration must be > 0, got {args.duration}")
        config = replace(config, max_duration=args.duration)
    log = run_scenario(config)
    stem = os.path.splitext(os.path.basename(args.config))[0]
    out_dir = os.path.join(args.out, f"{stem}-seed{config.seed}")
    paths = write_log(log, out_dir)
    print(f"wrote {paths.steps_csv}")
    print(f"wrote {paths.summary_json}")
    if log.pair_distances.size:
        print(
            f"steps={len(log.times)} min_dist={log.pair_distances.min():.3f} "
            f"mean_dist={log.pair_distances.mean():.3f} collisions={log.collision_steps()}"
        )
    else:
        print(f"steps={len(log.times)} (single agent)")
    return 0


def _cmd_validate(args) -> int:
    config = parse_config(args.config)
    print(f"{args.config}: OK")
    print(yaml.safe_dump(config_to_dict(config), sort_keys=False).rstrip())
    return 0


def _cmd_summarize(args) -> int:
    summaries = []
    for root, _dirs, files in os.walk(args.directory):
        if "summary.json" in files:
            summaries.append(os.path.join(root, "summary.json"))
    summaries.sort()
    report = summarize(summaries)
    print(format_report(report))
    if args.out:
        import json

        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="visionflock",
        description="Vision-based flocking simulator: noisy detections, GM-PHD tracking, Reynolds control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write its logs")
    p_run.add_argument("config", help="scenario YAML file")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--out", default="runs", help="output directory root (default: runs)")
    p_run.add_argument("--duration", type=float, default=None, help="override max duration [s]")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="parse a scenario file and echo the resolved config")
    p_val.add_argument("config", help="scenario YAML file")
    p_val.set_defaults(func=_cmd_validate)

    p_sum = sub.add_parser("summarize", help="aggregate run summaries under a directory")
    p_sum.add_argument("directory", help="directory containing run output folders")
    p_sum.add_argument("--out", default=None, help="write the aggregate report JSON here")
    p_sum.set_defaults(func=_cmd_summarize)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (VisionFlockError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
