"""Run-log persistence: deterministic CSV + JSON outputs and aggregation.

A run produces two files in its output directory:

``steps.csv``
    Comment header (schema version, config hash, seed), one column-name row,
    then one row per physics step: ``time``, per-agent
    ``a<i>_px, a<i>_py, a<i>_vx, a<i>_vy, a<i>_cmd_x, a<i>_cmd_y, a<i>_ospa,
    a<i>_card``, then pairwise distances ``d_<i>_<j>`` in lexicographic pair
    order (i < j). All numbers carry 9 significant digits; the summary is
    computed from the same rounded values so it can be recomputed exactly
    from the CSV.

``summary.json``
    Distance statistics, collision count, waypoint completions, OSPA
    quantiles, the config hash, and the wall-clock time. Identical inputs
    reproduce identical files except for the ``wall_clock_s`` field.
"""

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, StatsError
from .metrics import inter_agent_stats
from .sim import MetricsLog

SCHEMA_VERSION = 1


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _round9(x: float) -> float:
    return float(_fmt(x))


@dataclass(frozen=True)
class RunLogPaths:
    steps_csv: str
    summary_json: str


def _column_names(agent_count: int, pair_labels) -> list[str]:
    cols = ["time"]
    for i in range(agent_count):
        cols += [
            f"a{i}_px",
            f"a{i}_py",
            f"a{i}_vx",
            f"a{i}_vy",
            f"a{i}_cmd_x",
            f"a{i}_cmd_y",
            f"a{i}_ospa",
            f"a{i}_card",
        ]
    cols += [f"d_{i}_{j}" for i, j in pair_labels]
    return cols


def write_log(log: MetricsLog, out_dir) -> RunLogPaths:
    """Persist a metrics log; returns the created file paths."""
    os.makedirs(out_dir, exist_ok=True)
    steps_path = os.path.join(out_dir, "steps.csv")
    summary_path = os.path.join(out_dir, "summary.json")

    n = log.agent_count
    steps = len(log.times)
    pair_labels = log.pair_labels

    lines = [
        f"# schema_version: {SCHEMA_VERSION}",
        f"# config_hash: {log.config_hash}",
        f"# seed: {log.seed}",
        ",".join(_column_names(n, pair_labels)),
    ]
    rounded_dists = np.empty_like(log.pair_distances)
    for k in range(steps):
        cells = [_fmt(log.times[k])]
        for i in range(n):
            cells += [
                _fmt(log.positions[k, i, 0]),
                _fmt(log.positions[k, i, 1]),
                _fmt(log.velocities[k, i, 0]),
                _fmt(log.velocities[k, i, 1]),
                _fmt(log.commands[k, i, 0]),
                _fmt(log.commands[k, i, 1]),
                _fmt(log.ospa[k, i]),
                _fmt(log.cardinality[k, i]),
            ]
        dist_cells = [_fmt(d) for d in log.pair_distances[k]]
        rounded_dists[k] = [float(c) for c in dist_cells]
        cells += dist_cells
        lines.append(",".join(cells))
    with open(steps_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    if rounded_dists.size:
        stats = inter_agent_stats(rounded_dists)
        min_distance = _round9(stats.min_distance)
        mean_distance = _round9(stats.mean_distance)
        collision_count = int(np.sum(np.any(rounded_dists < log.collision_radius, axis=1)))
    else:
        min_distance = None
        mean_distance = None
        collision_count = 0
    ospa_vals = np.array([[_round9(v) for v in row] for row in log.ospa]).reshape(steps, -1)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": log.config_hash,
        "seed": log.seed,
        "agent_count": n,
        "steps": steps,
        "duration": _round9(float(log.times[-1])) if steps else 0.0,
        "min_distance": min_distance,
        "mean_distance": mean_distance,
        "collision_count": collision_count,
        "waypoint_completions": log.waypoint_advances,
        "ospa_median": _round9(float(np.median(ospa_vals))) if ospa_vals.size else None,
        "ospa_p90": _round9(float(np.quantile(ospa_vals, 0.9))) if ospa_vals.size else None,
        "mean_cardinality": _round9(float(np.mean(log.cardinality))) if steps else None,
        "wall_clock_s": round(log.wall_clock_s, 6),
    }
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return RunLogPaths(steps_csv=steps_path, summary_json=summary_path)


def read_steps(path):
    """Read a steps.csv back: (header dict, column names, data array)."""
    header = {}
    with open(path, "r", encoding="utf-8") as fh:
        line = fh.readline()
        while line.startswith("#"):
            key, _, value = line[1:].partition(":")
            header[key.strip()] = value.strip()
            line = fh.readline()
        columns = line.strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2) if line else np.empty((0, 0))
    if int(header.get("schema_version", -1)) != SCHEMA_VERSION:
        raise ConfigError(f"{path}: schema_version {header.get('schema_version')} != {SCHEMA_VERSION}")
    return header, columns, data


def read_summary(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    if summary.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"{path}: schema_version {summary.get('schema_version')} != {SCHEMA_VERSION}"
        )
    return summary


def _bootstrap_ci(values, rng_seed: int = 0, n_resamples: int = 2000, level: float = 0.95):
    """Percentile bootstrap interval for the mean of `values`."""
    vals = np.asarray(values, dtype=float)
    if len(vals) < 2:
        return (float(vals[0]), float(vals[0])) if len(vals) else (math.nan, math.nan)
    rng = np.random.default_rng(rng_seed)
    idx = rng.integers(0, len(vals), size=(n_resamples, len(vals)))
    means = vals[idx].mean(axis=1)
    lo, hi = np.quantile(means, [(1 - level) / 2, 1 - (1 - level) / 2])
    return float(lo), float(hi)


def summarize(summary_paths, rng_seed: int = 0) -> dict:
    """Aggregate several runs' summaries into one report.

    All runs must share the schema version. Distance aggregates include a 95%
    bootstrap interval on the mean of per-run means when two or more runs are
    given.

    Raises:
        StatsError: no input paths.
        ConfigError: schema version mismatch.
    """
    paths = list(summary_paths)
    if not paths:
        raise StatsError("summarize needs at least one run summary")
    runs = [read_summary(p) for p in paths]
    mins = [r["min_distance"] for r in runs if r["min_distance"] is not None]
    means = [r["mean_distance"] for r in runs if r["mean_distance"] is not None]
    ospa_medians = [r["ospa_median"] for r in runs if r["ospa_median"] is not None]
    report = {
        "schema_version": SCHEMA_VERSION,
        "runs": len(runs),
        "seeds": [r["seed"] for r in runs],
        "config_hashes": sorted({r["config_hash"] for r in runs}),
        "collisions_total": int(sum(r["collision_count"] for r in runs)),
        "waypoint_completions_total": int(sum(r["waypoint_completions"] for r in runs)),
    }
    if mins:
        report["min_distance"] = {
            "min": float(np.min(mins)),
            "mean": float(np.mean(mins)),
            "max": float(np.max(mins)),
        }
    if means:
        lo, hi = _bootstrap_ci(means, rng_seed=rng_seed)
        report["mean_distance"] = {
            "mean": float(np.mean(means)),
            "min": float(np.min(means)),
            "max": float(np.max(means)),
            "ci95": [lo, hi],
        }
    if ospa_medians:
        report["ospa_median"] = {
            "mean": float(np.mean(ospa_medians)),
            "min": float(np.min(ospa_medians)),
            "max": float(np.max(ospa_medians)),
        }
    return report


def format_report(report: dict) -> str:
    """Human-readable table for a summarize() report."""
    rows = [
        ("runs", str(report["runs"])),
        ("collisions (total steps)", str(report["collisions_total"])),
        ("waypoint completions", str(report["waypoint_completions_total"])),
    ]
    if "min_distance" in report:
        m = report["min_distance"]
        rows.append(("min distance [m] (min/mean/max)", f"{m['min']:.3f} / {m['mean']:.3f} / {m['max']:.3f}"))
    if "mean_distance" in report:
        m = report["mean_distance"]
        rows.append(("mean distance [m] (mean)", f"{m['mean']:.3f}"))
        rows.append(("mean distance 95% CI", f"[{m['ci95'][0]:.3f}, {m['ci95'][1]:.3f}]"))
    if "ospa_median" in report:
        m = report["ospa_median"]
        rows.append(("ospa median [m] (min/mean/max)", f"{m['min']:.3f} / {m['mean']:.3f} / {m['max']:.3f}"))
    width = max(len(label) for label, _ in rows)
    return "\n".join(f"{label.ljust(width)}  {value}" for label, value in rows)
