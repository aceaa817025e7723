"""Scenario configuration: schema, defaults, parsing, and canonical hashing.

Scenario files are YAML. Every field is optional except ``agent_count`` and
``migration.waypoints``; omitted fields take the defaults below (detection
probability 0.9, bearing noise 3 deg, one clutter return per frame over a
10 m arena, truncation 1e-5, merge threshold 0.5, at most 100 components,
separation gain 7, cohesion and migration gains 1, speed cutoff 0.5 m/s,
acceptance radius 3 m). Angles appear in config files in degrees and are
converted to radians on load. Unknown keys anywhere are an error.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np
import yaml

from .detection import DetectionNoiseModel
from .errors import ConfigError
from .flocking import FlockParams, MigrationPlan
from .tracker import TrackerParams

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully resolved simulation scenario."""

    agent_count: int
    noise: DetectionNoiseModel
    tracker: TrackerParams
    flock: FlockParams
    plan: MigrationPlan
    initial_positions: tuple[tuple[float, float], ...]
    headings: tuple[float, ...]
    physics_step: float = 0.02
    sensor_period: float = 0.2
    max_duration: float = 300.0
    velocity_tau: float = 0.3
    collision_radius: float = 0.5
    waypoint_mode: str = "shared"
    seed: int = 0

    def __post_init__(self):
        if self.agent_count < 1:
            raise ConfigError(f"agent_count must be >= 1, got {self.agent_count}")
        if self.physics_step <= 0:
            raise ConfigError("physics_step must be > 0")
        if self.sensor_period < self.physics_step:
            raise ConfigError("physics_step must not exceed sensor_period")
        if self.max_duration <= 0:
            raise ConfigError("max_duration must be > 0")
        if self.velocity_tau < 0:
            raise ConfigError("velocity_tau must be >= 0")
        if self.collision_radius <= 0:
            raise ConfigError("collision_radius must be > 0")
        if self.waypoint_mode not in ("shared", "independent"):
            raise ConfigError(f"waypoint_mode must be 'shared' or 'independent', got {self.waypoint_mode!r}")
        if len(self.initial_positions) != self.agent_count:
            raise ConfigError(
                f"initial_positions has {len(self.initial_positions)} entries "
                f"for agent_count {self.agent_count}"
            )
        if len(self.headings) != self.agent_count:
            raise ConfigError(
                f"headings has {len(self.headings)} entries for agent_count {self.agent_count}"
            )


def default_initial_positions(agent_count: int, spacing: float = 2.5) -> tuple:
    """Agents on a ring with nearest-neighbor spacing `spacing`, centered at origin."""
    if agent_count == 1:
        return ((0.0, 0.0),)
    radius = spacing / (2.0 * np.sin(np.pi / agent_count))
    pts = []
    for i in range(agent_count):
        ang = np.pi / 2.0 + 2.0 * np.pi * i / agent_count
        pts.append((float(radius * np.cos(ang)), float(radius * np.sin(ang))))
    return tuple(pts)


_TOP_KEYS = {
    "agent_count",
    "seed",
    "max_duration",
    "physics_step",
    "sensor_period",
    "velocity_tau",
    "collision_radius",
    "waypoint_mode",
    "initial_positions",
    "headings_deg",
    "noise",
    "tracker",
    "flocking",
    "migration",
}

_NOISE_KEYS = {
    "detection_probability",
    "sigma_bearing_deg",
    "range_noise_c0",
    "range_noise_c1",
    "clutter_rate",
    "arena_side",
    "latency",
}

_TRACKER_KEYS = {
    "survival_probability",
    "detection_probability",
    "process_noise_accel",
    "range_noise_c0",
    "range_noise_c1",
    "sigma_bearing_deg",
    "clutter_density",
    "birth_weight",
    "birth_sigma_pos",
    "birth_sigma_vel",
    "truncation_threshold",
    "merge_threshold",
    "max_components",
    "extraction_threshold",
    "extraction_dedup_radius",
    "extraction_max_speed",
}

_FLOCK_KEYS = {"k_sep", "k_coh", "k_mig", "v_max", "separation_exponent"}

_MIGRATION_KEYS = {"waypoints", "acceptance_radius", "cyclic"}


def _require_mapping(block, where: str) -> dict:
    if block is None:
        return {}
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a mapping")
    return block


def _reject_unknown(block: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")


def _get_number(block: dict, key: str, default, where: str, low=None, high=None, strict_low=False):
    value = block.get(key, default)
    if value is None:
        return None
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key} must be a number, got {value!r}") from None
    if low is not None and (value <= low if strict_low else value < low):
        bound = ">" if strict_low else ">="
        raise ConfigError(f"{where}.{key} must be {bound} {low}, got {value}")
    if high is not None and value > high:
        raise ConfigError(f"{where}.{key} must be <= {high}, got {value}")
    return value


def _parse_points(raw, where: str) -> tuple:
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ConfigError(f"{where} must be a non-empty list of [x, y] points")
    pts = []
    for i, item in enumerate(raw):
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise ConfigError(f"{where}[{i}] must be a pair [x, y]")
        pts.append((float(item[0]), float(item[1])))
    return tuple(pts)


def config_from_dict(raw: dict) -> ScenarioConfig:
    """Build and validate a ScenarioConfig from a plain dict."""
    raw = _require_mapping(raw, "scenario")
    _reject_unknown(raw, _TOP_KEYS, "scenario")

    if "agent_count" not in raw:
        raise ConfigError("agent_count is required")
    agent_count = raw["agent_count"]
    if not isinstance(agent_count, int) or agent_count < 1:
        raise ConfigError(f"agent_count must be a positive integer, got {agent_count!r}")

    noise_block = _require_mapping(raw.get("noise"), "noise")
    _reject_unknown(noise_block, _NOISE_KEYS, "noise")
    noise = DetectionNoiseModel(
        detection_probability=_get_number(
            noise_block, "detection_probability", 0.9, "noise", low=0.0, high=1.0
        ),
        sigma_bearing=np.radians(
            _get_number(noise_block, "sigma_bearing_deg", 3.0, "noise", low=0.0)
        ),
        range_noise_c0=_get_number(
            noise_block, "range_noise_c0", DetectionNoiseModel.range_noise_c0, "noise", low=0.0
        ),
        range_noise_c1=_get_number(
            noise_block, "range_noise_c1", DetectionNoiseModel.range_noise_c1, "noise", low=0.0
        ),
        clutter_rate=_get_number(noise_block, "clutter_rate", 1.0, "noise", low=0.0),
        arena_side=_get_number(noise_block, "arena_side", 10.0, "noise", low=0.0, strict_low=True),
        frame_period=_get_number(raw, "sensor_period", 0.2, "scenario", low=0.0, strict_low=True),
        latency=_get_number(noise_block, "latency", 0.0, "noise", low=0.0),
    )

    tracker_block = _require_mapping(raw.get("tracker"), "tracker")
    _reject_unknown(tracker_block, _TRACKER_KEYS, "tracker")
    default_kappa = noise.clutter_rate / noise.arena_side**2 if noise.clutter_rate > 0 else 1.0 / noise.arena_side**2
    max_components = tracker_block.get("max_components", 100)
    if not isinstance(max_components, int) or max_components < 1:
        raise ConfigError(f"tracker.max_components must be a positive integer, got {max_components!r}")
    tracker = TrackerParams(
        survival_probability=_get_number(
            tracker_block, "survival_probability", 1.0, "tracker", low=0.0, high=1.0
        ),
        detection_probability=_get_number(
            tracker_block, "detection_probability", 0.9, "tracker", low=0.0, high=1.0
        ),
        process_noise_accel=_get_number(
            tracker_block, "process_noise_accel", TrackerParams.process_noise_accel, "tracker", low=0.0
        ),
        range_noise_c0=_get_number(tracker_block, "range_noise_c0", noise.range_noise_c0, "tracker", low=0.0),
        range_noise_c1=_get_number(tracker_block, "range_noise_c1", noise.range_noise_c1, "tracker", low=0.0),
        sigma_bearing=np.radians(
            _get_number(tracker_block, "sigma_bearing_deg", float(np.degrees(noise.sigma_bearing)), "tracker", low=0.0)
        ),
        clutter_density=_get_number(tracker_block, "clutter_density", default_kappa, "tracker", low=0.0),
        birth_weight=_get_number(tracker_block, "birth_weight", 1e-5, "tracker", low=0.0),
        birth_sigma_pos=_get_number(tracker_block, "birth_sigma_pos", 1.0, "tracker", low=0.0, strict_low=True),
        birth_sigma_vel=_get_number(tracker_block, "birth_sigma_vel", 10.0, "tracker", low=0.0, strict_low=True),
        truncation_threshold=_get_number(tracker_block, "truncation_threshold", 1e-5, "tracker", low=0.0),
        merge_threshold=_get_number(tracker_block, "merge_threshold", 0.5, "tracker", low=0.0, strict_low=True),
        max_components=max_components,
        extraction_threshold=_get_number(
            tracker_block, "extraction_threshold", TrackerParams.extraction_threshold, "tracker", low=0.0
        ),
        extraction_dedup_radius=_get_number(
            tracker_block, "extraction_dedup_radius", TrackerParams.extraction_dedup_radius, "tracker", low=0.0
        ),
        extraction_max_speed=_get_number(
            tracker_block, "extraction_max_speed", TrackerParams.extraction_max_speed, "tracker", low=0.0
        ),
    )

    flock_block = _require_mapping(raw.get("flocking"), "flocking")
    _reject_unknown(flock_block, _FLOCK_KEYS, "flocking")
    flock = FlockParams(
        k_sep=_get_number(flock_block, "k_sep", 7.0, "flocking", low=0.0),
        k_coh=_get_number(flock_block, "k_coh", 1.0, "flocking", low=0.0),
        k_mig=_get_number(flock_block, "k_mig", 1.0, "flocking", low=0.0),
        v_max=_get_number(flock_block, "v_max", 0.5, "flocking", low=0.0, strict_low=True),
        separation_exponent=_get_number(flock_block, "separation_exponent", 1.0, "flocking"),
    )

    if "migration" not in raw or raw["migration"] is None:
        raise ConfigError("migration block with a waypoints list is required")
    mig_block = _require_mapping(raw["migration"], "migration")
    _reject_unknown(mig_block, _MIGRATION_KEYS, "migration")
    if "waypoints" not in mig_block:
        raise ConfigError("migration.waypoints is required")
    plan = MigrationPlan(
        waypoints=_parse_points(mig_block["waypoints"], "migration.waypoints"),
        acceptance_radius=_get_number(
            mig_block, "acceptance_radius", 3.0, "migration", low=0.0, strict_low=True
        ),
        cyclic=bool(mig_block.get("cyclic", True)),
    )

    if "initial_positions" in raw and raw["initial_positions"] is not None:
        initial = _parse_points(raw["initial_positions"], "initial_positions")
    else:
        initial = default_initial_positions(agent_count)
    if "headings_deg" in raw and raw["headings_deg"] is not None:
        headings_raw = raw["headings_deg"]
        if not isinstance(headings_raw, (list, tuple)):
            raise ConfigError("headings_deg must be a list of angles in degrees")
        headings = tuple(float(np.radians(h)) for h in headings_raw)
    else:
        headings = tuple(0.0 for _ in range(agent_count))

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")

    return ScenarioConfig(
        agent_count=agent_count,
        noise=noise,
        tracker=tracker,
        flock=flock,
        plan=plan,
        initial_positions=initial,
        headings=headings,
        physics_step=_get_number(raw, "physics_step", 0.02, "scenario", low=0.0, strict_low=True),
        sensor_period=_get_number(raw, "sensor_period", 0.2, "scenario", low=0.0, strict_low=True),
        max_duration=_get_number(raw, "max_duration", 300.0, "scenario", low=0.0, strict_low=True),
        velocity_tau=_get_number(raw, "velocity_tau", 0.3, "scenario", low=0.0),
        collision_radius=_get_number(raw, "collision_radius", 0.5, "scenario", low=0.0, strict_low=True),
        waypoint_mode=raw.get("waypoint_mode", "shared"),
        seed=seed,
    )


def parse_config(path) -> ScenarioConfig:
    """Load and validate a scenario YAML file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raise ConfigError(f"{path}: empty scenario file")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: scenario file must contain a mapping")
    try:
        return config_from_dict(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def config_to_dict(config: ScenarioConfig) -> dict:
    """Serialize a config to the same schema parse_config accepts."""
    return {
        "agent_count": config.agent_count,
        "seed": config.seed,
        "max_duration": config.max_duration,
        "physics_step": config.physics_step,
        "sensor_period": config.sensor_period,
        "velocity_tau": config.velocity_tau,
        "collision_radius": config.collision_radius,
        "waypoint_mode": config.waypoint_mode,
        "initial_positions": [list(p) for p in config.initial_positions],
        "headings_deg": [float(np.degrees(h)) for h in config.headings],
        "noise": {
            "detection_probability": config.noise.detection_probability,
            "sigma_bearing_deg": float(np.degrees(config.noise.sigma_bearing)),
            "range_noise_c0": config.noise.range_noise_c0,
            "range_noise_c1": config.noise.range_noise_c1,
            "clutter_rate": config.noise.clutter_rate,
            "arena_side": config.noise.arena_side,
            "latency": config.noise.latency,
        },
        "tracker": {
            "survival_probability": config.tracker.survival_probability,
            "detection_probability": config.tracker.detection_probability,
            "process_noise_accel": config.tracker.process_noise_accel,
            "range_noise_c0": config.tracker.range_noise_c0,
            "range_noise_c1": config.tracker.range_noise_c1,
            "sigma_bearing_deg": float(np.degrees(config.tracker.sigma_bearing)),
            "clutter_density": config.tracker.clutter_density,
            "birth_weight": config.tracker.birth_weight,
            "birth_sigma_pos": config.tracker.birth_sigma_pos,
            "birth_sigma_vel": config.tracker.birth_sigma_vel,
            "truncation_threshold": config.tracker.truncation_threshold,
            "merge_threshold": config.tracker.merge_threshold,
            "max_components": config.tracker.max_components,
            "extraction_threshold": config.tracker.extraction_threshold,
            "extraction_dedup_radius": config.tracker.extraction_dedup_radius,
            "extraction_max_speed": config.tracker.extraction_max_speed,
        },
        "flocking": {
            "k_sep": config.flock.k_sep,
            "k_coh": config.flock.k_coh,
            "k_mig": config.flock.k_mig,
            "v_max": config.flock.v_max,
            "separation_exponent": config.flock.separation_exponent,
        },
        "migration": {
            "waypoints": [list(p) for p in config.plan.waypoints],
            "acceptance_radius": config.plan.acceptance_radius,
            "cyclic": config.plan.cyclic,
        },
    }


def serialize_config(config: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(config), fh, sort_keys=False)


def config_hash(config: ScenarioConfig) -> str:
    """Stable hash of the fully resolved config (seed excluded)."""
    payload = config_to_dict(config)
    payload.pop("seed")
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
