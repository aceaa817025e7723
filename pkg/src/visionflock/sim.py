"""Decentralized swarm simulation: ground-truth world plus per-agent pipelines.

Every agent owns an isolated sensing/tracking/control pipeline fed only by its
own noisy sensor frames and its own pose; there is no code path from one
agent's pipeline to another agent's state. The world integrates all held
velocity commands on a fixed physics step with a first-order velocity lag,
while sensor frames arrive on a coarser period (optionally delayed by a
constant latency). The shared migration plan advances for everyone as soon as
any agent enters the acceptance radius (an independent per-agent trigger mode
is available for ablation).

Runs are deterministic: all randomness flows from per-agent child streams of
the scenario seed, and results do not depend on agent iteration order.
"""

import time as _time
from dataclasses import dataclass, field, replace

import numpy as np

from .config import ScenarioConfig, config_hash
from .detection import generate_frame
from .errors import SimulationAbort
from .flocking import MigrationPlan, command, saturate
from .metrics import ospa_distance
from .numeric import rot2
from .tracker import GmPhdTracker, expected_cardinality

OSPA_CUTOFF = 2.0
OSPA_ORDER = 1.0


@dataclass
class WorldState:
    """Ground-truth planar agent states at one instant."""

    time: float
    positions: np.ndarray  # (N, 2)
    velocities: np.ndarray  # (N, 2)
    headings: np.ndarray  # (N,), fixed over a run

    def copy(self) -> "WorldState":
        return WorldState(
            self.time, self.positions.copy(), self.velocities.copy(), self.headings.copy()
        )


def step(world: WorldState, commands: np.ndarray, tau: float, dt: float) -> WorldState:
    """Advance the world one physics step.

    Velocities follow a first-order response toward the commanded values
    (``tau == 0`` means ideal tracking), then positions integrate the new
    velocities. Headings are constant.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    cmds = np.asarray(commands, dtype=float).reshape(world.positions.shape)
    if tau == 0.0:
        velocities = cmds.copy()
    else:
        velocities = world.velocities + (dt / tau) * (cmds - world.velocities)
    positions = world.positions + velocities * dt
    return WorldState(world.time + dt, positions, velocities, world.headings.copy())


class AgentPipeline:
    """One agent's detector simulation, tracker, and controller.

    The only inputs are the agent's own relative ground truth (handed in by
    the world when a frame is captured), its own pose, and its own RNG stream.
    """

    def __init__(self, index: int, config: ScenarioConfig, rng: np.random.Generator):
        self.index = index
        self.config = config
        self.rng = rng
        self.tracker = GmPhdTracker(config.tracker)
        self.pending: list = []  # frames waiting for their emit time
        self.last_pose: tuple[float, np.ndarray] | None = None  # (frame_time, position)
        self.command_body = np.zeros(2)
        self.last_estimates: list = []
        self.last_ospa: float | None = None

    def sense(self, rel_positions_body, t: float, own_position: np.ndarray) -> None:
        """Capture a frame of the true relative neighbor positions."""
        frame = generate_frame(rel_positions_body, self.config.noise, self.rng, frame_time=t)
        self.pending.append((frame, own_position.copy()))

    def process_due(self, t: float, heading: float, migration_rel_body, truth_rel_body) -> bool:
        """Run the tracker on every frame whose emit time has arrived.

        Recomputes the held command when at least one frame was processed.
        Returns True when the command changed. ``truth_rel_body`` is used only
        to score OSPA, never for control.
        """
        processed = False
        while self.pending and self.pending[0][0].emit_time <= t + 1e-12:
            frame, pose = self.pending.pop(0)
            body_rot = rot2(-heading)
            if self.last_pose is None:
                ego_u = (0.0, 0.0)
            else:
                t_prev, pos_prev = self.last_pose
                dt = frame.frame_time - t_prev
                ego_world = (pose - pos_prev) / dt
                ego_u = tuple(body_rot @ ego_world)
            self.last_estimates = self.tracker.step(frame, ego_u)
            self.last_pose = (frame.frame_time, pose)
            processed = True
        if processed:
            neighbor_positions = [est.position for est in self.last_estimates]
            self.command_body = command(neighbor_positions, migration_rel_body, self.config.flock)
            self.last_ospa = ospa_distance(
                np.array(neighbor_positions).reshape(-1, 2),
                np.asarray(truth_rel_body, dtype=float).reshape(-1, 2),
                cutoff=OSPA_CUTOFF,
                order=OSPA_ORDER,
            )
        return processed


@dataclass
class MetricsLog:
    """Per-step simulation record plus run-level metadata."""

    agent_count: int
    physics_step: float
    sensor_period: float
    collision_radius: float
    config_hash: str
    seed: int
    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    positions: np.ndarray = field(default_factory=lambda: np.empty((0, 0, 2)))
    velocities: np.ndarray = field(default_factory=lambda: np.empty((0, 0, 2)))
    commands: np.ndarray = field(default_factory=lambda: np.empty((0, 0, 2)))
    ospa: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    cardinality: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    pair_distances: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    waypoint_index: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    tracks: list = field(default_factory=list)  # per step: list of (n_i, 4) arrays
    waypoint_advances: int = 0
    wall_clock_s: float = 0.0

    @property
    def pair_labels(self) -> list[tuple[int, int]]:
        n = self.agent_count
        return [(i, j) for i in range(n) for j in range(i + 1, n)]

    def collision_steps(self) -> int:
        if self.pair_distances.shape[1] == 0:
            return 0
        return int(np.sum(np.any(self.pair_distances < self.collision_radius, axis=1)))


def _pairwise_distances(positions: np.ndarray) -> np.ndarray:
    n = len(positions)
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            out.append(np.hypot(*(positions[i] - positions[j])))
    return np.asarray(out)


class Simulation:
    """Stepwise scenario runner; exposes pipelines for instrumentation."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        n = config.agent_count
        self.world = WorldState(
            time=0.0,
            positions=np.array(config.initial_positions, dtype=float).reshape(n, 2),
            velocities=np.zeros((n, 2)),
            headings=np.array(config.headings, dtype=float),
        )
        streams = [np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(n)]
        self.pipelines = [AgentPipeline(i, config, streams[i]) for i in range(n)]
        self.plans = [config.plan for _ in range(n)]
        self.next_sensor_time = 0.0
        self.step_index = 0
        self._rows: list = []
        self.waypoint_advances = 0
        self.finished = False

    def _body_rel_truth(self, agent: int) -> np.ndarray:
        """True relative positions of all other agents in an agent's body frame."""
        pos = self.world.positions
        rel = np.delete(pos, agent, axis=0) - pos[agent]
        return rel @ rot2(-self.world.headings[agent]).T

    def _advance_plans(self) -> None:
        if self.config.waypoint_mode == "shared":
            trigger = any(
                not plan.done
                and np.hypot(*(plan.current_waypoint - pos)) < plan.acceptance_radius
                for plan, pos in zip(self.plans, self.world.positions)
            )
            if trigger:
                self.plans = [plan.advanced() if not plan.done else plan for plan in self.plans]
                self.waypoint_advances += 1
        else:
            advanced = []
            bumped = False
            for plan, pos in zip(self.plans, self.world.positions):
                new_plan = plan
                if not plan.done:
                    offset = plan.current_waypoint - pos
                    if np.hypot(offset[0], offset[1]) < plan.acceptance_radius:
                        new_plan = plan.advanced()
                        bumped = True
                advanced.append(new_plan)
            self.plans = advanced
            if bumped:
                self.waypoint_advances += 1

    def step_once(self) -> None:
        """One physics step: sense (if due), track/control, integrate, record."""
        cfg = self.config
        t = self.world.time

        if t >= self.next_sensor_time - 1e-12:
            for i, pipe in enumerate(self.pipelines):
                pipe.sense(self._body_rel_truth(i), t, self.world.positions[i])
            self.next_sensor_time += cfg.sensor_period

        for i, pipe in enumerate(self.pipelines):
            heading = self.world.headings[i]
            mig_rel = rot2(-heading) @ (self.plans[i].current_waypoint - self.world.positions[i])
            pipe.process_due(t, heading, mig_rel, self._body_rel_truth(i))

        commands_world = np.stack(
            [
                rot2(self.world.headings[i]) @ self.pipelines[i].command_body
                for i in range(cfg.agent_count)
            ]
        )
        self.world = step(self.world, commands_world, cfg.velocity_tau, cfg.physics_step)
        if not np.all(np.isfinite(self.world.positions)) or not np.all(
            np.isfinite(self.world.velocities)
        ):
            bad = np.nonzero(~np.all(np.isfinite(self.world.positions), axis=1))[0]
            agent = int(bad[0]) if len(bad) else None
            raise SimulationAbort("non-finite world state", time=self.world.time, agent=agent)

        self._advance_plans()

        ospa_row = np.array(
            [p.last_ospa if p.last_ospa is not None else OSPA_CUTOFF for p in self.pipelines]
        )
        card_row = np.array([expected_cardinality(p.tracker.intensity) for p in self.pipelines])
        tracks_row = [
            np.array([np.concatenate([e.position, e.velocity]) for e in p.last_estimates]).reshape(
                -1, 4
            )
            for p in self.pipelines
        ]
        self._rows.append(
            (
                self.world.time,
                self.world.positions.copy(),
                self.world.velocities.copy(),
                commands_world,
                ospa_row,
                card_row,
                _pairwise_distances(self.world.positions),
                self.plans[0].current_index,
                tracks_row,
            )
        )
        self.step_index += 1
        if all(plan.done for plan in self.plans):
            self.finished = True

    def run(self) -> MetricsLog:
        start = _time.perf_counter()
        n_steps = int(np.floor(self.config.max_duration / self.config.physics_step + 1e-9))
        while self.step_index < n_steps and not self.finished:
            self.step_once()
        log = MetricsLog(
            agent_count=self.config.agent_count,
            physics_step=self.config.physics_step,
            sensor_period=self.config.sensor_period,
            collision_radius=self.config.collision_radius,
            config_hash=config_hash(self.config),
            seed=self.config.seed,
        )
        if self._rows:
            log.times = np.array([r[0] for r in self._rows])
            log.positions = np.stack([r[1] for r in self._rows])
            log.velocities = np.stack([r[2] for r in self._rows])
            log.commands = np.stack([r[3] for r in self._rows])
            log.ospa = np.stack([r[4] for r in self._rows])
            log.cardinality = np.stack([r[5] for r in self._rows])
            log.pair_distances = np.stack([r[6] for r in self._rows]).reshape(len(self._rows), -1)
            log.waypoint_index = np.array([r[7] for r in self._rows], dtype=int)
            log.tracks = [r[8] for r in self._rows]
        log.waypoint_advances = self.waypoint_advances
        log.wall_clock_s = _time.perf_counter() - start
        return log


def run_scenario(config: ScenarioConfig) -> MetricsLog:
    """Execute a scenario to completion and return its metrics log."""
    return Simulation(config).run()
