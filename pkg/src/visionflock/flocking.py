"""Reynolds-style flocking command and migration waypoint management.

The velocity command is the sum of three weighted terms computed from the
tracked neighbor positions (focal body frame) and a migration point:

* separation, pushing away from each neighbor along ``-r / |r|^e`` (the
  exponent defaults to 1, i.e. unit-magnitude repulsion; an exponent of 2
  gives inverse-distance repulsion, which balances cohesion at a spacing of
  ``sqrt(k_sep / k_coh)`` instead of ``k_sep / k_coh``);
* cohesion, pulling toward the mean neighbor offset;
* migration, a unit pull toward the current waypoint.

The summed command is speed-limited to ``v_max`` preserving direction.
A lone agent (no neighbors) has zero separation and cohesion and simply
migrates. All functions are pure; waypoint plans update value-to-value.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, GeometryDomainError


@dataclass(frozen=True)
class FlockParams:
    """Gains, speed cutoff, and the separation-law exponent."""

    k_sep: float = 7.0
    k_coh: float = 1.0
    k_mig: float = 1.0
    v_max: float = 0.5
    separation_exponent: float = 1.0

    def __post_init__(self):
        for name in ("k_sep", "k_coh", "k_mig"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.v_max <= 0:
            raise ConfigError(f"v_max must be > 0, got {self.v_max}")


@dataclass(frozen=True)
class MigrationPlan:
    """Ordered waypoint list with a shared acceptance radius."""

    waypoints: tuple[tuple[float, float], ...]
    acceptance_radius: float = 3.0
    cyclic: bool = True
    current_index: int = 0
    done: bool = False

    def __post_init__(self):
        if len(self.waypoints) < 1:
            raise ConfigError("migration plan needs at least one waypoint")
        if self.acceptance_radius <= 0:
            raise ConfigError(f"acceptance_radius must be > 0, got {self.acceptance_radius}")
        if not 0 <= self.current_index < len(self.waypoints):
            raise ConfigError(f"current_index {self.current_index} out of range")

    @property
    def current_waypoint(self) -> np.ndarray:
        return np.asarray(self.waypoints[self.current_index], dtype=float)

    def advanced(self) -> "MigrationPlan":
        """Move to the next waypoint, wrapping when cyclic, else flagging done."""
        nxt = self.current_index + 1
        if nxt >= len(self.waypoints):
            if self.cyclic:
                return replace(self, current_index=0)
            return replace(self, done=True)
        return replace(self, current_index=nxt)


def _as_neighbor_array(neighbors) -> np.ndarray:
    if len(neighbors) == 0:
        return np.empty((0, 2))
    arr = np.asarray(neighbors, dtype=float).reshape(-1, 2)
    return arr


def reynolds_terms(neighbors, migration_rel, params: FlockParams):
    """Separation, cohesion, and migration velocity terms.

    Args:
        neighbors: relative planar neighbor positions, body frame.
        migration_rel: current waypoint relative to the body frame.
        params: gains and exponent.

    Returns:
        (v_sep, v_coh, v_mig) planar vectors. Empty neighbor sets give zero
        separation and cohesion.

    Raises:
        GeometryDomainError: a neighbor sits exactly at the origin.
    """
    rel = _as_neighbor_array(neighbors)
    if len(rel):
        norms = np.hypot(rel[:, 0], rel[:, 1])
        if np.any(norms == 0.0):
            raise GeometryDomainError("neighbor at zero distance (collision state)")
        v_sep = params.k_sep * np.mean(-rel / norms[:, None] ** params.separation_exponent, axis=0)
        v_coh = params.k_coh * np.mean(rel, axis=0)
    else:
        v_sep = np.zeros(2)
        v_coh = np.zeros(2)
    mig = np.asarray(migration_rel, dtype=float)
    mig_norm = float(np.hypot(mig[0], mig[1]))
    if mig_norm > 0.0:
        v_mig = params.k_mig * mig / mig_norm
    else:
        v_mig = np.zeros(2)
    return v_sep, v_coh, v_mig


def command(neighbors, migration_rel, params: FlockParams) -> np.ndarray:
    """Final speed-limited velocity command (body frame)."""
    v_sep, v_coh, v_mig = reynolds_terms(neighbors, migration_rel, params)
    total = v_sep + v_coh + v_mig
    return saturate(total, params.v_max)


def saturate(velocity, v_max: float) -> np.ndarray:
    """Clamp a planar velocity to at most v_max, preserving direction."""
    v = np.asarray(velocity, dtype=float)
    speed = float(np.hypot(v[0], v[1]))
    if speed > v_max:
        return v * (v_max / speed)
    return v.copy()


def advance_waypoint(world_position, plan: MigrationPlan) -> MigrationPlan:
    """Advance the plan when the position is strictly inside the acceptance radius."""
    if plan.done:
        return plan
    pos = np.asarray(world_position, dtype=float)
    offset = plan.current_waypoint - pos
    if float(np.hypot(offset[0], offset[1])) < plan.acceptance_radius:
        return plan.advanced()
    return plan
