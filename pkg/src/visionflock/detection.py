"""Statistical sensor model standing in for the onboard visual detector.

Produces per-frame sets of range/bearing measurements from ground-truth
relative positions: Bernoulli missed detections, distance-dependent Gaussian
range noise, Gaussian bearing noise, Poisson clutter uniform over a square
arena, a fixed frame period, and a constant processing latency.

Default range-noise coefficients come from a synthetic study of the
bounding-box geometry (see scripts/fit_range_noise.py): boxes of a 0.5 m cube
were jittered by one pixel per edge and inverted back to range; the resulting
error spread grows roughly linearly over 1-8 m and fits sigma_d(d) = c0 + c1*d
with c0 ~ 0.0, c1 ~ 0.06.
"""

from dataclasses import dataclass

import numpy as np

from .camera import RangeBearing
from .errors import ConfigError
from .numeric import wrap_angle

RANGE_NOISE_C0_DEFAULT = 0.0
RANGE_NOISE_C1_DEFAULT = 0.06


@dataclass(frozen=True)
class DetectionNoiseModel:
    """Knobs of the simulated detector.

    Attributes:
        detection_probability: chance each true neighbor yields a measurement.
        sigma_bearing: bearing noise standard deviation, radians.
        range_noise_c0: range noise floor, meters.
        range_noise_c1: range noise growth per meter of distance.
        clutter_rate: expected false returns per frame (Poisson mean).
        arena_side: side of the square clutter arena centered on the observer, meters.
        frame_period: seconds between frames.
        latency: constant delay between capture and availability, seconds.
    """

    detection_probability: float = 0.9
    sigma_bearing: float = float(np.radians(3.0))
    range_noise_c0: float = RANGE_NOISE_C0_DEFAULT
    range_noise_c1: float = RANGE_NOISE_C1_DEFAULT
    clutter_rate: float = 1.0
    arena_side: float = 10.0
    frame_period: float = 0.2
    latency: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.detection_probability <= 1.0:
            raise ConfigError(f"detection_probability must be in [0, 1], got {self.detection_probability}")
        for name in ("sigma_bearing", "range_noise_c0", "range_noise_c1", "clutter_rate", "latency"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.arena_side <= 0:
            raise ConfigError(f"arena_side must be > 0, got {self.arena_side}")
        if self.frame_period <= 0:
            raise ConfigError(f"frame_period must be > 0, got {self.frame_period}")

    @property
    def clutter_density(self) -> float:
        """Spatial clutter intensity: clutter_rate spread over the arena area."""
        return self.clutter_rate / (self.arena_side**2)


@dataclass(frozen=True)
class SensorFrame:
    """One detector output: a set of measurements sharing a capture time."""

    measurements: tuple[RangeBearing, ...]
    frame_time: float
    emit_time: float

    def __post_init__(self):
        if self.emit_time < self.frame_time:
            raise ConfigError("emit_time must be >= frame_time")


def range_noise_sigma(model: DetectionNoiseModel, distance):
    """Range noise standard deviation at a given distance: c0 + c1 * d."""
    return model.range_noise_c0 + model.range_noise_c1 * np.asarray(distance, dtype=float)


def _truncated_range(true_range: float, sigma: float, rng: np.random.Generator) -> float:
    """Gaussian range perturbation resampled until positive (no atom at zero)."""
    if sigma == 0.0:
        return true_range
    while True:
        noisy = true_range + sigma * rng.standard_normal()
        if noisy > 0.0:
            return noisy


def generate_frame(
    true_relative_positions,
    model: DetectionNoiseModel,
    rng: np.random.Generator,
    frame_time: float = 0.0,
) -> SensorFrame:
    """Draw one noisy detector frame for the focal agent.

    Each true neighbor is kept with probability ``detection_probability`` and
    perturbed in range (sigma_d(d), truncated positive) and bearing
    (sigma_bearing, wrapped). Poisson(clutter_rate) false returns are placed
    uniformly over the arena square. Measurement order is shuffled.
    Deterministic given the generator state.
    """
    measurements = []
    for pos in true_relative_positions:
        x, y = float(pos[0]), float(pos[1])
        d = float(np.hypot(x, y))
        if d <= 0.0:
            raise ConfigError("true relative position coincides with the observer")
        if rng.random() >= model.detection_probability:
            continue
        noisy_d = _truncated_range(d, float(range_noise_sigma(model, d)), rng)
        noisy_b = wrap_angle(np.arctan2(y, x) + model.sigma_bearing * rng.standard_normal())
        measurements.append(RangeBearing(noisy_d, noisy_b, timestamp=frame_time))

    n_clutter = int(rng.poisson(model.clutter_rate))
    half = model.arena_side / 2.0
    for _ in range(n_clutter):
        while True:
            cx, cy = rng.uniform(-half, half, size=2)
            d = float(np.hypot(cx, cy))
            if d > 0.0:
                break
        measurements.append(RangeBearing(d, float(np.arctan2(cy, cx)), timestamp=frame_time))

    order = rng.permutation(len(measurements))
    measurements = tuple(measurements[i] for i in order)
    return SensorFrame(
        measurements=measurements,
        frame_time=frame_time,
        emit_time=frame_time + model.latency,
    )
