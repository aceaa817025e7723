"""Gaussian mixture PHD filter for decentralized multi-neighbor tracking.

Each agent runs one independent filter over the 4-D relative state
``[p_x, p_y, v_x, v_y]``: planar neighbor position in the focal agent's
(non-rotating, fixed-heading) body frame and the neighbor's velocity in the
same axes. The filter consumes range/bearing measurement sets and maintains a
weighted Gaussian mixture whose integral is the expected neighbor count.

Pipeline per frame: constant-velocity prediction with egomotion compensation,
adaptive birth of one low-weight component per measurement, an extended-Kalman
update against the nonlinear range/bearing model, then mixture maintenance
(truncate / merge / cap) and threshold extraction.

Egomotion: the focal agent moving with body-frame velocity u shifts every
relative position by -u*dt; the control input therefore enters the position
block with a negative sign and leaves the velocity block untouched.

Measurement model: ``h(x) = [hypot(p_x, p_y), atan2(p_y, p_x)]``, linearized
with the analytic Jacobian rows ``[p_x/d, p_y/d, 0, 0]`` and
``[-p_y/d^2, p_x/d^2, 0, 0]`` (validated against central finite differences).
Bearing innovations are wrapped to (-pi, pi]. Range noise in R is evaluated at
each measurement's own measured range. Covariance updates use the
Joseph-stabilized form.
"""

from dataclasses import dataclass, field

import numpy as np

from .camera import RangeBearing
from .detection import SensorFrame
from .errors import ConfigError, ContractError, NumericalError
from .numeric import wrap_angle

_LOG_2PI = np.log(2.0 * np.pi)
_TIME_TOL = 1e-9


@dataclass
class GaussianComponent:
    """One weighted Gaussian atom of the intensity."""

    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(4)
        self.cov = np.asarray(self.cov, dtype=float).reshape(4, 4)
        if self.weight < 0:
            raise ConfigError(f"component weight must be >= 0, got {self.weight}")


class Intensity:
    """Gaussian mixture intensity, stored as stacked arrays for speed.

    ``weights`` is (J,), ``means`` is (J, 4), ``covs`` is (J, 4, 4).
    ``last_time`` is the timestamp the mixture is valid for (None before the
    first frame).
    """

    __slots__ = ("weights", "means", "covs", "last_time")

    def __init__(self, weights, means, covs, last_time=None):
        self.weights = np.asarray(weights, dtype=float).reshape(-1)
        self.means = np.asarray(means, dtype=float).reshape(-1, 4)
        self.covs = np.asarray(covs, dtype=float).reshape(-1, 4, 4)
        if len(self.weights) != len(self.means) or len(self.weights) != len(self.covs):
            raise ConfigError("weights, means, covs must have matching lengths")
        self.last_time = last_time

    @classmethod
    def empty(cls, last_time=None) -> "Intensity":
        return cls(np.empty(0), np.empty((0, 4)), np.empty((0, 4, 4)), last_time)

    @classmethod
    def from_components(cls, components, last_time=None) -> "Intensity":
        if not components:
            return cls.empty(last_time)
        return cls(
            [c.weight for c in components],
            [c.mean for c in components],
            [c.cov for c in components],
            last_time,
        )

    @property
    def components(self) -> list[GaussianComponent]:
        return [
            GaussianComponent(float(w), m.copy(), P.copy())
            for w, m, P in zip(self.weights, self.means, self.covs)
        ]

    def __len__(self) -> int:
        return len(self.weights)

    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def validate(self, tol: float = 1e-9) -> None:
        """Check symmetry and positive-definiteness of every covariance."""
        if len(self) == 0:
            return
        asym = np.max(np.abs(self.covs - np.transpose(self.covs, (0, 2, 1))))
        if asym > tol:
            raise NumericalError(f"covariance asymmetry {asym:.3e} exceeds {tol:.1e}")
        try:
            np.linalg.cholesky(self.covs)
        except np.linalg.LinAlgError:
            for i, P in enumerate(self.covs):
                try:
                    np.linalg.cholesky(P)
                except np.linalg.LinAlgError:
                    raise NumericalError(f"component {i} covariance is not positive-definite") from None


@dataclass(frozen=True)
class TrackerParams:
    """GM-PHD filter parameters.

    ``merge_threshold`` bounds the squared Mahalanobis distance between a
    component and the cluster pivot (the standard mixture-maintenance form).
    The assumed measurement range noise follows the same affine law as the
    detector model: sigma_d(d) = range_noise_c0 + range_noise_c1 * d,
    evaluated at the measured range.
    """

    survival_probability: float = 1.0
    detection_probability: float = 0.9
    process_noise_accel: float = 0.1  # sigma_v, m/s^2
    range_noise_c0: float = 0.0
    range_noise_c1: float = 0.06
    sigma_bearing: float = float(np.radians(3.0))
    clutter_density: float = 0.01  # kappa, 1/m^2
    birth_weight: float = 1e-5
    birth_sigma_pos: float = 1.0
    birth_sigma_vel: float = 10.0
    truncation_threshold: float = 1e-5
    merge_threshold: float = 0.5
    max_components: int = 100
    extraction_threshold: float = 0.008
    extraction_dedup_radius: float = 0.6
    extraction_max_speed: float = 2.0
    origin_guard: float = 1e-6

    def __post_init__(self):
        for name in ("survival_probability", "detection_probability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {getattr(self, name)}")
        if self.truncation_threshold < 0:
            raise ConfigError("truncation_threshold must be >= 0")
        if self.merge_threshold <= 0:
            raise ConfigError("merge_threshold must be > 0")
        if self.max_components < 1:
            raise ConfigError("max_components must be >= 1")
        for name in (
            "process_noise_accel",
            "range_noise_c0",
            "range_noise_c1",
            "sigma_bearing",
            "clutter_density",
            "birth_weight",
            "extraction_dedup_radius",
            "extraction_max_speed",
        ):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.birth_sigma_pos <= 0 or self.birth_sigma_vel <= 0:
            raise ConfigError("birth sigmas must be > 0")
        if self.origin_guard <= 0:
            raise ConfigError("origin_guard must be > 0")

    def range_sigma(self, distance):
        return self.range_noise_c0 + self.range_noise_c1 * np.asarray(distance, dtype=float)


@dataclass(frozen=True)
class EgoMotion:
    """Focal agent body-frame velocity over the elapsed interval."""

    velocity: tuple[float, float]
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")


@dataclass(frozen=True)
class TrackEstimate:
    """One extracted neighbor state."""

    position: np.ndarray
    velocity: np.ndarray
    weight: float


def _transition(dt: float) -> np.ndarray:
    F = np.eye(4)
    F[0, 2] = dt
    F[1, 3] = dt
    return F


def _process_noise(dt: float, sigma_v: float) -> np.ndarray:
    d2 = dt * dt
    d3 = d2 * dt
    d4 = d3 * dt
    q = sigma_v * sigma_v
    Q = np.zeros((4, 4))
    Q[0, 0] = Q[1, 1] = q * d4 / 4.0
    Q[2, 2] = Q[3, 3] = q * d2
    Q[0, 2] = Q[2, 0] = Q[1, 3] = Q[3, 1] = q * d3 / 2.0
    return Q


def predict(intensity: Intensity, ego: EgoMotion, params: TrackerParams) -> Intensity:
    """Constant-velocity prediction with egomotion compensation.

    Weights scale by the survival probability; means propagate through the
    transition matrix and shift by -u*dt in position; covariances pick up the
    white-acceleration process noise.

    Raises:
        NumericalError: a propagated covariance is not positive-definite.
    """
    new_time = None if intensity.last_time is None else intensity.last_time + ego.dt
    if len(intensity) == 0:
        return Intensity.empty(new_time)
    F = _transition(ego.dt)
    Q = _process_noise(ego.dt, params.process_noise_accel)
    means = intensity.means @ F.T
    means[:, 0] -= ego.velocity[0] * ego.dt
    means[:, 1] -= ego.velocity[1] * ego.dt
    covs = F @ intensity.covs @ F.T + Q
    covs = 0.5 * (covs + np.transpose(covs, (0, 2, 1)))
    try:
        np.linalg.cholesky(covs)
    except np.linalg.LinAlgError:
        for i, P in enumerate(covs):
            try:
                np.linalg.cholesky(P)
            except np.linalg.LinAlgError:
                raise NumericalError(
                    f"predicted covariance of component {i} is not positive-definite"
                ) from None
    weights = params.survival_probability * intensity.weights
    return Intensity(weights, means, covs, new_time)


def birth(measurements, params: TrackerParams) -> list[GaussianComponent]:
    """Adaptive birth: one component per measurement, zero initial velocity."""
    P = np.diag(
        [
            params.birth_sigma_pos**2,
            params.birth_sigma_pos**2,
            params.birth_sigma_vel**2,
            params.birth_sigma_vel**2,
        ]
    )
    out = []
    for z in measurements:
        mean = np.array([z.range * np.cos(z.bearing), z.range * np.sin(z.bearing), 0.0, 0.0])
        out.append(GaussianComponent(params.birth_weight, mean, P.copy()))
    return out


def extend(intensity: Intensity, components) -> Intensity:
    """Append components to a mixture, keeping its timestamp."""
    if not components:
        return intensity
    extra = Intensity.from_components(components, intensity.last_time)
    return Intensity(
        np.concatenate([intensity.weights, extra.weights]),
        np.concatenate([intensity.means, extra.means]),
        np.concatenate([intensity.covs, extra.covs]),
        intensity.last_time,
    )


def measurement_jacobian(state_mean, origin_guard: float = 1e-6) -> np.ndarray:
    """Analytic 2x4 Jacobian of the range/bearing model at a state mean.

    Raises:
        NumericalError: state closer than ``origin_guard`` to the observer.
    """
    m = np.asarray(state_mean, dtype=float).reshape(-1)
    px, py = m[0], m[1]
    d = np.hypot(px, py)
    if d <= origin_guard:
        raise NumericalError(f"state at distance {d:.3e} m is inside the origin guard")
    d2 = d * d
    return np.array(
        [
            [px / d, py / d, 0.0, 0.0],
            [-py / d2, px / d2, 0.0, 0.0],
        ]
    )


def _measurement_arrays(frame: SensorFrame) -> np.ndarray:
    return np.array([[z.range, z.bearing] for z in frame.measurements]).reshape(-1, 2)


def update(intensity: Intensity, frame: SensorFrame, params: TrackerParams) -> Intensity:
    """PHD measurement update.

    The input must be the predicted intensity for ``frame.frame_time`` with
    this frame's birth components already appended, so newborn components are
    corrected by the very measurements that spawned them. The output contains
    one missed-detection copy of every component plus one updated copy per
    (component, measurement) pair, with clutter in the weight normalizer.
    Components inside the origin guard are carried through unchanged.

    Raises:
        ContractError: intensity timestamp does not match the frame.
        NumericalError: singular innovation covariance.
    """
    if intensity.last_time is None or abs(intensity.last_time - frame.frame_time) > _TIME_TOL:
        raise ContractError(
            f"intensity at t={intensity.last_time} cannot absorb frame at t={frame.frame_time}"
        )
    J = len(intensity)
    if J == 0:
        return Intensity.empty(frame.frame_time)

    w = intensity.weights
    m = intensity.means
    P = intensity.covs
    p_d = params.detection_probability

    dist = np.hypot(m[:, 0], m[:, 1])
    guarded = dist <= params.origin_guard

    out_w = [np.where(guarded, w, (1.0 - p_d) * w)]
    out_m = [m]
    out_P = [P]

    Z = _measurement_arrays(frame)
    M = len(Z)
    ok = ~guarded
    if M > 0 and np.any(ok):
        wv, mv, Pv, dv = w[ok], m[ok], P[ok], dist[ok]
        Jv = len(wv)

        H = np.zeros((Jv, 2, 4))
        H[:, 0, 0] = mv[:, 0] / dv
        H[:, 0, 1] = mv[:, 1] / dv
        H[:, 1, 0] = -mv[:, 1] / dv**2
        H[:, 1, 1] = mv[:, 0] / dv**2
        eta = np.stack([dv, np.arctan2(mv[:, 1], mv[:, 0])], axis=1)  # (Jv, 2)

        PHt = Pv @ np.transpose(H, (0, 2, 1))  # (Jv, 4, 2)
        S_base = H @ PHt  # (Jv, 2, 2)

        sigma_d = np.asarray(params.range_sigma(Z[:, 0]), dtype=float)  # (M,)
        R = np.zeros((M, 2, 2))
        R[:, 0, 0] = sigma_d**2
        R[:, 1, 1] = params.sigma_bearing**2

        S = S_base[None, :, :, :] + R[:, None, :, :]  # (M, Jv, 2, 2)
        a, b = S[..., 0, 0], S[..., 0, 1]
        c, d = S[..., 1, 0], S[..., 1, 1]
        det = a * d - b * c
        if np.any(det <= 0.0) or not np.all(np.isfinite(det)):
            raise NumericalError("singular innovation covariance in update")
        Sinv = np.empty_like(S)
        Sinv[..., 0, 0] = d / det
        Sinv[..., 0, 1] = -b / det
        Sinv[..., 1, 0] = -c / det
        Sinv[..., 1, 1] = a / det

        innov = Z[:, None, :] - eta[None, :, :]  # (M, Jv, 2)
        innov[..., 1] = wrap_angle(innov[..., 1])

        K = PHt[None, :, :, :] @ Sinv  # (M, Jv, 4, 2)
        maha = np.einsum("mji,mjik,mjk->mj", innov, Sinv, innov)
        q = np.exp(-0.5 * (maha + np.log(det) + 2.0 * _LOG_2PI))  # N(z; eta, S)

        upd_m = mv[None, :, :] + np.einsum("mjik,mjk->mji", K, innov)  # (M, Jv, 4)
        A = -(K @ H)  # (M, Jv, 4, 4)
        A[..., 0, 0] += 1.0
        A[..., 1, 1] += 1.0
        A[..., 2, 2] += 1.0
        A[..., 3, 3] += 1.0
        KRKt = np.einsum("mjik,mkl,mjnl->mjin", K, R, K)
        upd_P = A @ Pv[None] @ np.transpose(A, (0, 1, 3, 2)) + KRKt
        upd_P = 0.5 * (upd_P + np.transpose(upd_P, (0, 1, 3, 2)))

        wq = p_d * wv[None, :] * q  # (M, Jv)
        denom = params.clutter_density + np.sum(wq, axis=1, keepdims=True)
        upd_w = wq / denom

        out_w.append(upd_w.reshape(-1))
        out_m.append(upd_m.reshape(-1, 4))
        out_P.append(upd_P.reshape(-1, 4, 4))

    return Intensity(
        np.concatenate(out_w),
        np.concatenate(out_m),
        np.concatenate(out_P),
        frame.frame_time,
    )


def _merge_cluster(w, m, P, idx) -> tuple[float, np.ndarray, np.ndarray]:
    """Moment-preserving merge of the components selected by idx."""
    cw = w[idx]
    total = float(np.sum(cw))
    mean = (cw @ m[idx]) / total
    diff = m[idx] - mean
    spread = np.einsum("j,ja,jb->ab", cw, diff, diff)
    cov = (np.einsum("j,jab->ab", cw, P[idx]) + spread) / total
    return total, mean, 0.5 * (cov + cov.T)


def prune(intensity: Intensity, params: TrackerParams) -> Intensity:
    """Mixture maintenance: truncate light components, merge close ones, cap.

    Components below the truncation threshold are dropped. Remaining
    components are merged greedily from the heaviest pivot, absorbing every
    component whose squared Mahalanobis distance to the pivot (under the
    component's own covariance) is within the merge threshold; merging
    preserves the mixture's total weight and first two moments. At most
    ``max_components`` heaviest results are kept.
    """
    keep = intensity.weights >= params.truncation_threshold
    w = intensity.weights[keep]
    m = intensity.means[keep]
    P = intensity.covs[keep]
    J = len(w)
    if J == 0:
        return Intensity.empty(intensity.last_time)

    if J > 1:
        # Cheap overestimate of reachability: mahalanobis^2 >= |dm|^2 / lam_max(P)
        # and lam_max <= trace, so pairs farther than sqrt(U * tr(P_i)) cannot merge.
        traces = np.trace(P, axis1=1, axis2=2)
        diff = m[:, None, :] - m[None, :, :]
        sq_euclid = np.einsum("ijk,ijk->ij", diff, diff)
        candidate = sq_euclid <= params.merge_threshold * traces[:, None]
        np.fill_diagonal(candidate, False)
        mergeable = np.zeros((J, J), dtype=bool)
        if np.any(candidate):
            ii, jj = np.nonzero(candidate)
            uniq, inv_idx = np.unique(ii, return_inverse=True)
            Pinv = np.linalg.inv(P[uniq])
            dd = diff[ii, jj]
            d2 = np.einsum("pa,pab,pb->p", dd, Pinv[inv_idx], dd)
            mergeable[ii, jj] = d2 <= params.merge_threshold

        linked = mergeable | mergeable.T
        isolated = ~np.any(linked, axis=0)

        new_w, new_m, new_P = [], [], []
        if np.any(isolated):
            new_w.append(w[isolated])
            new_m.append(m[isolated])
            new_P.append(P[isolated])

        active = np.nonzero(~isolated)[0]
        if len(active):
            used = np.zeros(J, dtype=bool)
            order = active[np.argsort(-w[active], kind="stable")]
            merged_w, merged_m, merged_P = [], [], []
            for pivot in order:
                if used[pivot]:
                    continue
                members_mask = ~used & mergeable[:, pivot]
                members_mask[pivot] = True
                used |= members_mask
                members = np.nonzero(members_mask)[0]
                if members.size == 1:
                    merged_w.append(w[pivot])
                    merged_m.append(m[pivot])
                    merged_P.append(P[pivot])
                else:
                    tw, tm, tP = _merge_cluster(w, m, P, members)
                    merged_w.append(tw)
                    merged_m.append(tm)
                    merged_P.append(tP)
            new_w.append(np.array(merged_w))
            new_m.append(np.array(merged_m))
            new_P.append(np.array(merged_P))

        w = np.concatenate(new_w)
        m = np.concatenate(new_m)
        P = np.concatenate(new_P)

    if len(w) > params.max_components:
        top = np.argsort(-w, kind="stable")[: params.max_components]
        top = np.sort(top)
        w, m, P = w[top], m[top], P[top]

    return Intensity(w, m, P, intensity.last_time)


def extract_states(intensity: Intensity, params: TrackerParams) -> list[TrackEstimate]:
    """Neighbor estimates: one per local mode above the extraction threshold.

    The tight merge threshold legitimately leaves several components per
    target, so extraction groups components into modes: walking by descending
    weight, each ungrouped component claims every ungrouped component within
    ``extraction_dedup_radius`` of it (position distance). A mode is reported
    once, with the dominant component's state and the pooled mode weight,
    when that pooled weight reaches the extraction threshold. Modes whose
    speed exceeds ``extraction_max_speed`` are rejected as physically
    implausible (short-lived clutter coincidences imply wild velocities).
    Targets closer together than the radius report as a single neighbor.
    """
    J = len(intensity)
    if J == 0:
        return []
    order = np.argsort(-intensity.weights, kind="stable")
    consumed = np.zeros(J, dtype=bool)
    accepted: list[TrackEstimate] = []
    positions = intensity.means[:, :2]
    for i in order:
        if consumed[i]:
            continue
        sep = positions - positions[i]
        members = ~consumed & (np.hypot(sep[:, 0], sep[:, 1]) <= params.extraction_dedup_radius)
        consumed |= members
        pooled = float(np.sum(intensity.weights[members]))
        if pooled < params.extraction_threshold:
            continue
        velocity = intensity.means[i, 2:]
        if np.hypot(velocity[0], velocity[1]) > params.extraction_max_speed:
            continue
        accepted.append(
            TrackEstimate(
                position=positions[i].copy(),
                velocity=velocity.copy(),
                weight=pooled,
            )
        )
    return accepted


def expected_cardinality(intensity: Intensity) -> float:
    """Expected neighbor count: the integral (weight sum) of the intensity."""
    return intensity.total_weight()


@dataclass
class StepDiagnostics:
    """Per-step filter health record for the run log."""

    component_count: int = 0
    total_weight: float = 0.0
    extracted_count: int = 0


class GmPhdTracker:
    """Stateful per-agent wrapper wiring predict, birth, update, and prune."""

    def __init__(self, params: TrackerParams | None = None):
        self.params = params or TrackerParams()
        self.intensity = Intensity.empty()
        self.diagnostics = StepDiagnostics()

    def step(self, frame: SensorFrame, ego_velocity=(0.0, 0.0)) -> list[TrackEstimate]:
        """Consume one sensor frame; returns the extracted neighbor set.

        Raises:
            ContractError: frame timestamps are not strictly increasing.
        """
        params = self.params
        if self.intensity.last_time is None:
            working = Intensity.empty(frame.frame_time)
        else:
            dt = frame.frame_time - self.intensity.last_time
            if dt <= 0:
                raise ContractError(
                    f"frame at t={frame.frame_time} is not after tracker time "
                    f"t={self.intensity.last_time}"
                )
            ego = EgoMotion((float(ego_velocity[0]), float(ego_velocity[1])), dt)
            working = predict(self.intensity, ego, params)
        working = extend(working, birth(frame.measurements, params))
        working = update(working, frame, params)
        working = prune(working, params)
        self.intensity = working
        estimates = extract_states(working, params)
        self.diagnostics = StepDiagnostics(
            component_count=len(working),
            total_weight=working.total_weight(),
            extracted_count=len(estimates),
        )
        return estimates
