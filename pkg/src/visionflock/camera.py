"""Fisheye camera geometry for omnidirectional range/bearing sensing.

Converts between pixels, unit bearing vectors, and metric range/bearing using
the equidistant lens model (image radius proportional to incidence angle,
``r = f * theta_d`` with a polynomial distortion on theta), and recovers the
distance to an object of known physical size from its bounding box.

Frame conventions
-----------------
body frame    x forward, y left, z up; azimuths measured counterclockwise
              from +x, wrapped to (-pi, pi].
camera frame  z along the optical axis, x right in the image, y down.
image frame   u right, v down; pixel centers span [0, width-1] x [0, height-1].

A camera is mounted on the body with a pure yaw offset: its optical axis
points along (cos(yaw), sin(yaw), 0) in body coordinates.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import yaml

from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateBoxError,
    GeometryDomainError,
)
from .numeric import TWO_PI, wrap_angle

DEFAULT_OBJECT_SIZE = 0.5  # bounding-cube side length, meters

_MAX_UNDISTORT_ITER = 20
_UNDISTORT_TOL = 1e-10


def _distort(theta, k):
    t2 = theta * theta
    return theta * (1.0 + t2 * (k[0] + t2 * (k[1] + t2 * (k[2] + t2 * k[3]))))


def _distort_deriv(theta, k):
    t2 = theta * theta
    return 1.0 + t2 * (3.0 * k[0] + t2 * (5.0 * k[1] + t2 * (7.0 * k[2] + t2 * 9.0 * k[3])))


def _undistort(theta_d, k):
    """Invert theta -> theta_d by Newton iteration (vectorized)."""
    theta_d = np.asarray(theta_d, dtype=float)
    if not any(k):
        return theta_d.copy()
    theta = theta_d.copy()
    for _ in range(_MAX_UNDISTORT_ITER):
        deriv = _distort_deriv(theta, k)
        if np.any(deriv <= 0.0):
            raise ConvergenceError(
                "distortion polynomial is non-monotonic at the requested angle",
                iterations=_MAX_UNDISTORT_ITER,
            )
        delta = (_distort(theta, k) - theta_d) / deriv
        theta -= delta
        if np.max(np.abs(delta)) < _UNDISTORT_TOL:
            return theta
    raise ConvergenceError("distortion inversion did not converge", iterations=_MAX_UNDISTORT_ITER)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Equidistant fisheye intrinsics.

    Attributes:
        focal_length: pixels per radian of (distorted) incidence angle.
        principal_point: (u, v) pixel coordinates of the optical axis.
        distortion: equidistant polynomial coefficients (k1, k2, k3, k4).
        resolution: image size (width, height) in pixels.
    """

    focal_length: float
    principal_point: tuple[float, float]
    distortion: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    resolution: tuple[int, int] = (720, 540)

    def __post_init__(self):
        if self.focal_length <= 0:
            raise ConfigError(f"focal_length must be > 0, got {self.focal_length}")
        w, h = self.resolution
        if w <= 0 or h <= 0:
            raise ConfigError(f"resolution components must be > 0, got {self.resolution}")
        u, v = self.principal_point
        if not (0.0 <= u <= w - 1 and 0.0 <= v <= h - 1):
            raise ConfigError(
                f"principal_point {self.principal_point} outside image rectangle "
                f"[0, {w - 1}] x [0, {h - 1}]"
            )
        if len(self.distortion) != 4:
            raise ConfigError("distortion must have exactly four coefficients k1..k4")

    @cached_property
    def theta_limit(self) -> float:
        """Largest incidence angle with a strictly increasing forward model."""
        grid = np.linspace(0.0, np.pi, 257)
        increasing = _distort_deriv(grid, self.distortion) > 0.0
        if bool(np.all(increasing)):
            return float(np.pi)
        first_bad = int(np.argmin(increasing))
        return float(grid[max(first_bad - 1, 0)])

    @cached_property
    def half_fov_horizontal(self) -> float:
        """Incidence angle at the horizontal image edge, radians."""
        w = self.resolution[0]
        u, _ = self.principal_point
        r_edge = max(u, (w - 1) - u)
        return float(_undistort(r_edge / self.focal_length, self.distortion))

    def pixel_in_bounds(self, pixel) -> bool:
        u, v = float(pixel[0]), float(pixel[1])
        w, h = self.resolution
        return 0.0 <= u <= w - 1 and 0.0 <= v <= h - 1


def default_intrinsics(
    hfov_deg: float = 166.0,
    resolution: tuple[int, int] = (720, 540),
    distortion: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0),
) -> CameraIntrinsics:
    """Intrinsics whose horizontal edge pixel sits exactly at hfov/2 off-axis."""
    w, h = resolution
    pp = ((w - 1) / 2.0, (h - 1) / 2.0)
    theta_edge = np.radians(hfov_deg) / 2.0
    f = (pp[0]) / _distort(theta_edge, distortion)
    return CameraIntrinsics(float(f), pp, distortion, resolution)


def _unproject_pixels(intrinsics: CameraIntrinsics, pixels: np.ndarray) -> np.ndarray:
    """Pixels (N, 2) to unit bearing vectors (N, 3); no bounds check."""
    pp = np.asarray(intrinsics.principal_point)
    offs = pixels - pp
    r = np.hypot(offs[:, 0], offs[:, 1])
    theta = _undistort(r / intrinsics.focal_length, intrinsics.distortion)
    out = np.empty((len(pixels), 3))
    safe = r > 1e-12
    scale = np.zeros_like(r)
    scale[safe] = np.sin(theta[safe]) / r[safe]
    out[:, 0] = offs[:, 0] * scale
    out[:, 1] = offs[:, 1] * scale
    out[:, 2] = np.cos(theta)
    out[~safe] = (0.0, 0.0, 1.0)
    return out


def _project_bearings(
    intrinsics: CameraIntrinsics, bearings: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Bearings (N, 3) to pixels (N, 2) plus validity mask (angle within model)."""
    b = np.asarray(bearings, dtype=float)
    rho = np.hypot(b[:, 0], b[:, 1])
    theta = np.arctan2(rho, b[:, 2])
    valid = theta <= intrinsics.theta_limit
    # A point exactly behind the camera has no azimuth; treat as invalid.
    valid &= ~((rho <= 1e-12) & (b[:, 2] < 0.0))
    r = intrinsics.focal_length * _distort(theta, intrinsics.distortion)
    pixels = np.empty((len(b), 2))
    safe = rho > 1e-12
    scale = np.zeros_like(rho)
    scale[safe] = r[safe] / rho[safe]
    pp = intrinsics.principal_point
    pixels[:, 0] = pp[0] + b[:, 0] * scale
    pixels[:, 1] = pp[1] + b[:, 1] * scale
    return pixels, valid


def pixel_to_bearing(intrinsics: CameraIntrinsics, pixel) -> np.ndarray:
    """Unit-norm bearing vector (camera frame) for an in-bounds pixel.

    Raises:
        GeometryDomainError: pixel outside the image rectangle.
        ConvergenceError: distortion inversion failed.
    """
    if not intrinsics.pixel_in_bounds(pixel):
        raise GeometryDomainError(
            f"pixel {tuple(pixel)} outside image rectangle for resolution {intrinsics.resolution}"
        )
    return _unproject_pixels(intrinsics, np.asarray(pixel, dtype=float).reshape(1, 2))[0]


def bearing_to_pixel(intrinsics: CameraIntrinsics, bearing) -> np.ndarray | None:
    """Project a unit bearing to a pixel; None when outside the camera's view."""
    pixels, valid = _project_bearings(intrinsics, np.asarray(bearing, dtype=float).reshape(1, 3))
    if not valid[0] or not intrinsics.pixel_in_bounds(pixels[0]):
        return None
    return pixels[0]


def body_from_camera(yaw: float) -> np.ndarray:
    """Rotation matrix mapping camera-frame vectors into the body frame."""
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array(
        [
            [s, 0.0, c],
            [-c, 0.0, s],
            [0.0, -1.0, 0.0],
        ]
    )


@dataclass(frozen=True)
class CameraRig:
    """Four yaw-offset cameras providing omnidirectional horizontal coverage."""

    cameras: tuple[tuple[CameraIntrinsics, float], ...]

    def __post_init__(self):
        if len(self.cameras) != 4:
            raise ConfigError(f"rig requires exactly 4 cameras, got {len(self.cameras)}")
        yaws = np.array([wrap_angle(yaw) for _, yaw in self.cameras])
        order = np.argsort(yaws)
        sorted_yaws = yaws[order]
        gaps = np.diff(np.concatenate([sorted_yaws, [sorted_yaws[0] + TWO_PI]]))
        if np.any(gaps < 1e-9):
            raise ConfigError("camera yaw offsets must be distinct modulo 2*pi")
        halves = np.array([intr.half_fov_horizontal for intr, _ in self.cameras])[order]
        next_halves = np.roll(halves, -1)
        if np.any(gaps > halves + next_halves):
            raise ConfigError("camera fields of view do not cover the full horizontal circle")

    def select_camera(self, bearing_body) -> int:
        """Camera with the smallest angle to its optical axis; ties to lowest index."""
        b = np.asarray(bearing_body, dtype=float)
        b = b / np.linalg.norm(b)
        best, best_angle = 0, np.inf
        for i, (_, yaw) in enumerate(self.cameras):
            axis = np.array([np.cos(yaw), np.sin(yaw), 0.0])
            angle = np.arccos(np.clip(np.dot(b, axis), -1.0, 1.0))
            if angle < best_angle - 1e-12:
                best, best_angle = i, angle
        return best


def default_rig(
    hfov_deg: float = 166.0,
    resolution: tuple[int, int] = (720, 540),
    distortion: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0),
) -> CameraRig:
    """Rig of four identical cameras at right angles (yaws 0, 90, 180, 270 deg)."""
    intr = default_intrinsics(hfov_deg, resolution, distortion)
    yaws = (0.0, np.pi / 2.0, np.pi, 3.0 * np.pi / 2.0)
    return CameraRig(tuple((intr, yaw) for yaw in yaws))


def load_rig(path) -> CameraRig:
    """Load a camera rig from a YAML calibration file.

    Expected schema::

        cameras:
          - focal_length: <pixels>
            principal_point: [u, v]
            distortion: [k1, k2, k3, k4]
            resolution: [width, height]
            yaw_deg: <degrees>
          - ...   # exactly four entries
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict) or "cameras" not in raw:
        raise ConfigError(f"{path}: calibration file must contain a 'cameras' list")
    unknown = set(raw) - {"cameras"}
    if unknown:
        raise ConfigError(f"{path}: unknown top-level keys: {sorted(unknown)}")
    cams = []
    allowed = {"focal_length", "principal_point", "distortion", "resolution", "yaw_deg"}
    for i, entry in enumerate(raw["cameras"]):
        unknown = set(entry) - allowed
        if unknown:
            raise ConfigError(f"{path}: camera {i}: unknown keys: {sorted(unknown)}")
        missing = allowed - set(entry)
        if missing:
            raise ConfigError(f"{path}: camera {i}: missing keys: {sorted(missing)}")
        intr = CameraIntrinsics(
            focal_length=float(entry["focal_length"]),
            principal_point=tuple(float(x) for x in entry["principal_point"]),
            distortion=tuple(float(x) for x in entry["distortion"]),
            resolution=tuple(int(x) for x in entry["resolution"]),
        )
        cams.append((intr, float(np.radians(entry["yaw_deg"]))))
    return CameraRig(tuple(cams))


def save_rig(rig: CameraRig, path) -> None:
    """Write a rig back to the YAML calibration schema of :func:`load_rig`."""
    payload = {
        "cameras": [
            {
                "focal_length": float(intr.focal_length),
                "principal_point": [float(x) for x in intr.principal_point],
                "distortion": [float(x) for x in intr.distortion],
                "resolution": [int(x) for x in intr.resolution],
                "yaw_deg": float(np.degrees(yaw)),
            }
            for intr, yaw in rig.cameras
        ]
    }
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(payload, fh, sort_keys=False)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned detection box in image coordinates."""

    center: tuple[float, float]
    width: float
    height: float
    confidence: float = 1.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise GeometryDomainError(
                f"bounding box sides must be positive, got {self.width} x {self.height}"
            )
        if not 0.0 <= self.confidence <= 1.0:
            raise GeometryDomainError(f"confidence must be in [0, 1], got {self.confidence}")

    def intersects_image(self, resolution: tuple[int, int]) -> bool:
        w, h = resolution
        u, v = self.center
        return (
            u + self.width / 2 >= 0
            and u - self.width / 2 <= w - 1
            and v + self.height / 2 >= 0
            and v - self.height / 2 <= h - 1
        )


@dataclass(frozen=True)
class RangeBearing:
    """Polar measurement of a neighbor: metric range and body-frame azimuth."""

    range: float
    bearing: float
    timestamp: float = 0.0

    def __post_init__(self):
        if self.range <= 0:
            raise GeometryDomainError(f"range must be > 0, got {self.range}")
        object.__setattr__(self, "bearing", wrap_angle(self.bearing))

    def to_xy(self) -> np.ndarray:
        return np.array([self.range * np.cos(self.bearing), self.range * np.sin(self.bearing)])


def bbox_extreme_point(bbox: BoundingBox, principal_point) -> np.ndarray:
    """Pick the box point whose offset from the center spans half the object.

    Uses the midpoint of the shorter box side whose image radius best matches
    the center's radius; for strongly non-square boxes (sides differing by
    more than 25%) falls back to the corner at half the box diagonal.
    """
    w, h = bbox.width, bbox.height
    cx, cy = bbox.center
    if abs(w - h) > 0.25 * max(w, h):
        offsets = [(w / 2, h / 2), (w / 2, -h / 2), (-w / 2, h / 2), (-w / 2, -h / 2)]
    elif w <= h:
        offsets = [(0.0, h / 2), (0.0, -h / 2)]
    else:
        offsets = [(w / 2, 0.0), (-w / 2, 0.0)]
    pp = np.asarray(principal_point)
    r_center = np.hypot(cx - pp[0], cy - pp[1])
    candidates = np.array([(cx + du, cy + dv) for du, dv in offsets])
    radii = np.hypot(candidates[:, 0] - pp[0], candidates[:, 1] - pp[1])
    return candidates[int(np.argmin(np.abs(radii - r_center)))]


def bbox_to_range_bearing(
    rig: CameraRig,
    camera_index: int,
    bbox: BoundingBox,
    object_size: float = DEFAULT_OBJECT_SIZE,
    timestamp: float = 0.0,
) -> RangeBearing:
    """Recover range and body-frame bearing from a detection box.

    The distance follows the known-size rule ``d = (l/2)/tan(alpha) + l/2``
    where alpha is the angle between the bearing vectors of the box center
    and of an extreme point of the box; the second term accounts for the
    depth of the object.

    Raises:
        GeometryDomainError: invalid camera index, box outside the image, or
            unprojectable box center.
        DegenerateBoxError: alpha outside (0, pi/2).
    """
    if object_size <= 0:
        raise GeometryDomainError(f"object_size must be > 0, got {object_size}")
    if not 0 <= camera_index < len(rig.cameras):
        raise GeometryDomainError(f"camera index {camera_index} out of range")
    intrinsics, yaw = rig.cameras[camera_index]
    if not bbox.intersects_image(intrinsics.resolution):
        raise GeometryDomainError("bounding box does not intersect the image rectangle")

    beta_ctr = pixel_to_bearing(intrinsics, bbox.center)
    extreme = bbox_extreme_point(bbox, intrinsics.principal_point)
    beta_ext = _unproject_pixels(intrinsics, extreme.reshape(1, 2))[0]

    alpha = np.arccos(np.clip(np.dot(beta_ctr, beta_ext), -1.0, 1.0))
    if alpha <= 0.0 or alpha >= np.pi / 2.0:
        raise DegenerateBoxError(f"half-size angle alpha={np.degrees(alpha):.2f} deg is degenerate")
    half = object_size / 2.0
    distance = half / np.tan(alpha) + half

    bearing_body = body_from_camera(yaw) @ beta_ctr
    azimuth = wrap_angle(np.arctan2(bearing_body[1], bearing_body[0]))
    return RangeBearing(range=float(distance), bearing=float(azimuth), timestamp=timestamp)


def project_cube_to_bbox(
    rig: CameraRig,
    relative_position,
    object_size: float = DEFAULT_OBJECT_SIZE,
) -> tuple[int, BoundingBox] | None:
    """Synthesize the detection box of a target-facing bounding cube.

    The cube sits at the given planar body-frame position (altitude 0) with
    one axis along the line of sight, so its apparent size is independent of
    azimuth. Returns (camera_index, box) for the camera whose optical axis is
    closest to the target bearing, or None when the projection leaves the
    usable field of view.

    Raises:
        GeometryDomainError: target closer than half the cube size.
    """
    rel = np.asarray(relative_position, dtype=float)
    rho = float(np.hypot(rel[0], rel[1]))
    if rho <= object_size / 2.0:
        raise GeometryDomainError(
            f"target at distance {rho:.3f} m lies inside the cube of side {object_size} m"
        )
    center = np.array([rel[0], rel[1], 0.0])
    los = center / rho
    side = np.array([-los[1], los[0], 0.0])
    up = np.array([0.0, 0.0, 1.0])
    half = object_size / 2.0
    signs = np.array([(sx, sy, sz) for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    corners = center + half * (
        signs[:, 0:1] * side + signs[:, 1:2] * up + signs[:, 2:3] * los
    )

    index = rig.select_camera(los)
    intrinsics, yaw = rig.cameras[index]
    cam_corners = corners @ body_from_camera(yaw)  # rows: R^T @ corner
    norms = np.linalg.norm(cam_corners, axis=1)
    pixels, valid = _project_bearings(intrinsics, cam_corners / norms[:, None])
    if not np.all(valid):
        return None

    u_min, v_min = pixels.min(axis=0)
    u_max, v_max = pixels.max(axis=0)
    bbox = BoundingBox(
        center=((u_min + u_max) / 2.0, (v_min + v_max) / 2.0),
        width=float(u_max - u_min),
        height=float(v_max - v_min),
    )
    if not bbox.intersects_image(intrinsics.resolution):
        return None
    return index, bbox
