"""Vision-based flocking: fisheye geometry, GM-PHD tracking, Reynolds control,
and a deterministic decentralized swarm simulator."""

from .camera import (
    BoundingBox,
    CameraIntrinsics,
    CameraRig,
    RangeBearing,
    bbox_to_range_bearing,
    bearing_to_pixel,
    default_intrinsics,
    default_rig,
    load_rig,
    pixel_to_bearing,
    project_cube_to_bbox,
    save_rig,
)
from .config import ScenarioConfig, config_hash, parse_config, serialize_config
from .detection import DetectionNoiseModel, SensorFrame, generate_frame, range_noise_sigma
from .errors import (
    ConfigError,
    ContractError,
    ConvergenceError,
    DegenerateBoxError,
    GeometryDomainError,
    NumericalError,
    SimulationAbort,
    StatsError,
    VisionFlockError,
)
from .flocking import (
    FlockParams,
    MigrationPlan,
    advance_waypoint,
    command,
    reynolds_terms,
    saturate,
)
from .metrics import InterAgentStats, inter_agent_stats, ospa_distance
from .sim import MetricsLog, Simulation, WorldState, run_scenario, step
from .tracker import (
    EgoMotion,
    GaussianComponent,
    GmPhdTracker,
    Intensity,
    TrackerParams,
    TrackEstimate,
    birth,
    expected_cardinality,
    extract_states,
    measurement_jacobian,
    predict,
    prune,
    update,
)

__version__ = "0.1.0"
