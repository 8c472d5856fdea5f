"""Shared domain types for the tracking and fault-detection stack.

State convention (6 entries, SI units):
    [x, y, theta, v, v_theta, a]
    x, y     - longitudinal / lateral position (m)
    theta    - heading (rad), kept unwrapped so it may leave (-pi, pi]
    v        - resultant planar speed (m/s)
    v_theta  - heading rate (rad/s)
    a        - resultant planar acceleration (m/s^2)

Measurement layouts (fixed per sensor):
    radar   [x, y]
    lidar   [x, y, v_x, v_y]
    camera  [x, y, v_x, v_y]
    rsu     [x, y, theta, v_x, v_y, v_theta]
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict

import numpy as np

STATE_DIM = 6
STATE_FIELDS = ("x", "y", "theta", "v", "v_theta", "a")


class SensorId(enum.IntEnum):
    """Measurement sources, in the order they are processed each tick."""

    RADAR = 1
    LIDAR = 2
    CAMERA = 3
    RSU = 4


SENSOR_ORDER = (SensorId.RADAR, SensorId.LIDAR, SensorId.CAMERA, SensorId.RSU)

MEASUREMENT_LAYOUTS: Dict[SensorId, tuple] = {
    SensorId.RADAR: ("x", "y"),
    SensorId.LIDAR: ("x", "y", "v_x", "v_y"),
    SensorId.CAMERA: ("x", "y", "v_x", "v_y"),
    SensorId.RSU: ("x", "y", "theta", "v_x", "v_y", "v_theta"),
}

# Measurement entries compared against the position-level threshold; the
# remaining entries (v_x, v_y, v_theta) use the velocity-level threshold.
_POSITION_LIKE = frozenset(("x", "y", "theta"))


def measurement_dim(sensor: SensorId) -> int:
    """Number of entries in the given sensor's measurement vector."""
    return len(MEASUREMENT_LAYOUTS[sensor])


def sensor_from_name(name: str) -> SensorId:
    """Look up a sensor by its lowercase name ('radar', 'lidar', ...)."""
    try:
        return SensorId[name.strip().upper()]
    except KeyError:
        raise ValueError(f"unknown sensor name: {name!r}") from None


def dimension_index(sensor: SensorId, dim) -> int:
    """Resolve a measurement dimension given by name or index."""
    layout = MEASUREMENT_LAYOUTS[sensor]
    if isinstance(dim, str):
        try:
            return layout.index(dim)
        except ValueError:
            raise ValueError(
                f"{sensor.name.lower()} has no dimension {dim!r}; layout is {layout}"
            ) from None
    idx = int(dim)
    if not 0 <= idx < len(layout):
        raise ValueError(f"dimension index {idx} out of range for {sensor.name.lower()}")
    return idx


@dataclass(frozen=True)
class TrackState:
    """Kinematic state of the tracked road user."""

    x: float
    y: float
    theta: float
    v: float
    v_theta: float
    a: float

    def __post_init__(self):
        arr = self.as_array()
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"track state must be finite, got {arr}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, self.v, self.v_theta, self.a])

    @classmethod
    def from_array(cls, arr) -> "TrackState":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (STATE_DIM,):
            raise ValueError(f"state array must have shape ({STATE_DIM},), got {arr.shape}")
        return cls(*arr.tolist())

    @classmethod
    def from_cartesian(cls, x, y, theta, vx, vy, ax=0.0, ay=0.0, v_theta=0.0) -> "TrackState":
        """Build a state from Cartesian velocity/acceleration components.

        The resultant magnitudes v = hypot(vx, vy) and a = hypot(ax, ay) are
        nonnegative by construction.
        """
        return cls(x, y, theta, float(np.hypot(vx, vy)), v_theta, float(np.hypot(ax, ay)))

    @classmethod
    def zero(cls) -> "TrackState":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(eq=False)
class StateEstimate:
    """Track state with covariance at a point in time."""

    mean: TrackState
    covariance: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        self.covariance = np.asarray(self.covariance, dtype=float)
        if self.covariance.shape != (STATE_DIM, STATE_DIM):
            raise ValueError(f"covariance must be {STATE_DIM}x{STATE_DIM}")

    def validate(self, sym_tol: float = 1e-9, eig_tol: float = -1e-9) -> None:
        """Raise if the covariance is asymmetric or meaningfully indefinite."""
        p = self.covariance
        if not np.all(np.isfinite(p)):
            raise ValueError("covariance contains non-finite entries")
        scale = max(1.0, float(np.max(np.abs(p))))
        if np.max(np.abs(p - p.T)) > sym_tol * scale:
            raise ValueError("covariance is not symmetric within tolerance")
        lo = float(np.min(np.linalg.eigvalsh(0.5 * (p + p.T))))
        if lo < eig_tol:
            raise ValueError(f"covariance has eigenvalue {lo} below tolerance")


@dataclass(frozen=True, eq=False)
class Measurement:
    """One timestamped observation from a single sensor.

    ``available`` is the per-sensor availability indicator: when False the
    filter skips the measurement entirely and ``values`` carry no meaning
    (they are kept at the layout length so shapes stay uniform).
    """

    sensor: SensorId
    timestamp: float
    values: np.ndarray
    available: bool = True

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        expected = measurement_dim(self.sensor)
        if self.values.shape != (expected,):
            raise ValueError(
                f"{self.sensor.name.lower()} measurement must have {expected} entries, "
                f"got shape {self.values.shape}"
            )

    @classmethod
    def unavailable(cls, sensor: SensorId, timestamp: float) -> "Measurement":
        return cls(sensor, timestamp, np.zeros(measurement_dim(sensor)), available=False)


@dataclass(eq=False)
class FaultMask:
    """Per-measurement-state health flags for one sensor (True = healthy)."""

    sensor: SensorId
    healthy: np.ndarray

    def __post_init__(self):
        self.healthy = np.asarray(self.healthy, dtype=bool)
        expected = measurement_dim(self.sensor)
        if self.healthy.shape != (expected,):
            raise ValueError(
                f"mask for {self.sensor.name.lower()} must have {expected} entries"
            )

    @classmethod
    def all_healthy(cls, sensor: SensorId) -> "FaultMask":
        return cls(sensor, np.ones(measurement_dim(sensor), dtype=bool))

    def copy(self) -> "FaultMask":
        return FaultMask(self.sensor, self.healthy.copy())


class AnomalyKind(str, enum.Enum):
    INSTANT = "instant"
    BIAS = "bias"
    DRIFT = "drift"


@dataclass(frozen=True)
class AnomalySpec:
    """One injected fault: what, where, how strong, and when.

    ``magnitude`` is an offset in measurement units for instant and bias
    faults, and a rate (units per second) for drift faults. The anomaly is
    active for ticks with t_start <= t < t_end; an instant fault must span
    exactly one sample period.
    """

    kind: AnomalyKind
    sensor: SensorId
    dimension: int
    magnitude: float
    t_start: float
    t_end: float

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError(f"t_start ({self.t_start}) must precede t_end ({self.t_end})")
        if self.magnitude < 0:
            raise ValueError("magnitude must be nonnegative")
        dimension_index(self.sensor, self.dimension)

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(eq=False)
class NoiseSpec:
    """Per-sensor, per-dimension measurement noise sigmas plus the process
    noise scale q used to build the filter's process covariance q*I.

    Simulator sigmas may be zero (degenerate, noise-free sampling); the
    filter's measurement covariances must stay strictly positive, which
    DetectorConfig enforces separately.
    """

    sigmas: Dict[SensorId, np.ndarray]
    q: float = 0.001

    def __post_init__(self):
        self.sigmas = {s: np.asarray(v, dtype=float) for s, v in self.sigmas.items()}
        for sensor in SENSOR_ORDER:
            if sensor not in self.sigmas:
                raise ValueError(f"missing noise sigmas for {sensor.name.lower()}")
            vec = self.sigmas[sensor]
            if vec.shape != (measurement_dim(sensor),):
                raise ValueError(f"sigma vector for {sensor.name.lower()} has wrong length")
            if np.any(vec < 0):
                raise ValueError(f"sigmas for {sensor.name.lower()} must not be negative")
        if self.q <= 0:
            raise ValueError("process noise scale q must be positive")


@dataclass(eq=False)
class DetectorConfig:
    """Filter and residual-evaluator parameters.

    thresholds and measurement_covariances are keyed by sensor; thresholds
    hold one positive limit per measurement dimension, measurement
    covariances are the diagonal noise matrices used in the gain equation.
    """

    horizon: int
    sample_period: float
    thresholds: Dict[SensorId, np.ndarray]
    initial_state: TrackState
    initial_covariance: np.ndarray
    process_covariance: np.ndarray
    measurement_covariances: Dict[SensorId, np.ndarray]

    def __post_init__(self):
        self.thresholds = {s: np.asarray(v, dtype=float) for s, v in self.thresholds.items()}
        self.initial_covariance = np.asarray(self.initial_covariance, dtype=float)
        self.process_covariance = np.asarray(self.process_covariance, dtype=float)
        self.measurement_covariances = {
            s: np.asarray(v, dtype=float) for s, v in self.measurement_covariances.items()
        }
        self.validate()

    def validate(self) -> None:
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        for matrix, label in ((self.initial_covariance, "initial_covariance"),
                              (self.process_covariance, "process_covariance")):
            if matrix.shape != (STATE_DIM, STATE_DIM):
                raise ValueError(f"{label} must be {STATE_DIM}x{STATE_DIM}")
        for sensor in SENSOR_ORDER:
            d = measurement_dim(sensor)
            alpha = self.thresholds.get(sensor)
            if alpha is None or alpha.shape != (d,):
                raise ValueError(f"thresholds for {sensor.name.lower()} must have {d} entries")
            if np.any(alpha <= 0):
                raise ValueError(f"thresholds for {sensor.name.lower()} must be positive")
            r = self.measurement_covariances.get(sensor)
            if r is None or r.shape != (d, d):
                raise ValueError(f"measurement covariance for {sensor.name.lower()} must be {d}x{d}")
            if np.any(np.diag(r) <= 0):
                raise ValueError(f"measurement covariance diagonal for {sensor.name.lower()} "
                                 "must be positive")


# Measurement noise standard deviations per sensor, in layout order.
DEFAULT_SIGMAS: Dict[SensorId, tuple] = {
    SensorId.RADAR: (0.03, 0.03),
    SensorId.LIDAR: (0.0067, 0.0067, 0.17, 0.17),
    SensorId.CAMERA: (0.03, 0.03, 0.17, 0.17),
    SensorId.RSU: (0.03, 0.03, 0.011, 0.17, 0.17, 0.011),
}

DEFAULT_HORIZON = 30
DEFAULT_SAMPLE_PERIOD = 0.05
DEFAULT_POSITION_THRESHOLD = 0.18
DEFAULT_VELOCITY_THRESHOLD = 0.7
DEFAULT_PROCESS_NOISE_SCALE = 0.001


def default_thresholds() -> Dict[SensorId, np.ndarray]:
    return {
        sensor: np.array([
            DEFAULT_POSITION_THRESHOLD if name in _POSITION_LIKE
            else DEFAULT_VELOCITY_THRESHOLD
            for name in MEASUREMENT_LAYOUTS[sensor]
        ])
        for sensor in SENSOR_ORDER
    }


def default_noise() -> NoiseSpec:
    return NoiseSpec(
        sigmas={s: np.array(v) for s, v in DEFAULT_SIGMAS.items()},
        q=DEFAULT_PROCESS_NOISE_SCALE,
    )


def measurement_covariances_from_sigmas(sigmas: Dict[SensorId, np.ndarray]) -> Dict[SensorId, np.ndarray]:
    """Diagonal measurement covariances, entries being the squared sigmas."""
    return {s: np.diag(np.square(np.asarray(v, dtype=float))) for s, v in sigmas.items()}


def default_config(noise: NoiseSpec | None = None) -> DetectorConfig:
    """Detector parameters for the reference setup: horizon 30, unit initial
    covariance, zero initial state, process covariance 0.001*I, measurement
    covariances from the squared default sigmas, 20 Hz sampling."""
    noise = noise if noise is not None else default_noise()
    return DetectorConfig(
        horizon=DEFAULT_HORIZON,
        sample_period=DEFAULT_SAMPLE_PERIOD,
        thresholds=default_thresholds(),
        initial_state=TrackState.zero(),
        initial_covariance=np.eye(STATE_DIM),
        process_covariance=noise.q * np.eye(STATE_DIM),
        measurement_covariances=measurement_covariances_from_sigmas(noise.sigmas),
    )
