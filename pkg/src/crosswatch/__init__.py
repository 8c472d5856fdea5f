"""crosswatch: multi-sensor track fusion with measurement fault detection.

The package tracks a single vulnerable road user at an intersection by
fusing radar, lidar, camera and roadside-unit measurements in an extended
Kalman filter, monitors every measurement dimension with an L2 residual
evaluator, and masks flagged dimensions out of the fusion while a fault
persists. A deterministic simulator and an injection harness reproduce
spoofing-style attacks on the roadside stream and score how reliably they
are caught.
"""

from .types import (
    STATE_DIM,
    STATE_FIELDS,
    MEASUREMENT_LAYOUTS,
    SENSOR_ORDER,
    SensorId,
    TrackState,
    StateEstimate,
    Measurement,
    FaultMask,
    NoiseSpec,
    AnomalyKind,
    AnomalySpec,
    DetectorConfig,
    default_config,
    default_noise,
    default_thresholds,
    measurement_covariances_from_sigmas,
    measurement_dim,
    dimension_index,
    sensor_from_name,
)
from .motion import predict_state, jacobian as motion_jacobian
from .sensors import observe, measurement_jacobian
from .detector import (
    DetectionEvent,
    EkfFaultDetector,
    MeasurementDataError,
    ResidualBuffer,
    evaluate_residuals,
    predict,
    update,
    wrap_angle,
)
from .inject import AnomalyInjector, build_campaign_specs, inject, validate_spec
from .sim import Scenario, default_scenario, ground_truth, sample_sensors
from .campaign import (
    ALL_SENSORS,
    MatrixReport,
    TrialOutcome,
    grid_rows,
    run_matrix,
    run_single,
    run_trial,
    summarize,
)
from .io import (
    ConfigError,
    RunConfig,
    parse_mapping,
    parse_scenario,
    parse_text,
    serialize_run_config,
    to_mapping,
)

__version__ = "0.1.0"
