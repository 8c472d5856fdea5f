"""Extended Kalman filter with per-measurement-state fault masking.

The filter fuses the four sensor streams into one track estimate and, per
sensor, watches a moving average of squared innovation residuals. A
dimension whose average exceeds its threshold is flagged faulty and its
contribution to the Kalman gain is zeroed, while its residual keeps being
computed from the full measurement so recovery can be observed.

Processing order inside one tick is fixed: predict once, then update per
available sensor in SensorId order, then evaluate residuals. Masks decided
at tick k take effect at tick k+1 (the residual that triggers a flag is
only known after that tick's update). Threshold evaluation is suppressed
for the first ``horizon`` ticks after the first measurement arrives, so the
initialization transient cannot flag healthy sensors.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from . import motion, sensors
from .types import (
    MEASUREMENT_LAYOUTS,
    SENSOR_ORDER,
    STATE_DIM,
    DetectorConfig,
    FaultMask,
    Measurement,
    SensorId,
    StateEstimate,
    TrackState,
)

# Index of the heading entry in the RSU measurement layout.
_RSU_THETA = MEASUREMENT_LAYOUTS[SensorId.RSU].index("theta")


class MeasurementDataError(ValueError):
    """Malformed measurement data (non-finite values). Distinct from a fault
    detection: the update is rejected and the estimate left untouched."""


def wrap_angle(angle: float) -> float:
    """Smallest signed equivalent of an angle, in (-pi, pi]."""
    return float(np.arctan2(np.sin(angle), np.cos(angle)))


def predict(estimate: StateEstimate, config: DetectorConfig,
            dt: Optional[float] = None) -> StateEstimate:
    """Time update: propagate the mean and covariance one step forward."""
    dt = config.sample_period if dt is None else dt
    mean = motion.predict_state(estimate.mean, dt)
    a = motion.jacobian(estimate.mean, dt)
    cov = a @ estimate.covariance @ a.T + config.process_covariance
    cov = 0.5 * (cov + cov.T)
    return StateEstimate(mean, cov, estimate.timestamp + dt)


def update(estimate: StateEstimate, meas: Measurement, mask: FaultMask,
           config: DetectorConfig) -> Tuple[StateEstimate, np.ndarray]:
    """Measurement update with fault masking.

    Returns the posterior estimate and the innovation residual. The residual
    is always computed from the full measurement, including flagged
    dimensions; those dimensions contribute exactly zero gain, so the
    posterior does not depend on their values in any way.
    """
    if meas.sensor != mask.sensor:
        raise ValueError("mask sensor does not match measurement sensor")
    if not meas.available:
        raise ValueError("cannot update from an unavailable measurement")
    if not np.all(np.isfinite(meas.values)):
        raise MeasurementDataError(
            f"non-finite values in {meas.sensor.name.lower()} measurement at "
            f"t={meas.timestamp}"
        )

    mean_vec = estimate.mean.as_array()
    p = estimate.covariance
    h = sensors.measurement_jacobian(estimate.mean, meas.sensor)
    predicted = sensors.observe(estimate.mean, meas.sensor)

    residual = meas.values - predicted
    if meas.sensor == SensorId.RSU:
        residual[_RSU_THETA] = wrap_angle(residual[_RSU_THETA])

    eps = mask.healthy.astype(float)
    r = config.measurement_covariances[meas.sensor]
    hpht = h @ p @ h.T
    s = eps[:, None] * hpht * eps[None, :] + r

    gain = np.linalg.solve(s.T, (p @ h.T * eps[None, :]).T).T
    gain[:, ~mask.healthy] = 0.0  # exact zeros on flagged columns

    # Flagged residual entries are excluded from the sum outright, so the
    # posterior is bit-identical no matter what those entries contain.
    live = np.flatnonzero(mask.healthy)
    new_mean = mean_vec + gain[:, live] @ residual[live]

    cov = (np.eye(STATE_DIM) - gain @ h) @ p
    cov = 0.5 * (cov + cov.T)
    posterior = StateEstimate(TrackState.from_array(new_mean), cov, estimate.timestamp)
    return posterior, residual


class ResidualBuffer:
    """Per-sensor ring buffers of the most recent innovation residuals.

    Keeps at most ``horizon`` entries per sensor, oldest first. Squared
    residuals are stored alongside so the moving average can re-sum the
    window cheaply each tick.
    """

    def __init__(self, horizon: int):
        if horizon < 1:
            raise ValueError("horizon must be at least 1")
        self.horizon = int(horizon)
        self._windows: Dict[SensorId, deque] = {s: deque(maxlen=self.horizon)
                                                for s in SENSOR_ORDER}
        self._squares: Dict[SensorId, deque] = {s: deque(maxlen=self.horizon)
                                                for s in SENSOR_ORDER}

    def append(self, sensor: SensorId, residual: np.ndarray) -> None:
        residual = np.asarray(residual, dtype=float)
        self._windows[sensor].append(residual)
        self._squares[sensor].append(residual * residual)

    def count(self, sensor: SensorId) -> int:
        return len(self._windows[sensor])

    def window(self, sensor: SensorId) -> List[np.ndarray]:
        """Residuals currently in the window, oldest first."""
        return list(self._windows[sensor])

    def mean_square(self, sensor: SensorId) -> Optional[np.ndarray]:
        """Elementwise mean of squared residuals over the current window.

        While the window is still filling, the divisor is the number of
        residuals actually present, not the horizon. Summation runs oldest
        to newest so the result is reproducible bit for bit.
        """
        squares = self._squares[sensor]
        if not squares:
            return None
        total = np.zeros_like(squares[0])
        for sq in squares:
            total += sq
        return total / len(squares)


def evaluate_residuals(buffer: ResidualBuffer,
                       config: DetectorConfig) -> Dict[SensorId, FaultMask]:
    """Threshold the moving average of squared residuals per dimension.

    Returns a mask per sensor that currently has residuals: healthy where
    the average sits at or below the threshold, faulty where it exceeds it.
    Sensors without any residuals yet are omitted.
    """
    masks: Dict[SensorId, FaultMask] = {}
    for sensor in SENSOR_ORDER:
        energy = buffer.mean_square(sensor)
        if energy is None:
            continue
        masks[sensor] = FaultMask(sensor, energy <= config.thresholds[sensor])
    return masks


@dataclass
class DetectionEvent:
    """Interval during which one measurement dimension is flagged faulty.

    ``clear`` stays None while the flag is still raised.
    """

    sensor: SensorId
    dimension: int
    onset: float
    clear: Optional[float] = None


class EkfFaultDetector:
    """Stateful tracker plus residual evaluator driven tick by tick.

    One instance owns one track; feed it ticks in time order through
    :meth:`step`. Separate instances share nothing and can run in parallel.

    With ``record_series=True`` the detector keeps per-tick residual and
    mask rows suitable for CSV export (see :mod:`crosswatch.io`).
    """

    def __init__(self, config: DetectorConfig, record_series: bool = False):
        config.validate()
        self.config = config
        self.estimate = StateEstimate(config.initial_state,
                                      config.initial_covariance.copy(),
                                      timestamp=-config.sample_period)
        self.buffer = ResidualBuffer(config.horizon)
        self.masks: Dict[SensorId, FaultMask] = {s: FaultMask.all_healthy(s)
                                                 for s in SENSOR_ORDER}
        self.events: List[DetectionEvent] = []
        self._open: Dict[Tuple[SensorId, int], DetectionEvent] = {}
        self._tick = 0
        self._first_measurement_tick: Optional[int] = None
        self.record_series = record_series
        self.residual_rows: List[tuple] = []
        self.mask_rows: List[tuple] = []

    @property
    def tick(self) -> int:
        return self._tick

    @property
    def time(self) -> float:
        """Timestamp of the current estimate."""
        return self.estimate.timestamp

    def evaluation_active(self) -> bool:
        """Whether the warm-up guard has elapsed."""
        return (self._first_measurement_tick is not None
                and self._tick - self._first_measurement_tick >= self.config.horizon)

    def step(self, measurements: Iterable[Measurement]
             ) -> Tuple[StateEstimate, Dict[SensorId, FaultMask], List[DetectionEvent]]:
        """Process one tick: predict, update per sensor, evaluate residuals.

        ``measurements`` may hold at most one measurement per sensor;
        unavailable ones are skipped. Returns the posterior estimate, the
        masks that will apply to the next tick, and the full event log.
        """
        t = self._tick * self.config.sample_period
        self.estimate = predict(self.estimate, self.config)

        by_sensor: Dict[SensorId, Measurement] = {}
        for meas in measurements:
            if not meas.available:
                continue
            if meas.sensor in by_sensor:
                raise ValueError(f"duplicate measurement for {meas.sensor.name.lower()}"
                                 f" in one tick")
            by_sensor[meas.sensor] = meas

        residuals_this_tick: Dict[SensorId, np.ndarray] = {}
        for sensor in SENSOR_ORDER:
            meas = by_sensor.get(sensor)
            if meas is None:
                continue
            self.estimate, residual = update(self.estimate, meas,
                                             self.masks[sensor], self.config)
            self.buffer.append(sensor, residual)
            residuals_this_tick[sensor] = residual

        if by_sensor and self._first_measurement_tick is None:
            self._first_measurement_tick = self._tick

        self._evaluate(t, residuals_this_tick)

        self._tick += 1
        return self.estimate, {s: m.copy() for s, m in self.masks.items()}, self.events

    def _evaluate(self, t: float, residuals_this_tick: Dict[SensorId, np.ndarray]) -> None:
        apply_thresholds = self.evaluation_active()
        for sensor in SENSOR_ORDER:
            energy = self.buffer.mean_square(sensor)
            if energy is None:
                continue
            alpha = self.config.thresholds[sensor]
            if apply_thresholds:
                healthy_now = energy <= alpha
                previous = self.masks[sensor].healthy
                for dim in np.flatnonzero(previous & ~healthy_now):
                    event = DetectionEvent(sensor, int(dim), onset=t)
                    self.events.append(event)
                    self._open[(sensor, int(dim))] = event
                for dim in np.flatnonzero(~previous & healthy_now):
                    event = self._open.pop((sensor, int(dim)), None)
                    if event is not None:
                        event.clear = t
                self.masks[sensor] = FaultMask(sensor, healthy_now)

            if self.record_series and sensor in residuals_this_tick:
                residual = residuals_this_tick[sensor]
                mask_bits = self.masks[sensor].healthy
                layout = MEASUREMENT_LAYOUTS[sensor]
                for i, name in enumerate(layout):
                    self.residual_rows.append(
                        (t, sensor.name.lower(), name, float(residual[i]),
                         float(energy[i]), float(alpha[i]), int(mask_bits[i]))
                    )
        if self.record_series:
            for sensor in SENSOR_ORDER:
                layout = MEASUREMENT_LAYOUTS[sensor]
                bits = self.masks[sensor].healthy
                for i, name in enumerate(layout):
                    self.mask_rows.append((t, sensor.name.lower(), name, int(bits[i])))
