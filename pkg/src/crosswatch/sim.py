"""Deterministic intersection scenario: ground truth and noisy sensors.

The road user follows a piecewise-linear waypoint path at constant speed per
segment (a single waypoint means standing still). Each sensor sees the
track only inside its visibility window and reports the expected
measurement plus independent zero-mean Gaussian noise; all randomness comes
from one seeded generator, so a (scenario, seed) pair reproduces the exact
same measurement stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .sensors import observe
from .types import SENSOR_ORDER, Measurement, NoiseSpec, SensorId, TrackState


@dataclass(frozen=True)
class Scenario:
    """Everything that defines one simulated run, minus the anomaly.

    ``waypoints`` is a sequence of (x, y) corners; ``speeds`` holds one
    constant speed per segment. With a single waypoint the road user stands
    still, facing ``initial_heading``. Past the final waypoint it stands at
    the end of the path. ``visibility`` maps each sensor to its [t_on, t_off]
    window; ``seed`` fully determines the sensor noise.
    """

    duration: float
    waypoints: Tuple[Tuple[float, float], ...]
    speeds: Tuple[float, ...]
    visibility: Dict[SensorId, Tuple[float, float]] = field(default_factory=dict)
    seed: int = 0
    initial_heading: float = 0.0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if len(self.waypoints) == 0:
            raise ValueError("at least one waypoint is required")
        if len(self.speeds) != max(len(self.waypoints) - 1, 0):
            raise ValueError("need exactly one speed per path segment")
        if any(s <= 0 for s in self.speeds):
            raise ValueError("segment speeds must be positive")
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            if np.hypot(b[0] - a[0], b[1] - a[1]) == 0.0:
                raise ValueError("zero-length path segment")
        for sensor, window in self.visibility.items():
            t_on, t_off = window
            if not (0.0 <= t_on < t_off <= self.duration):
                raise ValueError(
                    f"visibility window for {sensor.name.lower()} must lie "
                    f"within [0, duration]"
                )


def default_scenario(seed: int = 0) -> Scenario:
    """A pedestrian crossing at walking speed, watched by all four sensors.

    Straight path along +y from (10, -5) at 1.4 m/s for 60 seconds, all
    sensors visible from t = 5 s onward.
    """
    duration = 60.0
    return Scenario(
        duration=duration,
        waypoints=((10.0, -5.0), (10.0, 79.0)),
        speeds=(1.4,),
        visibility={sensor: (5.0, duration) for sensor in SENSOR_ORDER},
        seed=seed,
    )


def _segments(scenario: Scenario):
    """Per-segment (start, direction unit vector, heading, speed, t0, t1)."""
    segs = []
    t0 = 0.0
    for (ax, ay), (bx, by), speed in zip(scenario.waypoints, scenario.waypoints[1:],
                                         scenario.speeds):
        length = float(np.hypot(bx - ax, by - ay))
        heading = float(np.arctan2(by - ay, bx - ax))
        t1 = t0 + length / speed
        segs.append(((ax, ay), ((bx - ax) / length, (by - ay) / length),
                     heading, speed, t0, t1))
        t0 = t1
    return segs


def ground_truth(scenario: Scenario, t: float) -> TrackState:
    """Exact kinematic state on the path at time t.

    Heading is the path tangent; within a segment the speed is constant, so
    the heading rate and acceleration are zero. Raises if t is outside
    [0, duration].
    """
    if not 0.0 <= t <= scenario.duration:
        raise ValueError(f"t={t} outside scenario duration [0, {scenario.duration}]")

    if len(scenario.waypoints) == 1:
        x, y = scenario.waypoints[0]
        return TrackState(x, y, scenario.initial_heading, 0.0, 0.0, 0.0)

    segs = _segments(scenario)
    for (start, direction, heading, speed, t0, t1) in segs:
        if t0 <= t < t1:
            tau = t - t0
            return TrackState(
                x=start[0] + direction[0] * speed * tau,
                y=start[1] + direction[1] * speed * tau,
                theta=heading,
                v=speed,
                v_theta=0.0,
                a=0.0,
            )
    # Past the end of the path: stand at the final waypoint.
    x, y = scenario.waypoints[-1]
    return TrackState(x, y, segs[-1][2], 0.0, 0.0, 0.0)


def visible(scenario: Scenario, sensor: SensorId, t: float) -> bool:
    window = scenario.visibility.get(sensor)
    if window is None:
        return False
    return window[0] <= t <= window[1]


def sample_sensors(scenario: Scenario, t: float, noise: NoiseSpec,
                   rng: np.random.Generator) -> List[Measurement]:
    """Measurements from every sensor at time t.

    Visible sensors report the expected measurement plus independent
    Gaussian noise per dimension; invisible sensors yield an unavailable
    placeholder. Noise is drawn in sensor order, for visible sensors only,
    which keeps the stream a pure function of (scenario, seed).
    """
    truth = ground_truth(scenario, t)
    out: List[Measurement] = []
    for sensor in SENSOR_ORDER:
        if not visible(scenario, sensor, t):
            out.append(Measurement.unavailable(sensor, t))
            continue
        expected = observe(truth, sensor)
        sigmas = noise.sigmas[sensor]
        values = expected + rng.standard_normal(len(sigmas)) * sigmas
        out.append(Measurement(sensor, t, values))
    return out
