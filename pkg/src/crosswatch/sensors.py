"""Sensor observation functions and their Jacobians.

Each sensor sees a fixed slice of the track state. Velocity is reported as
Cartesian components, so the expected measurement uses v cos(theta) and
v sin(theta); the corresponding Jacobian rows therefore couple the heading
and speed states.
"""

from __future__ import annotations

import numpy as np

from .types import SensorId, TrackState


def observe(state: TrackState, sensor: SensorId) -> np.ndarray:
    """Noise-free expected measurement for the given sensor."""
    c = np.cos(state.theta)
    s = np.sin(state.theta)
    if sensor == SensorId.RADAR:
        return np.array([state.x, state.y])
    if sensor in (SensorId.LIDAR, SensorId.CAMERA):
        return np.array([state.x, state.y, state.v * c, state.v * s])
    if sensor == SensorId.RSU:
        return np.array([state.x, state.y, state.theta,
                         state.v * c, state.v * s, state.v_theta])
    raise ValueError(f"unknown sensor: {sensor!r}")


def measurement_jacobian(state: TrackState, sensor: SensorId) -> np.ndarray:
    """Jacobian of observe with respect to the state, shape (d, 6)."""
    c = np.cos(state.theta)
    s = np.sin(state.theta)
    x_row = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    y_row = np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0])
    # d(v cos)/d theta = -v sin, d(v cos)/d v = cos; likewise for v sin.
    vx_row = np.array([0.0, 0.0, -state.v * s, c, 0.0, 0.0])
    vy_row = np.array([0.0, 0.0, state.v * c, s, 0.0, 0.0])

    if sensor == SensorId.RADAR:
        return np.vstack([x_row, y_row])
    if sensor in (SensorId.LIDAR, SensorId.CAMERA):
        return np.vstack([x_row, y_row, vx_row, vy_row])
    if sensor == SensorId.RSU:
        theta_row = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
        vtheta_row = np.array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0])
        return np.vstack([x_row, y_row, theta_row, vx_row, vy_row, vtheta_row])
    raise ValueError(f"unknown sensor: {sensor!r}")
