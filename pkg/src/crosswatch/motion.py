"""Omnidirectional motion model: constant acceleration, constant heading rate.

Discrete-time propagation over a step dt:

    x'       = x + v cos(theta) dt + 1/2 a cos(theta) dt^2
    y'       = y + v sin(theta) dt + 1/2 a sin(theta) dt^2
    theta'   = theta + v_theta dt
    v'       = v + a dt
    v_theta' = v_theta
    a'       = a

Heading is deliberately not wrapped here; the filter works with an
accumulating heading and wraps only the heading residual.
"""

from __future__ import annotations

import numpy as np

from .types import STATE_DIM, TrackState


def predict_state(state: TrackState, dt: float) -> TrackState:
    """Propagate a state forward by dt seconds, without process noise."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    c = np.cos(state.theta)
    s = np.sin(state.theta)
    advance = state.v * dt + 0.5 * state.a * dt * dt
    return TrackState(
        x=state.x + advance * c,
        y=state.y + advance * s,
        theta=state.theta + state.v_theta * dt,
        v=state.v + state.a * dt,
        v_theta=state.v_theta,
        a=state.a,
    )


def jacobian(state: TrackState, dt: float) -> np.ndarray:
    """Analytic Jacobian of predict_state with respect to the state."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    c = np.cos(state.theta)
    s = np.sin(state.theta)
    advance = state.v * dt + 0.5 * state.a * dt * dt

    jac = np.eye(STATE_DIM)
    jac[0, 2] = -advance * s          # d x' / d theta
    jac[0, 3] = c * dt                # d x' / d v
    jac[0, 5] = 0.5 * c * dt * dt     # d x' / d a
    jac[1, 2] = advance * c
    jac[1, 3] = s * dt
    jac[1, 5] = 0.5 * s * dt * dt
    jac[2, 4] = dt                    # d theta' / d v_theta
    jac[3, 5] = dt                    # d v' / d a
    return jac
