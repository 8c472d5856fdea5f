"""Anomaly injection: turns the clean RSU stream into a hacked stream.

Three fault shapes are supported on a single measurement dimension:

    instant  one-sample spike of the given magnitude at the start tick
    bias     constant offset over the whole active window
    drift    offset growing by magnitude * sample_period per tick, starting
             from zero at the start tick and resetting once the window ends

The active window covers ticks with k_start <= k < k_end. Outside it the
measurement passes through bit for bit.
"""

from __future__ import annotations

from dataclasses import replace
from typing import List, Optional

import numpy as np

from .types import (
    AnomalyKind,
    AnomalySpec,
    Measurement,
    SensorId,
    dimension_index,
)


def tick_of(t: float, sample_period: float) -> int:
    """Tick index of a timestamp on the fixed sampling grid."""
    return int(round(t / sample_period))


def validate_spec(spec: AnomalySpec, sample_period: float) -> None:
    """Check tick-level constraints that need the sample period."""
    k_start = tick_of(spec.t_start, sample_period)
    k_end = tick_of(spec.t_end, sample_period)
    if k_end <= k_start:
        raise ValueError("anomaly window is empty on the sampling grid")
    if spec.kind == AnomalyKind.INSTANT and k_end - k_start != 1:
        raise ValueError("an instant anomaly must span exactly one sample period")


def inject(meas: Measurement, spec: AnomalySpec,
           prev_clean: Optional[Measurement], prev_hacked: Optional[Measurement],
           k: int, sample_period: float) -> Measurement:
    """Apply one anomaly to one measurement at tick k.

    ``prev_clean`` / ``prev_hacked`` are the previous tick's clean and
    injected measurements; drift needs them for every tick after the start
    tick, the other kinds ignore them.
    """
    if meas.sensor != spec.sensor:
        raise ValueError(
            f"anomaly targets {spec.sensor.name.lower()} but measurement is "
            f"from {meas.sensor.name.lower()}"
        )
    k_start = tick_of(spec.t_start, sample_period)
    k_end = tick_of(spec.t_end, sample_period)
    if k < k_start or k >= k_end:
        return meas

    dim = dimension_index(spec.sensor, spec.dimension)

    if spec.kind == AnomalyKind.INSTANT:
        offset = spec.magnitude if k == k_start else 0.0
    elif spec.kind == AnomalyKind.BIAS:
        offset = spec.magnitude
    elif spec.kind == AnomalyKind.DRIFT:
        if k == k_start:
            offset = 0.0
        else:
            if prev_clean is None or prev_hacked is None:
                raise ValueError("drift injection needs the previous clean and "
                                 "hacked measurements after the start tick")
            carried = prev_hacked.values[dim] - prev_clean.values[dim]
            offset = carried + spec.magnitude * sample_period
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown anomaly kind: {spec.kind!r}")

    if offset == 0.0:
        return meas
    values = meas.values.copy()
    values[dim] += offset
    return replace(meas, values=values)


class AnomalyInjector:
    """Applies one anomaly to a measurement stream, keeping drift history.

    One injector serves one trial; call :meth:`apply` for every measurement
    of the targeted sensor, in tick order.
    """

    def __init__(self, spec: AnomalySpec, sample_period: float):
        validate_spec(spec, sample_period)
        self.spec = spec
        self.sample_period = sample_period
        self._prev_clean: Optional[Measurement] = None
        self._prev_hacked: Optional[Measurement] = None

    def apply(self, meas: Measurement, k: int) -> Measurement:
        hacked = inject(meas, self.spec, self._prev_clean, self._prev_hacked,
                        k, self.sample_period)
        self._prev_clean = meas
        self._prev_hacked = hacked
        return hacked


# Campaign grids: counts, ranges and durations of the benchmark matrix.
INSTANT_MAGNITUDES = tuple(np.logspace(np.log10(0.1), np.log10(10.0), 10))
BIAS_MAGNITUDES = tuple(np.logspace(np.log10(0.1), np.log10(3.0), 5))
DRIFT_RATES = tuple(np.logspace(np.log10(0.1), np.log10(3.0), 5))
FAULT_DURATIONS = (0.25, 0.5, 1.0, 2.5)


def build_campaign_specs(sensor: SensorId = SensorId.RSU,
                         dimension=0,
                         t_start: float = 30.0,
                         sample_period: float = 0.05) -> List[AnomalySpec]:
    """The 50-trial benchmark matrix targeting one measurement dimension.

    10 instant spikes with log-spaced magnitudes between 0.1 and 10, each
    one sample long; 5 bias magnitudes between 0.1 and 3 crossed with four
    durations; 5 drift rates between 0.1 and 3 crossed with the same
    durations.
    """
    dim = dimension_index(sensor, dimension)
    specs: List[AnomalySpec] = []
    for magnitude in INSTANT_MAGNITUDES:
        specs.append(AnomalySpec(AnomalyKind.INSTANT, sensor, dim, float(magnitude),
                                 t_start, t_start + sample_period))
    for magnitude in BIAS_MAGNITUDES:
        for duration in FAULT_DURATIONS:
            specs.append(AnomalySpec(AnomalyKind.BIAS, sensor, dim, float(magnitude),
                                     t_start, t_start + duration))
    for rate in DRIFT_RATES:
        for duration in FAULT_DURATIONS:
            specs.append(AnomalySpec(AnomalyKind.DRIFT, sensor, dim, float(rate),
                                     t_start, t_start + duration))
    return specs
