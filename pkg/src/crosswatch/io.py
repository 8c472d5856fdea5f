"""Scenario/config file handling and CSV emission.

One YAML file describes a whole run: the scenario (trajectory, visibility,
seed), the sensor noise, the detector parameters and any injected
anomalies. Every section is optional; omitted values fall back to the
reference defaults, so an empty file reproduces the standard setup. Unknown
keys are rejected with their full key path.

All CSV output uses a header row, period decimal separators and full float
precision, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence

import numpy as np
import yaml

from .detector import DetectionEvent
from .sim import Scenario, default_scenario
from .types import (
    MEASUREMENT_LAYOUTS,
    SENSOR_ORDER,
    AnomalyKind,
    AnomalySpec,
    DetectorConfig,
    NoiseSpec,
    SensorId,
    TrackState,
    default_thresholds,
    dimension_index,
    measurement_covariances_from_sigmas,
    sensor_from_name,
    DEFAULT_HORIZON,
    DEFAULT_SAMPLE_PERIOD,
    DEFAULT_PROCESS_NOISE_SCALE,
    DEFAULT_SIGMAS,
    STATE_DIM,
)


class ConfigError(ValueError):
    """Config file problem, reported with the offending key path."""


@dataclass
class RunConfig:
    """Everything a single run needs, as parsed from one file."""

    scenario: Scenario
    noise: NoiseSpec
    detector: DetectorConfig
    anomalies: List[AnomalySpec] = field(default_factory=list)


# ---------------------------------------------------------------------------
# parsing helpers

def _require_mapping(value, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(value).__name__}")
    return value


def _reject_unknown(mapping: dict, allowed, path: str) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(map(repr, unknown))}")


def _number(value, path: str, *, positive: bool = False, nonnegative: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    value = float(value)
    if positive and value <= 0:
        raise ConfigError(f"{path}: must be > 0, got {value}")
    if nonnegative and value < 0:
        raise ConfigError(f"{path}: must be >= 0, got {value}")
    return value


def _integer(value, path: str, *, positive: bool = False) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(f"{path}: must be > 0, got {value}")
    return value


def _sensor(name, path: str) -> SensorId:
    if not isinstance(name, str):
        raise ConfigError(f"{path}: expected a sensor name, got {name!r}")
    try:
        return sensor_from_name(name)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _per_dimension_vector(value, sensor: SensorId, defaults: np.ndarray,
                          path: str, *, positive: bool) -> np.ndarray:
    """A full per-dimension list, or a mapping overriding single dimensions."""
    layout = MEASUREMENT_LAYOUTS[sensor]
    if isinstance(value, (list, tuple)):
        if len(value) != len(layout):
            raise ConfigError(f"{path}: expected {len(layout)} entries for "
                              f"{sensor.name.lower()}, got {len(value)}")
        return np.array([_number(v, f"{path}[{i}]", positive=positive)
                         for i, v in enumerate(value)])
    if isinstance(value, dict):
        out = defaults.copy()
        for dim_name, v in value.items():
            if dim_name not in layout:
                raise ConfigError(f"{path}.{dim_name}: {sensor.name.lower()} has no "
                                  f"dimension {dim_name!r}; layout is {layout}")
            out[layout.index(dim_name)] = _number(v, f"{path}.{dim_name}",
                                                  positive=positive)
        return out
    raise ConfigError(f"{path}: expected a list or mapping")


def _parse_scenario_section(section, path: str) -> Scenario:
    section = _require_mapping(section, path)
    allowed = ("duration", "seed", "waypoints", "speeds", "heading", "visibility")
    _reject_unknown(section, allowed, path)

    base = default_scenario()
    duration = _number(section.get("duration", base.duration),
                       f"{path}.duration", positive=True)
    seed = _integer(section.get("seed", base.seed), f"{path}.seed")

    if "waypoints" in section:
        raw = section["waypoints"]
        if not isinstance(raw, list) or not raw:
            raise ConfigError(f"{path}.waypoints: expected a non-empty list of [x, y] pairs")
        waypoints = []
        for i, pair in enumerate(raw):
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise ConfigError(f"{path}.waypoints[{i}]: expected an [x, y] pair")
            waypoints.append((_number(pair[0], f"{path}.waypoints[{i}][0]"),
                              _number(pair[1], f"{path}.waypoints[{i}][1]")))
        waypoints = tuple(waypoints)
    else:
        waypoints = base.waypoints

    n_segments = max(len(waypoints) - 1, 0)
    if "speeds" in section:
        raw = section["speeds"]
        if not isinstance(raw, list):
            raise ConfigError(f"{path}.speeds: expected a list")
        speeds = tuple(_number(v, f"{path}.speeds[{i}]", positive=True)
                       for i, v in enumerate(raw))
    elif n_segments == len(base.speeds) and waypoints == base.waypoints:
        speeds = base.speeds
    else:
        speeds = tuple(1.4 for _ in range(n_segments))
    if len(speeds) != n_segments:
        raise ConfigError(f"{path}.speeds: need {n_segments} speeds for "
                          f"{len(waypoints)} waypoints, got {len(speeds)}")

    heading = _number(section.get("heading", base.initial_heading), f"{path}.heading")

    if "visibility" in section:
        vis_map = _require_mapping(section["visibility"], f"{path}.visibility")
        visibility = {}
        for key, window in vis_map.items():
            sensor = _sensor(key, f"{path}.visibility")
            if not isinstance(window, (list, tuple)) or len(window) != 2:
                raise ConfigError(f"{path}.visibility.{key}: expected [t_on, t_off]")
            visibility[sensor] = (_number(window[0], f"{path}.visibility.{key}[0]",
                                          nonnegative=True),
                                  _number(window[1], f"{path}.visibility.{key}[1]",
                                          positive=True))
    elif "duration" in section or "waypoints" in section:
        visibility = {sensor: (0.0, duration) for sensor in SENSOR_ORDER}
    else:
        visibility = dict(base.visibility)

    try:
        return Scenario(duration=duration, waypoints=waypoints, speeds=speeds,
                        visibility=visibility, seed=seed, initial_heading=heading)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_noise_section(section, path: str) -> NoiseSpec:
    section = _require_mapping(section, path)
    _reject_unknown(section, ("q", "sigmas"), path)
    q = _number(section.get("q", DEFAULT_PROCESS_NOISE_SCALE), f"{path}.q", positive=True)
    sigmas = {s: np.array(v) for s, v in DEFAULT_SIGMAS.items()}
    if "sigmas" in section:
        sigma_map = _require_mapping(section["sigmas"], f"{path}.sigmas")
        for key, value in sigma_map.items():
            sensor = _sensor(key, f"{path}.sigmas")
            sigmas[sensor] = _per_dimension_vector(value, sensor, sigmas[sensor],
                                                   f"{path}.sigmas.{key}", positive=True)
    try:
        return NoiseSpec(sigmas=sigmas, q=q)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_detector_section(section, noise: NoiseSpec, path: str) -> DetectorConfig:
    section = _require_mapping(section, path)
    _reject_unknown(section, ("horizon", "sample_period", "thresholds"), path)
    horizon = _integer(section.get("horizon", DEFAULT_HORIZON),
                       f"{path}.horizon", positive=True)
    sample_period = _number(section.get("sample_period", DEFAULT_SAMPLE_PERIOD),
                            f"{path}.sample_period", positive=True)
    thresholds = default_thresholds()
    if "thresholds" in section:
        thr_map = _require_mapping(section["thresholds"], f"{path}.thresholds")
        for key, value in thr_map.items():
            sensor = _sensor(key, f"{path}.thresholds")
            thresholds[sensor] = _per_dimension_vector(
                value, sensor, thresholds[sensor], f"{path}.thresholds.{key}",
                positive=True)
    try:
        return DetectorConfig(
            horizon=horizon,
            sample_period=sample_period,
            thresholds=thresholds,
            initial_state=TrackState.zero(),
            initial_covariance=np.eye(STATE_DIM),
            process_covariance=noise.q * np.eye(STATE_DIM),
            measurement_covariances=measurement_covariances_from_sigmas(noise.sigmas),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_anomaly(entry, sample_period: float, path: str) -> AnomalySpec:
    entry = _require_mapping(entry, path)
    allowed = ("kind", "sensor", "dimension", "magnitude", "t_start", "t_end", "duration")
    _reject_unknown(entry, allowed, path)
    if "kind" not in entry:
        raise ConfigError(f"{path}.kind: required")
    try:
        kind = AnomalyKind(str(entry["kind"]))
    except ValueError:
        raise ConfigError(f"{path}.kind: expected one of "
                          f"{[k.value for k in AnomalyKind]}, got {entry['kind']!r}") from None
    sensor = _sensor(entry.get("sensor", "rsu"), f"{path}.sensor")
    try:
        dim = dimension_index(sensor, entry.get("dimension", 0))
    except ValueError as exc:
        raise ConfigError(f"{path}.dimension: {exc}") from None
    magnitude = _number(entry.get("magnitude", 0.0), f"{path}.magnitude", nonnegative=True)
    if "t_start" not in entry:
        raise ConfigError(f"{path}.t_start: required")
    t_start = _number(entry["t_start"], f"{path}.t_start", nonnegative=True)
    if "t_end" in entry and "duration" in entry:
        raise ConfigError(f"{path}: give either t_end or duration, not both")
    if "t_end" in entry:
        t_end = _number(entry["t_end"], f"{path}.t_end", positive=True)
    elif "duration" in entry:
        t_end = t_start + _number(entry["duration"], f"{path}.duration", positive=True)
    elif kind == AnomalyKind.INSTANT:
        t_end = t_start + sample_period
    else:
        raise ConfigError(f"{path}: bias/drift anomalies need t_end or duration")
    try:
        return AnomalySpec(kind, sensor, dim, magnitude, t_start, t_end)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_mapping(raw) -> RunConfig:
    """Build a RunConfig from an already-loaded mapping."""
    raw = _require_mapping(raw, "<root>")
    _reject_unknown(raw, ("scenario", "noise", "detector", "anomalies"), "<root>")
    scenario = _parse_scenario_section(raw.get("scenario"), "scenario")
    noise = _parse_noise_section(raw.get("noise"), "noise")
    detector = _parse_detector_section(raw.get("detector"), noise, "detector")

    anomalies: List[AnomalySpec] = []
    if "anomalies" in raw and raw["anomalies"] is not None:
        entries = raw["anomalies"]
        if not isinstance(entries, list):
            raise ConfigError("anomalies: expected a list")
        for i, entry in enumerate(entries):
            anomalies.append(_parse_anomaly(entry, detector.sample_period,
                                            f"anomalies[{i}]"))
    return RunConfig(scenario=scenario, noise=noise, detector=detector,
                     anomalies=anomalies)


def parse_scenario(path) -> RunConfig:
    """Parse a scenario/config file, applying defaults for missing sections."""
    text = Path(path).read_text()
    return parse_text(text)


def parse_text(text: str) -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from None
    return parse_mapping(raw)


# ---------------------------------------------------------------------------
# serialization

def to_mapping(rc: RunConfig) -> dict:
    """Canonical plain-data form of a RunConfig; parsing it back gives an
    equal configuration."""
    scenario = rc.scenario
    return {
        "scenario": {
            "duration": scenario.duration,
            "seed": scenario.seed,
            "waypoints": [list(p) for p in scenario.waypoints],
            "speeds": list(scenario.speeds),
            "heading": scenario.initial_heading,
            "visibility": {
                s.name.lower(): list(scenario.visibility[s])
                for s in SENSOR_ORDER if s in scenario.visibility
            },
        },
        "noise": {
            "q": rc.noise.q,
            "sigmas": {s.name.lower(): rc.noise.sigmas[s].tolist()
                       for s in SENSOR_ORDER},
        },
        "detector": {
            "horizon": rc.detector.horizon,
            "sample_period": rc.detector.sample_period,
            "thresholds": {s.name.lower(): rc.detector.thresholds[s].tolist()
                           for s in SENSOR_ORDER},
        },
        "anomalies": [
            {
                "kind": a.kind.value,
                "sensor": a.sensor.name.lower(),
                "dimension": MEASUREMENT_LAYOUTS[a.sensor][a.dimension],
                "magnitude": a.magnitude,
                "t_start": a.t_start,
                "t_end": a.t_end,
            }
            for a in rc.anomalies
        ],
    }


def serialize_run_config(rc: RunConfig) -> str:
    return yaml.safe_dump(to_mapping(rc), sort_keys=False)


# ---------------------------------------------------------------------------
# CSV emission

def _write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def write_residuals_csv(path, rows) -> None:
    """Rows as produced by EkfFaultDetector.residual_rows."""
    _write_csv(path, ("t", "sensor", "dimension", "r", "r_hat", "alpha", "mask"), rows)


def write_masks_csv(path, rows) -> None:
    _write_csv(path, ("t", "sensor", "dimension", "mask"), rows)


def write_track_csv(path, rows) -> None:
    header = ("t",
              "est_x", "est_y", "est_theta", "est_v", "est_v_theta", "est_a",
              "true_x", "true_y", "true_theta", "true_v", "true_v_theta", "true_a")
    _write_csv(path, header, rows)


def write_events_csv(path, events: Sequence[DetectionEvent]) -> None:
    rows = [
        (e.sensor.name.lower(), MEASUREMENT_LAYOUTS[e.sensor][e.dimension],
         e.onset, "" if e.clear is None else e.clear)
        for e in events
    ]
    _write_csv(path, ("sensor", "dimension", "onset", "clear"), rows)


def write_grid_csv(path, rows) -> None:
    _write_csv(path, ("kind", "magnitude", "duration", "detected", "fp_sensors",
                      "latency_s", "seed"), rows)
