"""Benchmark harness: run the injection matrix and score detections.

A trial is the full closed loop for one anomaly: simulate the scenario,
inject the fault into the targeted sensor stream, run the detector, then
score the event log. A detection counts as a true positive only if it lands
on the injected (sensor, dimension) pair with onset inside the scoring
window [t_start, t_end + horizon * sample_period]; every flagged pair other
than the injected one counts as a false positive, including same-sensor
wrong-dimension flags.

Trials are independent and individually seeded, so the matrix can run on
any number of workers and still aggregate to bit-identical reports.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .detector import EkfFaultDetector
from .inject import AnomalyInjector, build_campaign_specs
from .sim import Scenario, default_scenario, ground_truth, sample_sensors
from .types import (
    AnomalySpec,
    DetectorConfig,
    NoiseSpec,
    SensorId,
    default_config,
    default_noise,
    MEASUREMENT_LAYOUTS,
)

ALL_SENSORS = frozenset(SensorId)


@dataclass
class TrialOutcome:
    """Scored result of one (anomaly, seed) trial."""

    spec: AnomalySpec
    seed: int
    detected: bool
    latency: Optional[float]
    false_positives: List[Tuple[SensorId, int]]
    enabled_sensors: frozenset

    @property
    def has_false_positive(self) -> bool:
        return bool(self.false_positives)


def run_trial(scenario: Scenario, spec: AnomalySpec, config: DetectorConfig,
              enabled: Set[SensorId], seed: int,
              noise: Optional[NoiseSpec] = None,
              record_series: bool = False) -> Tuple[TrialOutcome, EkfFaultDetector]:
    """Simulate, inject, filter and score one trial.

    The explicit ``seed`` drives the sensor noise (the scenario's own seed
    field is ignored here so one scenario can be swept over many seeds).
    Returns the outcome together with the detector, whose event log (and
    series rows, if requested) the caller may inspect further.
    """
    if spec.sensor not in enabled:
        raise ValueError("the attacked sensor must be enabled")
    noise = noise if noise is not None else default_noise()
    dt = config.sample_period
    ticks = int(round(scenario.duration / dt))

    rng = np.random.default_rng(seed)
    detector = EkfFaultDetector(config, record_series=record_series)
    injector = AnomalyInjector(spec, dt)

    for k in range(ticks):
        t = k * dt
        measurements = []
        for meas in sample_sensors(scenario, t, noise, rng):
            if meas.sensor not in enabled:
                continue
            if meas.available and meas.sensor == spec.sensor:
                meas = injector.apply(meas, k)
            measurements.append(meas)
        detector.step(measurements)

    outcome = score_trial(detector, spec, config, enabled, seed)
    return outcome, detector


def run_single(scenario: Scenario, config: DetectorConfig,
               anomalies: Sequence[AnomalySpec] = (),
               noise: Optional[NoiseSpec] = None,
               enabled: Set[SensorId] = ALL_SENSORS,
               record_series: bool = True) -> Tuple[EkfFaultDetector, List[tuple]]:
    """One full run with any number of anomalies, keeping export records.

    Returns the finished detector and per-tick track rows (time, estimated
    state, true state) for CSV export. Anomalies targeting the same sensor
    are applied in order, each treating its predecessor's output as the
    clean stream.
    """
    noise = noise if noise is not None else default_noise()
    dt = config.sample_period
    ticks = int(round(scenario.duration / dt))
    rng = np.random.default_rng(scenario.seed)
    detector = EkfFaultDetector(config, record_series=record_series)
    injectors = [AnomalyInjector(spec, dt) for spec in anomalies]

    track_rows: List[tuple] = []
    for k in range(ticks):
        t = k * dt
        measurements = []
        for meas in sample_sensors(scenario, t, noise, rng):
            if meas.sensor not in enabled:
                continue
            if meas.available:
                for injector in injectors:
                    if injector.spec.sensor == meas.sensor:
                        meas = injector.apply(meas, k)
            measurements.append(meas)
        estimate, _, _ = detector.step(measurements)
        truth = ground_truth(scenario, t)
        track_rows.append((t, *estimate.mean.as_array().tolist(),
                           *truth.as_array().tolist()))
    return detector, track_rows


def score_trial(detector: EkfFaultDetector, spec: AnomalySpec,
                config: DetectorConfig, enabled: Set[SensorId],
                seed: int) -> TrialOutcome:
    """Score a finished detector run against the injected anomaly."""
    grace = config.horizon * config.sample_period
    window_lo = spec.t_start - 1e-9
    window_hi = spec.t_end + grace + 1e-9
    target = (spec.sensor, int(spec.dimension))

    detected = False
    latency = None
    false_pairs = set()
    for event in detector.events:
        pair = (event.sensor, event.dimension)
        if pair == target:
            if window_lo <= event.onset <= window_hi:
                if not detected or event.onset - spec.t_start < latency:
                    latency = event.onset - spec.t_start
                detected = True
        else:
            false_pairs.add(pair)

    return TrialOutcome(
        spec=spec,
        seed=seed,
        detected=detected,
        latency=latency,
        false_positives=sorted(false_pairs),
        enabled_sensors=frozenset(enabled),
    )


@dataclass
class MatrixReport:
    """Aggregate of the full injection matrix over one or more seeds."""

    outcomes: List[TrialOutcome]
    seeds: Tuple[int, ...]
    enabled_sensors: frozenset
    tp_rate: float
    fp_rate: float
    tp_rate_by_seed: Dict[int, float]
    fp_rate_by_seed: Dict[int, float]
    mean_latency: Optional[float]
    detected_by_spec: List[bool] = field(default_factory=list)

    @property
    def n_specs(self) -> int:
        return len(self.outcomes) // max(len(self.seeds), 1)


def _run_trial_job(args) -> TrialOutcome:
    scenario, spec, config, enabled, seed, noise = args
    outcome, _ = run_trial(scenario, spec, config, enabled, seed, noise=noise)
    return outcome


def run_matrix(config: Optional[DetectorConfig] = None,
               enabled: Set[SensorId] = ALL_SENSORS,
               seeds: Sequence[int] = (0,),
               scenario: Optional[Scenario] = None,
               specs: Optional[Sequence[AnomalySpec]] = None,
               noise: Optional[NoiseSpec] = None,
               anomaly_start: float = 30.0,
               workers: int = 1) -> MatrixReport:
    """Run every anomaly in the matrix for every seed and aggregate.

    A spec counts as detected if it is detected in a majority of seeds; it
    counts toward the false-positive rate if any of its trials flagged a
    pair other than the injected one. Per-seed rates are reported alongside.
    Aggregation order is fixed, so reports are identical for any ``workers``.
    """
    if not seeds:
        raise ValueError("at least one seed is required")
    config = config if config is not None else default_config()
    if specs is None:
        specs = build_campaign_specs(t_start=anomaly_start,
                                     sample_period=config.sample_period)
    base_scenario = scenario if scenario is not None else default_scenario()

    jobs = []
    for spec in specs:
        for seed in seeds:
            jobs.append((base_scenario, spec, config, frozenset(enabled), seed, noise))

    if workers <= 1:
        outcomes = [_run_trial_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_trial_job, jobs, chunksize=1))

    n_seeds = len(seeds)
    by_spec = [outcomes[i * n_seeds:(i + 1) * n_seeds] for i in range(len(specs))]

    detected_by_spec = [sum(o.detected for o in group) * 2 > n_seeds for group in by_spec]
    fp_by_spec = [any(o.has_false_positive for o in group) for group in by_spec]

    tp_rate_by_seed = {}
    fp_rate_by_seed = {}
    for j, seed in enumerate(seeds):
        seed_outcomes = [group[j] for group in by_spec]
        tp_rate_by_seed[seed] = sum(o.detected for o in seed_outcomes) / len(specs)
        fp_rate_by_seed[seed] = sum(o.has_false_positive for o in seed_outcomes) / len(specs)

    latencies = [o.latency for o in outcomes if o.latency is not None]
    return MatrixReport(
        outcomes=outcomes,
        seeds=tuple(seeds),
        enabled_sensors=frozenset(enabled),
        tp_rate=sum(detected_by_spec) / len(specs),
        fp_rate=sum(fp_by_spec) / len(specs),
        tp_rate_by_seed=tp_rate_by_seed,
        fp_rate_by_seed=fp_rate_by_seed,
        mean_latency=float(np.mean(latencies)) if latencies else None,
        detected_by_spec=detected_by_spec,
    )


def grid_rows(report: MatrixReport) -> List[tuple]:
    """Per-trial rows for the grid CSV, in deterministic order."""
    rows = []
    for outcome in report.outcomes:
        spec = outcome.spec
        fp_label = ";".join(
            f"{sensor.name.lower()}:{MEASUREMENT_LAYOUTS[sensor][dim]}"
            for sensor, dim in outcome.false_positives
        )
        rows.append((
            spec.kind.value,
            spec.magnitude,
            spec.duration,
            int(outcome.detected),
            fp_label,
            "" if outcome.latency is None else outcome.latency,
            outcome.seed,
        ))
    return rows


def summarize(report: MatrixReport) -> str:
    """Human-readable summary block for a matrix run."""
    enabled = ",".join(s.name.lower() for s in sorted(report.enabled_sensors))
    lines = [
        f"enabled sensors: {enabled}",
        f"specs: {report.n_specs}  seeds: {list(report.seeds)}",
        f"true positive rate (majority vote): {report.tp_rate:.1%}",
        f"false positive rate (any seed):     {report.fp_rate:.1%}",
    ]
    for seed in report.seeds:
        lines.append(
            f"  seed {seed}: tp={report.tp_rate_by_seed[seed]:.1%} "
            f"fp={report.fp_rate_by_seed[seed]:.1%}"
        )
    if report.mean_latency is not None:
        lines.append(f"mean detection latency: {report.mean_latency:.3f} s")
    else:
        lines.append("mean detection latency: n/a (no detections)")
    return "\n".join(lines) + "\n"
