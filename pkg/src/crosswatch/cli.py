"""Command-line entry points.

Two subcommands cover the operational surface:

    crosswatch run [scenario.yaml] --out DIR [anomaly flags]
        One full run; writes residuals.csv, masks.csv, track.csv and
        events.csv into the output directory.

    crosswatch campaign [config.yaml] --out DIR [--seeds 1,2,3]
                        [--ablate radar,lidar] [--workers N]
        The 50-trial injection matrix; writes grid.csv and summary.txt.

Without a config file both commands run the reference setup. The default
output directory comes from $CROSSWATCH_OUTPUT_DIR when set.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import campaign as campaign_mod
from . import io as io_mod
from .inject import validate_spec
from .sim import Scenario
from .types import (
    MEASUREMENT_LAYOUTS,
    AnomalyKind,
    AnomalySpec,
    SensorId,
    dimension_index,
    sensor_from_name,
)

_DEFAULT_OUT = "crosswatch-output"


def _output_dir(arg) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get("CROSSWATCH_OUTPUT_DIR", _DEFAULT_OUT))


def _parse_seeds(text: str):
    try:
        seeds = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise io_mod.ConfigError(f"--seeds: expected comma-separated integers, got {text!r}")
    if not seeds:
        raise io_mod.ConfigError("--seeds: at least one seed required")
    return seeds


def _parse_ablate(text: str):
    disabled = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            disabled.add(sensor_from_name(part))
        except ValueError as exc:
            raise io_mod.ConfigError(f"--ablate: {exc}")
    return disabled


def _flag_anomaly(args, sample_period: float):
    if args.anomaly is None:
        for flag in ("magnitude", "t_start", "duration"):
            if getattr(args, flag) is not None:
                raise io_mod.ConfigError(f"--{flag.replace('_', '-')} requires --anomaly")
        return None
    kind = AnomalyKind(args.anomaly)
    sensor = sensor_from_name(args.sensor)
    try:
        dim = dimension_index(sensor, args.dimension)
    except ValueError as exc:
        raise io_mod.ConfigError(f"--dimension: {exc}")
    if args.magnitude is None or args.t_start is None:
        raise io_mod.ConfigError("--anomaly needs --magnitude and --t-start")
    if args.duration is not None:
        t_end = args.t_start + args.duration
    elif kind == AnomalyKind.INSTANT:
        t_end = args.t_start + sample_period
    else:
        raise io_mod.ConfigError("bias/drift anomalies need --duration")
    try:
        spec = AnomalySpec(kind, sensor, dim, args.magnitude, args.t_start, t_end)
        validate_spec(spec, sample_period)
    except ValueError as exc:
        raise io_mod.ConfigError(str(exc))
    return spec


def cmd_run(args) -> int:
    rc = io_mod.parse_scenario(args.scenario) if args.scenario else io_mod.parse_mapping({})
    if args.seed is not None:
        rc.scenario = Scenario(
            duration=rc.scenario.duration, waypoints=rc.scenario.waypoints,
            speeds=rc.scenario.speeds, visibility=rc.scenario.visibility,
            seed=args.seed, initial_heading=rc.scenario.initial_heading)
    anomalies = list(rc.anomalies)
    flag_spec = _flag_anomaly(args, rc.detector.sample_period)
    if flag_spec is not None:
        anomalies.append(flag_spec)
    for spec in anomalies:
        validate_spec(spec, rc.detector.sample_period)

    out = _output_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)

    detector, track_rows = campaign_mod.run_single(
        rc.scenario, rc.detector, anomalies, noise=rc.noise)

    io_mod.write_residuals_csv(out / "residuals.csv", detector.residual_rows)
    io_mod.write_masks_csv(out / "masks.csv", detector.mask_rows)
    io_mod.write_track_csv(out / "track.csv", track_rows)
    io_mod.write_events_csv(out / "events.csv", detector.events)

    print(f"run complete: {detector.tick} ticks, {len(detector.events)} detection "
          f"event(s); outputs in {out}")
    for event in detector.events:
        name = MEASUREMENT_LAYOUTS[event.sensor][event.dimension]
        cleared = "open" if event.clear is None else f"cleared {event.clear:.2f}s"
        print(f"  {event.sensor.name.lower()}.{name}: onset {event.onset:.2f}s ({cleared})")
    return 0


def cmd_campaign(args) -> int:
    rc = io_mod.parse_scenario(args.config) if args.config else io_mod.parse_mapping({})
    disabled = _parse_ablate(args.ablate) if args.ablate else set()
    enabled = set(SensorId) - disabled
    if not enabled:
        raise io_mod.ConfigError("--ablate: cannot disable every sensor")
    seeds = _parse_seeds(args.seeds) if args.seeds else [rc.scenario.seed]

    out = _output_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)

    report = campaign_mod.run_matrix(
        config=rc.detector,
        enabled=enabled,
        seeds=seeds,
        scenario=rc.scenario,
        noise=rc.noise,
        anomaly_start=args.anomaly_start,
        workers=args.workers,
    )
    io_mod.write_grid_csv(out / "grid.csv", campaign_mod.grid_rows(report))
    summary = campaign_mod.summarize(report)
    (out / "summary.txt").write_text(summary)
    print(summary, end="")
    print(f"outputs in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crosswatch",
        description="Multi-sensor track fusion with measurement fault detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="single run with optional injected anomalies")
    run.add_argument("scenario", nargs="?", help="scenario/config YAML file")
    run.add_argument("--out", "-o", help="output directory")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--anomaly", choices=[k.value for k in AnomalyKind],
                     help="inject one anomaly on top of the config file's list")
    run.add_argument("--magnitude", type=float, help="anomaly magnitude (m or m/s)")
    run.add_argument("--t-start", dest="t_start", type=float, help="anomaly onset (s)")
    run.add_argument("--duration", type=float, help="anomaly duration (s)")
    run.add_argument("--sensor", default="rsu", help="attacked sensor (default rsu)")
    run.add_argument("--dimension", default="x",
                     help="attacked measurement dimension, name or index (default x)")
    run.set_defaults(func=cmd_run)

    camp = sub.add_parser("campaign", help="run the 50-trial injection matrix")
    camp.add_argument("config", nargs="?", help="scenario/config YAML file")
    camp.add_argument("--out", "-o", help="output directory")
    camp.add_argument("--seeds", help="comma-separated seeds (default: scenario seed)")
    camp.add_argument("--ablate", help="comma-separated sensors to disable")
    camp.add_argument("--workers", type=int, default=1, help="parallel trial workers")
    camp.add_argument("--anomaly-start", dest="anomaly_start", type=float, default=30.0,
                      help="onset time of every injected anomaly (default 30 s)")
    camp.set_defaults(func=cmd_campaign)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except io_mod.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
