"""
Run reports: the per-tick trace (run.csv), its summary (summary.json) and plots.

run.csv layout:
    # {"schema_version": 1, ...}          metadata, one JSON object
    t,true_range,bearing,s<id>_measured,...  header
    ...                                   one row per tick
    # end rows=N                          end marker

The summary is always computed from the formatted rows, so replaying a
stored run.csv reproduces summary.json exactly.
"""

import csv
import hashlib
import json
import os
import re
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.constants import CSV_SCHEMA_VERSION, LATENCY_BOUND_MARGIN
from core.enums import PublishStatus, RunMode, SupervisorMode
from core.exceptions import ReportWriteError, SchemaError, SchemaVersionError
from logging_config import get_logger
from models.metrics import LatencyStats, RunCounts, RunMetrics, RunSummary
from models.readings import ZoneThresholds
from models.robot import RobotConfig, RobotState
from models.scenario import ScenarioSpec
from models.sensor import ObjectState
from services.robot_service import score_safety
from services.sensor_node import PublishOutcome
from utils.svg_plot import Guide, Series, write_plot

logger = get_logger(__name__)

RUN_CSV = "run.csv"
SUMMARY_JSON = "summary.json"
METADATA_PREFIX = "# "
END_MARKER_PATTERN = re.compile(r"^# end rows=(\d+)$")
LEADING_COLUMNS = ["t", "true_range", "bearing"]
TRAILING_COLUMNS = ["entry_id", "mode", "override", "robot_speed", "latency_s", "published", "dropped",
                    "rate_limited", "suppressed", "polled", "decode_errors", "transport_errors"]
SUMMARY_DECIMALS = 6


def csv_header(sensor_ids: List[int]) -> List[str]:
    return LEADING_COLUMNS + [f"s{sensor_id}_measured" for sensor_id in sensor_ids] + TRAILING_COLUMNS


def run_metadata(spec: ScenarioSpec, mode: RunMode) -> Dict[str, Any]:
    return {
        "schema_version": CSV_SCHEMA_VERSION,
        "scenario": spec.name,
        "mode": mode.value,
        "seed": spec.seed,
        "tick": spec.tick,
        "sensor_ids": spec.sensor_ids,
        "d_stop": spec.zones.d_stop,
        "d_slow": spec.zones.d_slow,
        "envelope_radius": spec.robot.envelope_radius,
        "nominal_speed": spec.robot.nominal_speed,
        "write_interval": spec.timing.write_interval,
        "poll_interval": spec.timing.poll_interval,
    }


# ============================================================================
# Recording
# ============================================================================

@dataclass
class TickRecord:
    """Everything one tick contributes to run.csv."""

    t: float
    true_range: float
    bearing: float
    measured: Dict[int, str] = field(default_factory=dict)
    entry_id: Optional[int] = None
    mode: Optional[SupervisorMode] = None
    override: float = 0.0
    robot_speed: float = 0.0
    latency: Optional[float] = None
    published: int = 0
    dropped: int = 0
    rate_limited: int = 0
    suppressed: int = 0
    polled: int = 0
    decode_errors: int = 0
    transport_errors: int = 0

    def count(self, outcome: PublishOutcome) -> None:
        if outcome.status == PublishStatus.PUBLISHED:
            self.published += 1
            self.measured[outcome.sensor_id] = outcome.value
        elif outcome.status == PublishStatus.DROPPED:
            self.dropped += 1
            self.transport_errors += int(outcome.error)
        elif outcome.status == PublishStatus.RATE_LIMITED:
            self.rate_limited += 1
        else:
            self.suppressed += 1


def _optional(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def format_row(record: TickRecord, sensor_ids: List[int]) -> List[str]:
    return (
        [f"{record.t:.6f}", f"{record.true_range:.6f}", f"{record.bearing:.6f}"]
        + [record.measured.get(sensor_id, "") for sensor_id in sensor_ids]
        + [
            "" if record.entry_id is None else str(record.entry_id),
            record.mode.value if record.mode else "",
            f"{record.override:.6f}",
            f"{record.robot_speed:.6f}",
            _optional(record.latency),
            str(record.published),
            str(record.dropped),
            str(record.rate_limited),
            str(record.suppressed),
            str(record.polled),
            str(record.decode_errors),
            str(record.transport_errors),
        ]
    )


class RunRecorder:
    """Collects tick records for one run. Only the collecting task writes to it."""

    def __init__(self, spec: ScenarioSpec, mode: RunMode) -> None:
        self.metadata = run_metadata(spec, mode)
        self.sensor_ids = spec.sensor_ids
        self.records: List[TickRecord] = []

    def record(self, record: TickRecord) -> None:
        self.records.append(record)

    def fold_late(self, outcomes: List[PublishOutcome]) -> None:
        """Count outcomes that arrived after the last tick against the last row."""
        if not self.records:
            return
        for outcome in outcomes:
            self.records[-1].count(outcome)

    def finish(self) -> RunMetrics:
        rows = [format_row(record, self.sensor_ids) for record in self.records]
        return RunMetrics(metadata=self.metadata, rows=rows, summary=summarize(self.metadata, rows))


# ============================================================================
# Summary
# ============================================================================

def _rounded(value: float) -> float:
    return round(float(value), SUMMARY_DECIMALS)


def summarize(metadata: Dict[str, Any], rows: List[List[str]]) -> RunSummary:
    """
    Derive counts, latency statistics and the safety outcome from formatted rows.

    Raises:
        SchemaError: When a row does not parse
    """
    if not rows:
        raise SchemaError("A run needs at least one row")
    header = csv_header(metadata["sensor_ids"])
    column = {name: index for index, name in enumerate(header)}
    robot = RobotConfig(nominal_speed=metadata["nominal_speed"], envelope_radius=metadata["envelope_radius"])
    zones = ZoneThresholds(metadata["d_stop"], metadata["d_slow"])

    trace: List[Tuple[ObjectState, RobotState]] = []
    latencies: List[float] = []
    totals = {name: 0 for name in ("published", "dropped", "rate_limited", "suppressed", "polled",
                                   "decode_errors", "transport_errors")}
    stale_faults = 0
    transitions: List[Dict[str, Any]] = []
    samples = {str(sensor_id): 0 for sensor_id in metadata["sensor_ids"]}
    last_mode = None

    for line_number, row in enumerate(rows, 1):
        try:
            trace.append((
                ObjectState(float(row[column["true_range"]]), float(row[column["bearing"]])),
                RobotState(actual_speed=float(row[column["robot_speed"]]),
                           applied_override=float(row[column["override"]])),
            ))
            for name in totals:
                totals[name] += int(row[column[name]])
            if row[column["latency_s"]]:
                latencies.append(float(row[column["latency_s"]]))
        except (ValueError, IndexError) as e:
            raise SchemaError(f"Row {line_number} does not parse: {e}") from e

        mode = row[column["mode"]]
        if int(row[column["polled"]]) and mode == SupervisorMode.FAULT_STOP.value:
            stale_faults += 1
        if mode and mode != last_mode:
            transitions.append({"t": float(row[column["t"]]), "mode": mode})
            last_mode = mode
        for sensor_id in metadata["sensor_ids"]:
            if row[column[f"s{sensor_id}_measured"]]:
                samples[str(sensor_id)] += 1

    latency = LatencyStats()
    if latencies:
        values = np.asarray(latencies, dtype=float)
        latency = LatencyStats(
            count=len(latencies),
            p50=_rounded(np.percentile(values, 50)),
            p95=_rounded(np.percentile(values, 95)),
            max=_rounded(values.max()),
        )

    safety = score_safety(trace, robot, zones)
    safety = replace(safety, min_object_clearance=_rounded(safety.min_object_clearance))

    counts = RunCounts(
        attempts=totals["published"] + totals["dropped"] + totals["rate_limited"] + totals["suppressed"],
        published=totals["published"],
        dropped=totals["dropped"],
        rate_limited=totals["rate_limited"],
        suppressed=totals["suppressed"],
        transport_errors=totals["transport_errors"],
        polls=totals["polled"],
        stale_faults=stale_faults,
        decode_errors=totals["decode_errors"],
    )
    return RunSummary(
        rows=len(rows),
        duration=round(len(rows) * metadata["tick"], 9),
        counts=counts,
        latency=latency,
        safety=safety,
        transitions=transitions,
        samples_per_sensor=samples,
    )


# ============================================================================
# Files
# ============================================================================

def summary_json(summary: RunSummary) -> str:
    return json.dumps(summary.to_dict(), sort_keys=True, indent=2) + "\n"


def _plot_report(metrics: RunMetrics, out_dir: str) -> List[str]:
    header = csv_header(metrics.metadata["sensor_ids"])
    column = {name: index for index, name in enumerate(header)}
    times = [float(row[column["t"]]) for row in metrics.rows]

    def points(name: str) -> List[Tuple[float, float]]:
        return [(t, float(row[column[name]])) for t, row in zip(times, metrics.rows) if row[column[name]] != ""]

    distance_series = [Series("true range", points("true_range"))]
    for sensor_id in metrics.metadata["sensor_ids"]:
        measured = [(t, value) for t, value in points(f"s{sensor_id}_measured") if value >= 0]
        distance_series.append(Series(f"sensor {sensor_id} (channel)", measured, style="points"))

    paths = [os.path.join(out_dir, name) for name in ("distance.svg", "override.svg", "speed.svg")]
    write_plot(paths[0], "Object distance", "time (s)", "distance (m)", distance_series,
               guides=[Guide(metrics.metadata["d_stop"], "d_stop"), Guide(metrics.metadata["d_slow"], "d_slow")])
    write_plot(paths[1], "Speed override", "time (s)", "override", [Series("override", points("override"), "step")])
    write_plot(paths[2], "Robot speed", "time (s)", "speed (m/s)",
               [Series("actual speed", points("robot_speed"), "step")],
               guides=[Guide(metrics.metadata["nominal_speed"], "nominal")])
    return paths


def write_run_csv(path: str, metrics: RunMetrics) -> None:
    with open(path, "w", encoding="utf-8", newline="") as csv_file:
        csv_file.write(METADATA_PREFIX + json.dumps(metrics.metadata, sort_keys=True) + "\n")
        writer = csv.writer(csv_file, lineterminator="\n")
        writer.writerow(csv_header(metrics.metadata["sensor_ids"]))
        writer.writerows(metrics.rows)
        csv_file.write(f"# end rows={len(metrics.rows)}\n")


def emit_report(metrics: RunMetrics, out_dir: str) -> List[str]:
    """
    Write run.csv, summary.json and the distance, override and speed plots.

    Re-emitting the same metrics produces identical files.

    Returns:
        Paths of the written files

    Raises:
        ReportWriteError: When the directory or a file cannot be written
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, RUN_CSV)
        write_run_csv(csv_path, metrics)
        summary_path = os.path.join(out_dir, SUMMARY_JSON)
        with open(summary_path, "w", encoding="utf-8", newline="\n") as summary_file:
            summary_file.write(summary_json(metrics.summary))
        plot_paths = _plot_report(metrics, out_dir)
    except OSError as e:
        raise ReportWriteError(f"Cannot write report to {out_dir}: {e}") from e
    logger.info(f"Report written to {out_dir}")
    return [csv_path, summary_path] + plot_paths


def read_run_csv(path: str) -> Tuple[Dict[str, Any], List[List[str]]]:
    """
    Parse a stored run.csv.

    Raises:
        SchemaVersionError: The file was written by another schema version
        SchemaError: The file is truncated or does not follow the layout
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as csv_file:
            lines = csv_file.read().splitlines()
    except OSError as e:
        raise SchemaError(f"Cannot read {path}: {e}") from e

    if not lines or not lines[0].startswith(METADATA_PREFIX):
        raise SchemaError(f"{path}: missing metadata line")
    try:
        metadata = json.loads(lines[0][len(METADATA_PREFIX):])
    except ValueError as e:
        raise SchemaError(f"{path}: metadata line is not JSON: {e}") from e
    if not isinstance(metadata, dict):
        raise SchemaError(f"{path}: metadata line is not a JSON object")
    if metadata.get("schema_version") != CSV_SCHEMA_VERSION:
        raise SchemaVersionError(metadata.get("schema_version"), CSV_SCHEMA_VERSION)
    missing = [key for key in ("sensor_ids", "tick", "d_stop", "d_slow", "envelope_radius", "nominal_speed")
               if key not in metadata]
    if missing:
        raise SchemaError(f"{path}: metadata lacks {missing}")

    if len(lines) < 2:
        raise SchemaError(f"{path}: truncated before the header")
    header = next(csv.reader([lines[1]]))
    expected = csv_header(metadata["sensor_ids"])
    if header != expected:
        raise SchemaError(f"{path}: header {header} does not match {expected}")

    end = END_MARKER_PATTERN.match(lines[-1]) if len(lines) > 2 else None
    if not end:
        raise SchemaError(f"{path}: truncated, end marker missing")
    rows = list(csv.reader(lines[2:-1]))
    if len(rows) != int(end.group(1)):
        raise SchemaError(f"{path}: end marker announces {end.group(1)} rows, found {len(rows)}")
    for line_number, row in enumerate(rows, 3):
        if len(row) != len(expected):
            raise SchemaError(f"{path}:{line_number}: expected {len(expected)} columns, got {len(row)}")
    return metadata, rows


def replay(csv_path: str) -> RunMetrics:
    """Recompute the summary of a stored run."""
    metadata, rows = read_run_csv(csv_path)
    logger.debug(f"Replaying {len(rows)} rows from {csv_path}")
    return RunMetrics(metadata=metadata, rows=rows, summary=summarize(metadata, rows))


def file_digest(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as stream:
        for chunk in iter(lambda: stream.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ============================================================================
# Acceptance
# ============================================================================

def latency_bound(spec: ScenarioSpec) -> float:
    return spec.timing.write_interval + spec.timing.poll_interval + LATENCY_BOUND_MARGIN


def check_acceptance(spec: ScenarioSpec, metrics: RunMetrics, mode: RunMode) -> List[str]:
    """
    List the acceptance bounds the run violated; empty means the run passed.

    The latency bound only applies to real-time runs.
    """
    violations = []
    safety = metrics.safety
    if not safety.stop_achieved_before_d_stop:
        violations.append(f"robot was moving after the object reached d_stop "
                          f"(first inside at tick {safety.first_inside_d_stop_tick})")
    if safety.violation_ticks:
        violations.append(f"object inside the envelope while the robot moved for {safety.violation_ticks} ticks")
    if mode == RunMode.REALTIME and metrics.latency.p95 is not None and metrics.latency.p95 > latency_bound(spec):
        violations.append(f"p95 latency {metrics.latency.p95:.3f}s exceeds {latency_bound(spec):.3f}s")
    return violations
