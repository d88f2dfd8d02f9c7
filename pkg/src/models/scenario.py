"""
Scenario files: a declarative description of one reproducible run.

A scenario is JSON with an explicit "schema_version". Loading validates the
whole document and reports every problem with its field path before
anything is executed.
"""

import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

from core.constants import (
    DEFAULT_CHANNEL_ID, DEFAULT_CLOCK_SKEW_GRACE, DEFAULT_MAX_RANGE, DEFAULT_MIN_WRITE_INTERVAL,
    DEFAULT_NOISE_SIGMA, DEFAULT_POLL_INTERVAL, DEFAULT_QUANTUM, DEFAULT_READ_KEY, DEFAULT_REFINE_WINDOW,
    DEFAULT_TICK, DEFAULT_TRANSPORT_GRACE, DEFAULT_WRITE_INTERVAL, DEFAULT_WRITE_KEY, MAX_SENSORS_PER_CHANNEL,
    PRECISE_TIME_SLOT, RATE_LIMIT_TOLERANCE, SCENARIO_SCHEMA_VERSION, STALE_AFTER_WRITE_MULTIPLE,
    TICK_DIVISIBILITY_TOLERANCE, DEFAULT_D_SLOW, DEFAULT_D_STOP, DEFAULT_NOMINAL_SPEED,
    DEFAULT_ENVELOPE_RADIUS, DEFAULT_PATH_LENGTH
)
from core.exceptions import ConfigLoadError, InvalidArgumentError, ScenarioValidationError
from logging_config import get_logger
from models.channel import ChannelConfig
from models.readings import SensorPlacement, StalenessPolicy, ZoneThresholds
from models.robot import RobotConfig
from models.sensor import ObjectMotion, ObjectState, SensorNodeConfig, SpeedSegment
from models.supervisor import SupervisorConfig

logger = get_logger(__name__)

MAX_SEED = 2 ** 64


@dataclass(frozen=True)
class TimingSpec:
    write_interval: float = DEFAULT_WRITE_INTERVAL
    poll_interval: float = DEFAULT_POLL_INTERVAL
    stale_after: float = STALE_AFTER_WRITE_MULTIPLE * DEFAULT_WRITE_INTERVAL
    min_write_interval: float = DEFAULT_MIN_WRITE_INTERVAL


@dataclass(frozen=True)
class CommsSpec:
    """
    Attributes:
        uplink_delay: Default per-node uplink delay, seconds
        dropout_prob: Default per-node dropout probability
        blackouts: [t_start, t_end) windows during which no write reaches the broker
    """

    uplink_delay: float = 0.0
    dropout_prob: float = 0.0
    blackouts: Tuple[Tuple[float, float], ...] = ()

    def in_blackout(self, t: float) -> bool:
        return any(start <= t < end for start, end in self.blackouts)


@dataclass(frozen=True)
class SupervisorSettings:
    clock_skew_grace: float = DEFAULT_CLOCK_SKEW_GRACE
    transport_grace: int = DEFAULT_TRANSPORT_GRACE
    use_refined: bool = False
    refine_window: int = DEFAULT_REFINE_WINDOW


@dataclass(frozen=True)
class ChannelSettings:
    channel_id: int = DEFAULT_CHANNEL_ID
    write_key: str = DEFAULT_WRITE_KEY
    read_key: str = DEFAULT_READ_KEY


@dataclass(frozen=True)
class ScenarioSpec:
    """
    A validated scenario.

    Attributes:
        name: Scenario name, used for the default output directory
        duration: Seconds of simulated time
        tick: Engine step, seconds; divides duration, write_interval and poll_interval
        seed: Unsigned 64-bit seed for every random stream of the run
        sensors: Node configs in ascending sensor_id order, phase offsets already assigned
        object: Object start state and radial speed segments
        timing: Write, poll and staleness timing
        zones: Zone radii
        robot: Robot arm model
        comms: Uplink delay, dropout and blackout windows
        supervisor: Supervisor tuning
        channel: Channel the fence publishes to
    """

    name: str
    duration: float
    tick: float
    seed: int
    sensors: Tuple[SensorNodeConfig, ...]
    object: ObjectMotion
    timing: TimingSpec = field(default_factory=TimingSpec)
    zones: ZoneThresholds = field(default_factory=ZoneThresholds)
    robot: RobotConfig = field(default_factory=RobotConfig)
    comms: CommsSpec = field(default_factory=CommsSpec)
    supervisor: SupervisorSettings = field(default_factory=SupervisorSettings)
    channel: ChannelSettings = field(default_factory=ChannelSettings)

    @property
    def n_ticks(self) -> int:
        return ticks_in(self.duration, self.tick)

    def tick_time(self, index: int) -> float:
        return round(index * self.tick, 9)

    def ticks_for(self, seconds: float) -> int:
        return ticks_in(seconds, self.tick)

    @property
    def sensor_ids(self) -> List[int]:
        return [node.sensor_id for node in self.sensors]

    @property
    def max_range(self) -> float:
        return self.sensors[0].max_range

    @property
    def quantum(self) -> float:
        return self.sensors[0].quantum

    def slot_for(self, sensor_id: int) -> int:
        return self.sensor_ids.index(sensor_id) + 1

    def with_seed(self, seed: int) -> "ScenarioSpec":
        if not 0 <= seed < MAX_SEED:
            raise ScenarioValidationError([f"seed: must be an unsigned 64-bit integer, got {seed}"])
        return replace(self, seed=seed)

    def channel_config(self) -> ChannelConfig:
        field_names = {self.slot_for(sensor_id): f"sensor {sensor_id} distance" for sensor_id in self.sensor_ids}
        field_names[PRECISE_TIME_SLOT] = "sample time"
        return ChannelConfig(
            channel_id=self.channel.channel_id,
            write_key=self.channel.write_key,
            read_key=self.channel.read_key,
            min_write_interval=self.timing.min_write_interval,
            field_names=field_names,
            name=self.name,
        )

    def supervisor_config(self, endpoint: Optional[str] = None) -> SupervisorConfig:
        return SupervisorConfig(
            fence=tuple(node.placement for node in self.sensors),
            poll_interval=self.timing.poll_interval,
            staleness=StalenessPolicy(self.timing.stale_after),
            zones=self.zones,
            channel_id=self.channel.channel_id,
            read_key=self.channel.read_key,
            endpoint=endpoint,
            clock_skew_grace=self.supervisor.clock_skew_grace,
            transport_grace=self.supervisor.transport_grace,
            quantum=self.quantum,
            max_range=self.max_range,
            use_refined=self.supervisor.use_refined,
            refine_window=self.supervisor.refine_window,
        )


def ticks_in(seconds: float, tick: float) -> int:
    return int(round(seconds / tick))


def divides(step: float, value: float) -> bool:
    """Whether value is a whole multiple of step, up to float noise."""
    ratio = value / step
    return math.isclose(ratio, round(ratio), rel_tol=TICK_DIVISIBILITY_TOLERANCE, abs_tol=TICK_DIVISIBILITY_TOLERANCE)


# ============================================================================
# Parsing
# ============================================================================

_REQUIRED = object()


class _Section:
    """Reads typed values out of one JSON object, recording problems under their field path."""

    def __init__(self, data: Any, path: str, errors: List[str]) -> None:
        self.path = path
        self.errors = errors
        if data is None:
            data = {}
        if not isinstance(data, dict):
            errors.append(f"{path or 'scenario'}: must be an object")
            data = {}
        self.data: Dict[str, Any] = data

    def where(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def _fail(self, key: str, message: str) -> None:
        self.errors.append(f"{self.where(key)}: {message}")

    def number(self, key: str, default: Any = _REQUIRED, *, gt: Optional[float] = None,
               ge: Optional[float] = None, le: Optional[float] = None, optional: bool = False) -> Optional[float]:
        value = self.data.get(key, default)
        if value is _REQUIRED:
            self._fail(key, "is required")
            return None
        if value is None and optional:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            self._fail(key, f"must be a number, got {value!r}")
            return None
        value = float(value)
        if gt is not None and not value > gt:
            self._fail(key, f"must be > {gt}, got {value}")
        elif ge is not None and not value >= ge:
            self._fail(key, f"must be >= {ge}, got {value}")
        elif le is not None and not value <= le:
            self._fail(key, f"must be <= {le}, got {value}")
        else:
            return value
        return None

    def integer(self, key: str, default: Any = _REQUIRED, *, ge: Optional[int] = None,
                lt: Optional[int] = None) -> Optional[int]:
        value = self.data.get(key, default)
        if value is _REQUIRED:
            self._fail(key, "is required")
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            self._fail(key, f"must be an integer, got {value!r}")
            return None
        if ge is not None and value < ge:
            self._fail(key, f"must be >= {ge}, got {value}")
            return None
        if lt is not None and value >= lt:
            self._fail(key, f"must be < {lt}, got {value}")
            return None
        return value

    def boolean(self, key: str, default: bool) -> Optional[bool]:
        value = self.data.get(key, default)
        if not isinstance(value, bool):
            self._fail(key, f"must be true or false, got {value!r}")
            return None
        return value

    def string(self, key: str, default: str) -> Optional[str]:
        value = self.data.get(key, default)
        if not isinstance(value, str) or not value:
            self._fail(key, f"must be a non-empty string, got {value!r}")
            return None
        return value

    def section(self, key: str) -> "_Section":
        return _Section(self.data.get(key), self.where(key), self.errors)

    def array(self, key: str, required: bool = False) -> List[Tuple[str, Any]]:
        value = self.data.get(key)
        if value is None:
            if required:
                self._fail(key, "is required")
            return []
        if not isinstance(value, list):
            self._fail(key, "must be a list")
            return []
        return [(f"{self.where(key)}[{index}]", item) for index, item in enumerate(value)]


def scenario_from_dict(data: Any, name: Optional[str] = None) -> ScenarioSpec:
    """
    Parse and validate a scenario document.

    Args:
        data: Decoded JSON document
        name: Fallback name when the document has none

    Returns:
        The validated ScenarioSpec

    Raises:
        ScenarioValidationError: Listing every problem found
    """
    errors: List[str] = []
    root = _Section(data, "", errors)

    version = root.data.get("schema_version")
    if version != SCENARIO_SCHEMA_VERSION:
        errors.append(f"schema_version: expected {SCENARIO_SCHEMA_VERSION}, got {version!r}")

    scenario_name = root.string("name", name or "scenario")
    duration = root.number("duration", gt=0)
    tick = root.number("tick", DEFAULT_TICK, gt=0)
    seed = root.integer("seed", 0, ge=0, lt=MAX_SEED)

    timing_section = root.section("timing")
    write_interval = timing_section.number("write_interval", DEFAULT_WRITE_INTERVAL, gt=0)
    poll_interval = timing_section.number("poll_interval", DEFAULT_POLL_INTERVAL, gt=0)
    stale_after = timing_section.number("stale_after", None, gt=0, optional=True)
    min_write_interval = timing_section.number("min_write_interval", DEFAULT_MIN_WRITE_INTERVAL, ge=0)

    zones_section = root.section("zones")
    d_stop = zones_section.number("d_stop", DEFAULT_D_STOP, gt=0)
    d_slow = zones_section.number("d_slow", DEFAULT_D_SLOW, gt=0)

    comms_section = root.section("comms")
    uplink_delay = comms_section.number("uplink_delay", 0.0, ge=0)
    dropout_prob = comms_section.number("dropout_prob", 0.0, ge=0, le=1)
    blackouts = []
    for path, window in comms_section.array("blackouts"):
        if (not isinstance(window, list) or len(window) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in window)):
            errors.append(f"{path}: must be [t_start, t_end]")
        elif not 0 <= window[0] < window[1]:
            errors.append(f"{path}: must satisfy 0 <= t_start < t_end, got {window}")
        else:
            blackouts.append((float(window[0]), float(window[1])))

    sensor_fields = []
    for path, raw in root.array("sensors", required=True):
        section = _Section(raw, path, errors)
        sensor_fields.append((path, {
            "sensor_id": section.integer("sensor_id"),
            "bearing": section.number("bearing", 0.0, ge=0),
            "mount_radius": section.number("mount_radius", 0.0, ge=0),
            "noise_sigma": section.number("noise_sigma", DEFAULT_NOISE_SIGMA, ge=0),
            "dropout_prob": section.number("dropout_prob", dropout_prob, ge=0, le=1),
            "uplink_delay": section.number("uplink_delay", uplink_delay, ge=0),
            "quantum": section.number("quantum", DEFAULT_QUANTUM, gt=0),
            "max_range": section.number("max_range", DEFAULT_MAX_RANGE, gt=0),
            "suppress_unchanged": section.boolean("suppress_unchanged", False),
        }))
        if sensor_fields[-1][1]["bearing"] is not None and sensor_fields[-1][1]["bearing"] >= 360:
            errors.append(f"{path}.bearing: must be < 360, got {sensor_fields[-1][1]['bearing']}")
    if root.data.get("sensors") == []:
        errors.append("sensors: at least one sensor is required")

    object_section = root.section("object")
    object_range = object_section.number("range", ge=0)
    object_bearing = object_section.number("bearing", 0.0)
    object_speed = object_section.number("radial_speed", 0.0)
    segments = []
    for path, raw in object_section.array("segments"):
        section = _Section(raw, path, errors)
        start = section.number("start_time", ge=0)
        speed = section.number("radial_speed")
        if start is not None and speed is not None:
            segments.append(SpeedSegment(start_time=start, radial_speed=speed))
    starts = [segment.start_time for segment in segments]
    if starts != sorted(starts):
        errors.append(f"object.segments: must be sorted by start_time, got {starts}")

    robot_section = root.section("robot")
    nominal_speed = robot_section.number("nominal_speed", DEFAULT_NOMINAL_SPEED, gt=0)
    envelope_radius = robot_section.number("envelope_radius", DEFAULT_ENVELOPE_RADIUS, gt=0)
    path_length = robot_section.number("path_length", DEFAULT_PATH_LENGTH, gt=0)
    decel_limit = robot_section.number("decel_limit", None, gt=0, optional=True)

    supervisor_section = root.section("supervisor")
    supervisor = SupervisorSettings(
        clock_skew_grace=supervisor_section.number("clock_skew_grace", DEFAULT_CLOCK_SKEW_GRACE, ge=0),
        transport_grace=supervisor_section.integer("transport_grace", DEFAULT_TRANSPORT_GRACE, ge=1),
        use_refined=supervisor_section.boolean("use_refined", False),
        refine_window=supervisor_section.integer("refine_window", DEFAULT_REFINE_WINDOW, ge=1),
    )

    channel_section = root.section("channel")
    channel = ChannelSettings(
        channel_id=channel_section.integer("channel_id", DEFAULT_CHANNEL_ID, ge=1),
        write_key=channel_section.string("write_key", DEFAULT_WRITE_KEY),
        read_key=channel_section.string("read_key", DEFAULT_READ_KEY),
    )

    if errors:
        raise ScenarioValidationError(errors)

    # Cross-field checks; every value above parsed cleanly.
    if not divides(tick, duration):
        errors.append(f"duration: {duration} is not a whole number of ticks of {tick}")
    if not divides(tick, write_interval):
        errors.append(f"timing.write_interval: {write_interval} is not a whole number of ticks of {tick}")
    if not divides(tick, poll_interval):
        errors.append(f"timing.poll_interval: {poll_interval} is not a whole number of ticks of {tick}")
    if not d_stop < d_slow:
        errors.append(f"zones: d_stop {d_stop} must be smaller than d_slow {d_slow}")
    if envelope_radius >= d_stop:
        errors.append(f"robot.envelope_radius: {envelope_radius} must be smaller than zones.d_stop {d_stop}")

    ids = [values["sensor_id"] for _, values in sensor_fields]
    if len(set(ids)) != len(ids):
        errors.append(f"sensors: sensor ids must be unique, got {ids}")
    if len(ids) > MAX_SENSORS_PER_CHANNEL:
        errors.append(f"sensors: a channel carries at most {MAX_SENSORS_PER_CHANNEL} sensors, got {len(ids)}")
    if len({(values["quantum"], values["max_range"]) for _, values in sensor_fields}) > 1:
        errors.append("sensors: all sensors must share quantum and max_range")
    for path, values in sensor_fields:
        if d_slow > values["max_range"]:
            errors.append(f"{path}.max_range: {values['max_range']} is below zones.d_slow {d_slow}")

    writers = max(1, len(ids))
    if write_interval + RATE_LIMIT_TOLERANCE < writers * min_write_interval:
        errors.append(
            f"timing.write_interval: {writers} sensor(s) at {write_interval}s exceed the channel limit of one "
            f"write per {min_write_interval}s")
    stagger = write_interval / writers
    if not divides(tick, stagger):
        errors.append(f"timing.write_interval: the per-sensor stagger {stagger} is not a whole number of ticks")

    if errors:
        raise ScenarioValidationError(errors)

    if stale_after is None:
        stale_after = STALE_AFTER_WRITE_MULTIPLE * write_interval
    stagger_ticks = ticks_in(stagger, tick)
    ordered = sorted(sensor_fields, key=lambda item: item[1]["sensor_id"])
    try:
        sensors = tuple(
            SensorNodeConfig(
                placement=SensorPlacement(values["sensor_id"], values["bearing"], values["mount_radius"]),
                write_interval=write_interval,
                noise_sigma=values["noise_sigma"],
                dropout_prob=values["dropout_prob"],
                uplink_delay=values["uplink_delay"],
                quantum=values["quantum"],
                max_range=values["max_range"],
                suppress_unchanged=values["suppress_unchanged"],
                phase_offset=round(rank * stagger_ticks * tick, 9),
            )
            for rank, (_, values) in enumerate(ordered)
        )
        return ScenarioSpec(
            name=scenario_name,
            duration=duration,
            tick=tick,
            seed=seed,
            sensors=sensors,
            object=ObjectMotion(
                initial=ObjectState(object_range, object_bearing % 360.0, object_speed),
                segments=tuple(segments),
            ),
            timing=TimingSpec(write_interval, poll_interval, stale_after, min_write_interval),
            zones=ZoneThresholds(d_stop, d_slow),
            robot=RobotConfig(nominal_speed, envelope_radius, path_length, decel_limit),
            comms=CommsSpec(uplink_delay, dropout_prob, tuple(blackouts)),
            supervisor=supervisor,
            channel=channel,
        )
    except InvalidArgumentError as e:
        raise ScenarioValidationError([str(e)]) from e


def load_scenario(path: str) -> ScenarioSpec:
    """
    Load and validate a scenario file.

    Raises:
        ConfigLoadError: The file cannot be read or is not JSON
        ScenarioValidationError: The document is invalid
    """
    logger.debug(f"Loading scenario from {path}")
    try:
        with open(path, "r", encoding="utf-8") as scenario_file:
            data = json.load(scenario_file)
    except (OSError, ValueError) as e:
        raise ConfigLoadError(f"Failed to load scenario from {path}: {str(e)}") from e
    name = os.path.splitext(os.path.basename(path))[0]
    spec = scenario_from_dict(data, name=name)
    logger.debug(f"Scenario '{spec.name}': {spec.n_ticks} ticks, sensors {spec.sensor_ids}, seed {spec.seed}")
    return spec
