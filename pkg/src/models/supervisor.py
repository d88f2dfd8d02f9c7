"""
Supervisor configuration, state and the commands it hands to the robot.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from core.constants import (
    DEFAULT_CHANNEL_ID, DEFAULT_CLOCK_SKEW_GRACE, DEFAULT_MAX_RANGE, DEFAULT_POLL_INTERVAL, DEFAULT_QUANTUM,
    DEFAULT_READ_KEY, DEFAULT_REFINE_WINDOW, DEFAULT_STALE_AFTER, DEFAULT_TRANSPORT_GRACE
)
from core.enums import SupervisorMode
from core.exceptions import InvalidArgumentError
from models.readings import RangeReading, SensorPlacement, StalenessPolicy, ZoneThresholds


@dataclass(frozen=True)
class SupervisorConfig:
    """
    Attributes:
        fence: Sensor placements; ascending sensor_id order gives the channel slots
        poll_interval: Seconds between polls
        staleness: Age limit for every sensor's latest reading
        zones: Zone radii
        channel_id: Channel holding the fence readings
        read_key: Read key for the channel
        endpoint: Broker URL, or None for an in-process broker
        clock_skew_grace: Negative ages up to this many seconds count as zero
        transport_grace: Consecutive transport failures tolerated before FAULT_STOP
        quantum: Reporting resolution the decoder validates against
        max_range: Sensing range the decoder validates against and fusion weights by
        use_refined: Read the channel's moving averages instead of raw values
        refine_window: Window for the moving averages
    """

    fence: Tuple[SensorPlacement, ...]
    poll_interval: float = DEFAULT_POLL_INTERVAL
    staleness: StalenessPolicy = field(default_factory=lambda: StalenessPolicy(DEFAULT_STALE_AFTER))
    zones: ZoneThresholds = field(default_factory=ZoneThresholds)
    channel_id: int = DEFAULT_CHANNEL_ID
    read_key: str = DEFAULT_READ_KEY
    endpoint: Optional[str] = None
    clock_skew_grace: float = DEFAULT_CLOCK_SKEW_GRACE
    transport_grace: int = DEFAULT_TRANSPORT_GRACE
    quantum: float = DEFAULT_QUANTUM
    max_range: float = DEFAULT_MAX_RANGE
    use_refined: bool = False
    refine_window: int = DEFAULT_REFINE_WINDOW

    def __post_init__(self) -> None:
        if self.poll_interval <= 0:
            raise InvalidArgumentError(f"poll_interval must be positive, got {self.poll_interval}")
        if not self.fence:
            raise InvalidArgumentError("The fence needs at least one sensor")
        ids = [placement.sensor_id for placement in self.fence]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError(f"Sensor ids must be unique, got {ids}")
        if self.clock_skew_grace < 0:
            raise InvalidArgumentError(f"clock_skew_grace must be >= 0, got {self.clock_skew_grace}")
        if self.transport_grace < 1:
            raise InvalidArgumentError(f"transport_grace must be >= 1, got {self.transport_grace}")
        if self.refine_window < 1:
            raise InvalidArgumentError(f"refine_window must be >= 1, got {self.refine_window}")
        self.zones.validate(self.max_range)

    @property
    def ordered_fence(self) -> List[SensorPlacement]:
        return sorted(self.fence, key=lambda placement: placement.sensor_id)


@dataclass(frozen=True)
class CachedReading:
    """Latest decoded reading of one sensor and the creation time of the entry that carried it."""

    reading: RangeReading
    created_at: float
    entry_id: int


@dataclass(frozen=True)
class SupervisorState:
    """
    Everything the supervisor carries from one poll to the next.

    Starts in FAULT_STOP: nothing has been read yet.
    """

    mode: SupervisorMode = SupervisorMode.FAULT_STOP
    current_override: float = 0.0
    last_entry_id: Optional[int] = None
    last_sample_time: Optional[float] = None
    last_bearing: Optional[float] = None
    sensor_cache: Dict[int, CachedReading] = field(default_factory=dict)
    transport_failures: int = 0
    decode_errors: int = 0

    def __post_init__(self) -> None:
        _check_mode_override(self.mode, self.current_override)


@dataclass(frozen=True)
class SupervisorCommand:
    """
    Attributes:
        override: Speed fraction for the robot
        mode: Supervisor mode that produced it
        issued_at: Epoch seconds of the poll
        cause_entry_id: Newest entry seen by the poll
        fresh: The poll observed a new entry
        cause_sample_time: Precise sample time carried by that entry, seconds since scenario start
        min_distance: Fused nearest distance, None when nothing is in range or on a fault
        approach_bearing: Fused approach bearing, degrees
        decode_errors: Field values this poll failed to decode
        fault_reason: Why the command is FAULT_STOP
    """

    override: float
    mode: SupervisorMode
    issued_at: float
    cause_entry_id: Optional[int] = None
    fresh: bool = False
    cause_sample_time: Optional[float] = None
    min_distance: Optional[float] = None
    approach_bearing: Optional[float] = None
    decode_errors: int = 0
    fault_reason: Optional[str] = None

    def __post_init__(self) -> None:
        _check_mode_override(self.mode, self.override)


def _check_mode_override(mode: SupervisorMode, override: float) -> None:
    if not 0.0 <= override <= 1.0:
        raise InvalidArgumentError(f"override must be within [0, 1], got {override}")
    if mode in (SupervisorMode.STOP, SupervisorMode.FAULT_STOP) and override != 0.0:
        raise InvalidArgumentError(f"{mode.value} requires override 0, got {override}")
    if mode == SupervisorMode.CLEAR and override != 1.0:
        raise InvalidArgumentError(f"CLEAR requires override 1, got {override}")


@dataclass(frozen=True)
class DecodedEntry:
    """Per-sensor readings recovered from one channel entry."""

    readings: List[Tuple[SensorPlacement, RangeReading]]
    sample_time: Optional[float] = None
    errors: int = 0
