"""
Sensor node configuration and the motion of the tracked object.
"""

from dataclasses import dataclass, field
from typing import Tuple

from core.constants import DEFAULT_MAX_RANGE, DEFAULT_NOISE_SIGMA, DEFAULT_QUANTUM, DEFAULT_WRITE_INTERVAL
from core.exceptions import InvalidArgumentError
from models.readings import SensorPlacement


@dataclass(frozen=True)
class SensorNodeConfig:
    """
    One simulated ultrasonic node.

    Attributes:
        placement: Where the node sits on the fence
        write_interval: Seconds between the node's samples
        noise_sigma: Standard deviation of the additive Gaussian range noise, meters
        dropout_prob: Probability that a sample is never sent
        uplink_delay: Seconds between sampling and the write reaching the broker
        quantum: Reporting resolution, meters
        max_range: Maximum sensing range, meters
        suppress_unchanged: Skip publishing when the reading equals the last one published
        phase_offset: Seconds after scenario start of the node's first sample
    """

    placement: SensorPlacement
    write_interval: float = DEFAULT_WRITE_INTERVAL
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    dropout_prob: float = 0.0
    uplink_delay: float = 0.0
    quantum: float = DEFAULT_QUANTUM
    max_range: float = DEFAULT_MAX_RANGE
    suppress_unchanged: bool = False
    phase_offset: float = 0.0

    def __post_init__(self) -> None:
        if self.write_interval <= 0:
            raise InvalidArgumentError(f"write_interval must be positive, got {self.write_interval}")
        if self.noise_sigma < 0:
            raise InvalidArgumentError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise InvalidArgumentError(f"dropout_prob must be within [0, 1], got {self.dropout_prob}")
        if self.uplink_delay < 0:
            raise InvalidArgumentError(f"uplink_delay must be >= 0, got {self.uplink_delay}")
        if self.quantum <= 0 or self.max_range <= 0:
            raise InvalidArgumentError(
                f"quantum and max_range must be positive, got {self.quantum}, {self.max_range}")
        if self.phase_offset < 0:
            raise InvalidArgumentError(f"phase_offset must be >= 0, got {self.phase_offset}")

    @property
    def sensor_id(self) -> int:
        return self.placement.sensor_id


@dataclass(frozen=True)
class ObjectState:
    """
    The tracked object in polar coordinates about the robot base.

    Attributes:
        range_from_robot_base: Meters, >= 0
        bearing: Degrees
        radial_speed: Meters per second, negative while approaching
    """

    range_from_robot_base: float
    bearing: float = 0.0
    radial_speed: float = 0.0

    def __post_init__(self) -> None:
        if self.range_from_robot_base < 0:
            raise InvalidArgumentError(f"Object range must be >= 0, got {self.range_from_robot_base}")


@dataclass(frozen=True)
class SpeedSegment:
    """From start_time on, the object moves radially at radial_speed."""

    start_time: float
    radial_speed: float


@dataclass(frozen=True)
class ObjectMotion:
    """
    Piecewise-constant radial motion along a fixed bearing.

    The initial state's radial_speed applies until the first segment starts.
    Range is clamped at the robot base.
    """

    initial: ObjectState
    segments: Tuple[SpeedSegment, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        starts = [segment.start_time for segment in self.segments]
        if starts != sorted(starts):
            raise InvalidArgumentError(f"Object segments must be sorted by start_time, got {starts}")

    def state_at(self, t: float) -> ObjectState:
        range_now = self.initial.range_from_robot_base
        speed = self.initial.radial_speed
        since = 0.0
        for segment in self.segments:
            if segment.start_time > t:
                break
            range_now = max(0.0, range_now + speed * (segment.start_time - since))
            since = segment.start_time
            speed = segment.radial_speed
        range_now = max(0.0, range_now + speed * (t - since))
        return ObjectState(range_from_robot_base=range_now, bearing=self.initial.bearing, radial_speed=speed)
