"""
Value types shared by the sensors, the channel codec and the supervisor.

All of them are frozen dataclasses, so they can be handed between threads freely.
"""

from dataclasses import dataclass
from typing import Optional

from core.constants import DEFAULT_D_SLOW, DEFAULT_D_STOP
from core.exceptions import InvalidArgumentError


@dataclass(frozen=True)
class RangeReading:
    """
    One proximity observation: a quantized distance, or nothing in range.

    Attributes:
        distance: Distance in meters, or None when the object is out of range
    """

    distance: Optional[float] = None

    @classmethod
    def in_range(cls, distance: float) -> "RangeReading":
        if distance < 0:
            raise InvalidArgumentError(f"Distance must be non-negative, got {distance}")
        return cls(distance=distance)

    @classmethod
    def out_of_range(cls) -> "RangeReading":
        return cls(distance=None)

    @property
    def is_in_range(self) -> bool:
        return self.distance is not None

    def __str__(self) -> str:
        return f"InRange({self.distance:.2f})" if self.is_in_range else "OutOfRange"


@dataclass(frozen=True)
class ZoneThresholds:
    """
    Zone radii around the robot base.

    Attributes:
        d_stop: Distance at or below which the robot must be stopped
        d_slow: Distance below which the robot slows down
    """

    d_stop: float = DEFAULT_D_STOP
    d_slow: float = DEFAULT_D_SLOW

    def validate(self, max_range: Optional[float] = None) -> None:
        if not 0 < self.d_stop < self.d_slow:
            raise InvalidArgumentError(
                f"Zone thresholds must satisfy 0 < d_stop < d_slow, got d_stop={self.d_stop}, d_slow={self.d_slow}")
        if max_range is not None and self.d_slow > max_range:
            raise InvalidArgumentError(
                f"d_slow={self.d_slow} exceeds the sensor max range {max_range}")


@dataclass(frozen=True)
class SensorPlacement:
    """
    Where a sensor sits on the fence.

    Attributes:
        sensor_id: Identifier, unique within a fence; ascending order fixes the channel slot
        bearing: Mounting bearing about the robot base, degrees in [0, 360)
        mount_radius: Distance of the sensor from the robot base, meters
    """

    sensor_id: int
    bearing: float = 0.0
    mount_radius: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.bearing < 360.0:
            raise InvalidArgumentError(f"Sensor {self.sensor_id} bearing must be in [0, 360), got {self.bearing}")
        if self.mount_radius < 0:
            raise InvalidArgumentError(
                f"Sensor {self.sensor_id} mount_radius must be non-negative, got {self.mount_radius}")


@dataclass(frozen=True)
class FusedEstimate:
    """Nearest distance across the fence, and the bearing the object approaches from."""

    min_distance: RangeReading
    approach_bearing: Optional[float] = None


@dataclass(frozen=True)
class StalenessPolicy:
    """Readings older than stale_after seconds may not drive the robot."""

    stale_after: float

    def __post_init__(self) -> None:
        if self.stale_after <= 0:
            raise InvalidArgumentError(f"stale_after must be positive, got {self.stale_after}")
