"""
Robot arm model types.
"""

from dataclasses import dataclass
from typing import Optional

from core.constants import DEFAULT_ENVELOPE_RADIUS, DEFAULT_NOMINAL_SPEED, DEFAULT_PATH_LENGTH
from core.exceptions import InvalidArgumentError
from models.readings import ZoneThresholds


@dataclass(frozen=True)
class RobotConfig:
    """
    A speed-scalable arm sweeping a cyclic path at the edge of its reach.

    Attributes:
        nominal_speed: End-effector speed at override 1, m/s
        envelope_radius: Reach of the arm about its base, meters
        path_length: Length of one trajectory cycle, meters
        decel_limit: Maximum speed change per second, m/s^2; None applies commands instantly
    """

    nominal_speed: float = DEFAULT_NOMINAL_SPEED
    envelope_radius: float = DEFAULT_ENVELOPE_RADIUS
    path_length: float = DEFAULT_PATH_LENGTH
    decel_limit: Optional[float] = None

    def __post_init__(self) -> None:
        if self.nominal_speed <= 0:
            raise InvalidArgumentError(f"nominal_speed must be positive, got {self.nominal_speed}")
        if self.envelope_radius <= 0:
            raise InvalidArgumentError(f"envelope_radius must be positive, got {self.envelope_radius}")
        if self.path_length <= 0:
            raise InvalidArgumentError(f"path_length must be positive, got {self.path_length}")
        if self.decel_limit is not None and self.decel_limit <= 0:
            raise InvalidArgumentError(f"decel_limit must be positive when set, got {self.decel_limit}")

    def check_zones(self, zones: ZoneThresholds) -> None:
        """The stop zone has to lie outside the arm's reach."""
        if self.envelope_radius >= zones.d_stop:
            raise InvalidArgumentError(
                f"envelope_radius {self.envelope_radius} must be smaller than d_stop {zones.d_stop}")


@dataclass(frozen=True)
class RobotState:
    path_phase: float = 0.0
    actual_speed: float = 0.0
    applied_override: float = 0.0


@dataclass(frozen=True)
class SafetyOutcome:
    """
    Safety figures for one run.

    Attributes:
        min_object_clearance: Smallest object range minus envelope radius over the run
        stop_achieved_before_d_stop: The arm was stopped on every tick the object spent inside d_stop,
            starting with the first one (true when the object never got there)
        violation_ticks: Ticks with the object inside the envelope while the arm moved
        first_inside_d_stop_tick: Index of the first tick inside d_stop, if any
    """

    min_object_clearance: float
    stop_achieved_before_d_stop: bool
    violation_ticks: int
    first_inside_d_stop_tick: Optional[int] = None

    @property
    def collision(self) -> bool:
        return self.violation_ticks > 0
