"""
Enumerations for type-safe constants throughout the application.
"""

from enum import Enum


class Zone(str, Enum):
    """Concentric distance bands around the robot base."""
    STOP = "STOP"
    SLOW = "SLOW"
    CLEAR = "CLEAR"

    @property
    def rank(self) -> int:
        """Order by distance: STOP < SLOW < CLEAR."""
        return _ZONE_RANK[self]

    def __lt__(self, other: "Zone") -> bool:
        if not isinstance(other, Zone):
            return NotImplemented
        return self.rank < other.rank


_ZONE_RANK = {Zone.STOP: 0, Zone.SLOW: 1, Zone.CLEAR: 2}


class SupervisorMode(str, Enum):
    """Operating states of the supervisory controller."""
    CLEAR = "CLEAR"
    SLOW = "SLOW"
    STOP = "STOP"
    FAULT_STOP = "FAULT_STOP"

    @classmethod
    def from_zone(cls, zone: Zone) -> "SupervisorMode":
        return cls(zone.value)


class PublishStatus(str, Enum):
    """Outcome of one sensor node tick."""
    PUBLISHED = "published"
    DROPPED = "dropped"
    RATE_LIMITED = "rate_limited"
    SUPPRESSED = "suppressed"


class RunMode(str, Enum):
    """Scenario execution modes."""
    LOCKSTEP = "lockstep"
    REALTIME = "realtime"
