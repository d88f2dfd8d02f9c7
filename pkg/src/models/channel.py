"""
Cloud channel data model: channel configuration and stored entries.
"""

from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, Optional

from core.constants import DEFAULT_MIN_WRITE_INTERVAL, MAX_FIELD_SLOTS, REJECTED_ENTRY_ID
from core.exceptions import InvalidArgumentError


@dataclass(frozen=True)
class ChannelConfig:
    """
    One telemetry channel hosted by the broker.

    Attributes:
        channel_id: Positive channel number, unique per broker
        write_key: Token required by /update
        read_key: Token required by the feed endpoints
        min_write_interval: Seconds that must elapse between accepted writes
        field_names: Label per field slot (1..8)
        name: Display name echoed in feeds.json
    """

    channel_id: int
    write_key: str
    read_key: str
    min_write_interval: float = DEFAULT_MIN_WRITE_INTERVAL
    field_names: Dict[int, str] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self) -> None:
        if self.channel_id <= 0:
            raise InvalidArgumentError(f"channel_id must be positive, got {self.channel_id}")
        if self.min_write_interval < 0:
            raise InvalidArgumentError(
                f"min_write_interval must be >= 0, got {self.min_write_interval}")
        bad_slots = [slot for slot in self.field_names if not 1 <= slot <= MAX_FIELD_SLOTS]
        if bad_slots:
            raise InvalidArgumentError(f"Field slots must be within 1..{MAX_FIELD_SLOTS}, got {bad_slots}")


@dataclass(frozen=True)
class ChannelEntry:
    """
    One record appended to a channel.

    Attributes:
        entry_id: Strictly increasing within the channel
        created_at: UTC creation time, whole seconds
        fields: Slot number to the decimal string that was written
    """

    entry_id: int
    created_at: datetime
    fields: Dict[int, str] = field(default_factory=dict)

    @property
    def created_at_epoch(self) -> float:
        return self.created_at.timestamp()


@dataclass(frozen=True)
class PublishResult:
    """Broker answer to a write: the new entry id, or 0 when the rate limiter rejected it."""

    entry_id: int

    @property
    def rejected(self) -> bool:
        return self.entry_id == REJECTED_ENTRY_ID

    @classmethod
    def rejection(cls) -> "PublishResult":
        return cls(entry_id=REJECTED_ENTRY_ID)


@dataclass(frozen=True)
class RefinedSeries:
    """Trailing moving average per field slot, derived from a channel's raw log."""

    channel_id: int
    window: int
    fields: Dict[int, float] = field(default_factory=dict)
    skipped: int = 0
    out_of_range: int = 0
    entry_id: Optional[int] = None
