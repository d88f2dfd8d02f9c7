"""Minimum-interval write limiting per channel."""

import threading
from typing import Dict, Optional

from core.constants import RATE_LIMIT_TOLERANCE
from logging_config import get_logger

logger = get_logger(__name__)


class WriteRateLimiter:
    """
    Tracks the last accepted write per channel.

    State only moves forward on accepted writes, so a burst of rejected
    writes never extends the wait.
    """

    def __init__(self, tolerance: float = RATE_LIMIT_TOLERANCE) -> None:
        self.tolerance = tolerance
        self.last_accepted_write: Dict[int, float] = {}
        self.rejections: Dict[int, int] = {}
        self._lock = threading.Lock()

    def allows(self, channel_id: int, now: float, min_interval: float) -> bool:
        """Check, without recording, whether a write at `now` would be accepted."""
        with self._lock:
            last = self.last_accepted_write.get(channel_id)
        if last is None or min_interval <= 0:
            return True
        return (now - last) + self.tolerance >= min_interval

    def record_accepted(self, channel_id: int, now: float) -> None:
        with self._lock:
            self.last_accepted_write[channel_id] = now

    def record_rejected(self, channel_id: int, now: float) -> None:
        with self._lock:
            self.rejections[channel_id] = self.rejections.get(channel_id, 0) + 1
            last = self.last_accepted_write.get(channel_id)
        logger.debug(f"Channel {channel_id}: write at {now:.3f} rejected, last accepted at {last}")

    def restore(self, channel_id: int, last_write: Optional[float]) -> None:
        """Seed state from a replayed log."""
        with self._lock:
            if last_write is None:
                self.last_accepted_write.pop(channel_id, None)
            else:
                self.last_accepted_write[channel_id] = last_write
