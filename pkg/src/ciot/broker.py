"""
In-process channel broker: per-channel append-only entry logs, key checks,
write rate limiting, optional on-disk persistence and the refine hook.

The HTTP surface in ciot.app is a thin layer over this class.
"""

import hmac
import json
import os
import threading
from typing import Dict, Iterable, List, Mapping, Optional

from ciot.rate_limiter import WriteRateLimiter
from ciot.wire import format_created_at, parse_created_at, truncate_to_second
from core.constants import MAX_FIELD_SLOTS, OUT_OF_RANGE_SENTINEL
from core.exceptions import AuthError, BadRequestError, InvalidArgumentError, NotFoundError
from logging_config import get_logger
from models.channel import ChannelConfig, ChannelEntry, PublishResult, RefinedSeries

logger = get_logger(__name__)


def _keys_match(expected: str, provided: Optional[str]) -> bool:
    return provided is not None and hmac.compare_digest(expected.encode("utf-8"), str(provided).encode("utf-8"))


class ChannelBroker:
    """
    Hosts channels and serializes writes per channel.

    Writes to one channel go through that channel's lock. Reads take a
    length-bounded slice of the log without locking, so they always observe
    a prefix of it.

    Attributes:
        data_dir: Directory holding one newline-delimited JSON log per channel, or None for memory only
    """

    def __init__(self, channels: Iterable[ChannelConfig], data_dir: Optional[str] = None,
                 rate_limiter: Optional[WriteRateLimiter] = None) -> None:
        self.data_dir = data_dir
        self.rate_limiter = rate_limiter or WriteRateLimiter()
        self._channels: Dict[int, ChannelConfig] = {}
        self._logs: Dict[int, List[ChannelEntry]] = {}
        self._locks: Dict[int, threading.Lock] = {}
        for config in channels:
            self.add_channel(config)

    # ------------------------------------------------------------------
    # Channel registry
    # ------------------------------------------------------------------

    def add_channel(self, config: ChannelConfig) -> None:
        if config.channel_id in self._channels:
            raise InvalidArgumentError(f"Channel {config.channel_id} is declared twice")
        if any(existing.write_key == config.write_key for existing in self._channels.values()):
            raise InvalidArgumentError(f"Channel {config.channel_id} reuses another channel's write key")
        self._channels[config.channel_id] = config
        self._logs[config.channel_id] = []
        self._locks[config.channel_id] = threading.Lock()
        if self.data_dir:
            self._replay(config.channel_id)

    def channel(self, channel_id: int) -> ChannelConfig:
        try:
            return self._channels[channel_id]
        except KeyError:
            raise NotFoundError(f"Channel {channel_id} does not exist") from None

    @property
    def channel_ids(self) -> List[int]:
        return sorted(self._channels)

    def channel_for_write_key(self, key: Optional[str]) -> ChannelConfig:
        for config in self._channels.values():
            if _keys_match(config.write_key, key):
                return config
        raise AuthError("Unknown write key")

    def last_entry_id(self, channel_id: int) -> Optional[int]:
        entries = self._snapshot(channel_id)
        return entries[-1].entry_id if entries else None

    # ------------------------------------------------------------------
    # Writes
    # ------------------------------------------------------------------

    def write(self, channel_id: int, key: Optional[str], fields: Mapping[int, str], now: float) -> PublishResult:
        """
        Append an entry unless the rate limiter rejects it.

        Args:
            channel_id: Target channel
            key: Write key presented by the caller
            fields: Slot number to decimal string
            now: Epoch seconds of the write

        Returns:
            PublishResult with the new entry id, or entry id 0 when rate limited

        Raises:
            NotFoundError: Unknown channel
            AuthError: Wrong write key
            BadRequestError: Empty fields or a slot outside 1..8
        """
        config = self.channel(channel_id)
        if not _keys_match(config.write_key, key):
            raise AuthError(f"Write key rejected for channel {channel_id}")
        if not fields:
            raise BadRequestError("An update needs at least one field")
        bad_slots = [slot for slot in fields if not isinstance(slot, int) or not 1 <= slot <= MAX_FIELD_SLOTS]
        if bad_slots:
            raise BadRequestError(f"Malformed field slots {bad_slots}")

        with self._locks[channel_id]:
            if not self.rate_limiter.allows(channel_id, now, config.min_write_interval):
                self.rate_limiter.record_rejected(channel_id, now)
                return PublishResult.rejection()

            log = self._logs[channel_id]
            entry_id = log[-1].entry_id + 1 if log else 1
            created_at = truncate_to_second(now)
            if log and created_at < log[-1].created_at:
                # Wall clock stepped backwards; keep created_at non-decreasing.
                created_at = log[-1].created_at
            entry = ChannelEntry(entry_id=entry_id, created_at=created_at,
                                 fields={slot: str(value) for slot, value in sorted(fields.items())})
            self._persist(channel_id, entry, now)
            log.append(entry)
            self.rate_limiter.record_accepted(channel_id, now)

        logger.debug(f"Channel {channel_id}: accepted entry {entry_id} {entry.fields}")
        return PublishResult(entry_id=entry_id)

    # ------------------------------------------------------------------
    # Reads
    # ------------------------------------------------------------------

    def _snapshot(self, channel_id: int) -> List[ChannelEntry]:
        log = self._logs[self.channel(channel_id).channel_id]
        length = len(log)
        return log[:length]

    def check_read_key(self, channel_id: int, key: Optional[str]) -> None:
        config = self.channel(channel_id)
        if not _keys_match(config.read_key, key):
            raise AuthError(f"Read key rejected for channel {channel_id}")

    def read_last(self, channel_id: int, key: Optional[str]) -> Optional[ChannelEntry]:
        """Newest entry of the channel, or None when the channel is empty."""
        self.check_read_key(channel_id, key)
        entries = self._snapshot(channel_id)
        return entries[-1] if entries else None

    def read_feed(self, channel_id: int, key: Optional[str], results: int) -> List[ChannelEntry]:
        """The newest `results` entries in ascending entry_id order."""
        self.check_read_key(channel_id, key)
        if results < 1:
            raise BadRequestError(f"results must be >= 1, got {results}")
        return self._snapshot(channel_id)[-results:]

    def refine(self, channel_id: int, window: int) -> RefinedSeries:
        """
        Trailing moving average of the last `window` numeric values of every slot.

        Non-numeric values are skipped and counted; out-of-range sentinels are
        excluded and counted separately. The raw log is never modified.
        """
        if window < 1:
            raise BadRequestError(f"window must be >= 1, got {window}")
        entries = self._snapshot(channel_id)

        values: Dict[int, List[float]] = {}
        skipped = 0
        out_of_range = 0
        for entry in entries:
            for slot, raw in entry.fields.items():
                if raw.strip() == OUT_OF_RANGE_SENTINEL:
                    out_of_range += 1
                    continue
                try:
                    values.setdefault(slot, []).append(float(raw))
                except ValueError:
                    skipped += 1

        means = {slot: sum(history[-window:]) / len(history[-window:]) for slot, history in values.items() if history}
        if skipped:
            logger.debug(f"Channel {channel_id}: refine skipped {skipped} non-numeric values")
        return RefinedSeries(
            channel_id=channel_id,
            window=window,
            fields=means,
            skipped=skipped,
            out_of_range=out_of_range,
            entry_id=entries[-1].entry_id if entries else None,
        )

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------

    def _log_path(self, channel_id: int) -> str:
        return os.path.join(self.data_dir, f"channel_{channel_id}.ndjson")

    def _persist(self, channel_id: int, entry: ChannelEntry, written_at: float) -> None:
        if not self.data_dir:
            return
        record = {
            "entry_id": entry.entry_id,
            "created_at": format_created_at(entry.created_at),
            "fields": {str(slot): value for slot, value in entry.fields.items()},
            "written_at": written_at,
        }
        os.makedirs(self.data_dir, exist_ok=True)
        with open(self._log_path(channel_id), "a", encoding="utf-8") as log_file:
            log_file.write(json.dumps(record, sort_keys=True) + "\n")

    def _replay(self, channel_id: int) -> None:
        path = self._log_path(channel_id)
        if not os.path.isfile(path):
            return
        last_written_at = None
        log = self._logs[channel_id]
        with open(path, "r", encoding="utf-8") as log_file:
            for line_number, line in enumerate(log_file, 1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    entry = ChannelEntry(
                        entry_id=int(record["entry_id"]),
                        created_at=parse_created_at(record["created_at"]),
                        fields={int(slot): str(value) for slot, value in record["fields"].items()},
                    )
                except (ValueError, KeyError, TypeError) as e:
                    logger.warning(f"Skipping unreadable record {path}:{line_number}: {e}")
                    continue
                if log and entry.entry_id <= log[-1].entry_id:
                    logger.warning(f"Skipping out-of-order entry {entry.entry_id} in {path}:{line_number}")
                    continue
                log.append(entry)
                last_written_at = record.get("written_at")
        self.rate_limiter.restore(channel_id, last_written_at)
        logger.info(f"Channel {channel_id}: replayed {len(log)} entries from {path}")
