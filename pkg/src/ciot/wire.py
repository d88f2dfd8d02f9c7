"""
Wire codec for the ThingSpeak-compatible subset the broker and the client speak.
"""

import re
from datetime import datetime, timezone
from decimal import Decimal
from typing import Any, Dict, Iterable, Mapping, Optional

from core.constants import (
    MAX_FIELD_SLOTS, MAX_SENSORS_PER_CHANNEL, OUT_OF_RANGE_SENTINEL, PRECISE_TIME_DECIMALS, PRECISE_TIME_SLOT
)
from core.exceptions import BadRequestError, InvalidArgumentError
from models.channel import ChannelConfig, ChannelEntry, RefinedSeries
from models.readings import RangeReading

CREATED_AT_FORMAT = "%Y-%m-%dT%H:%M:%SZ"
FIELD_KEY_PATTERN = re.compile(r"^field(\d+)$")


def field_key(slot: int) -> str:
    return f"field{slot}"


def truncate_to_second(epoch_seconds: float) -> datetime:
    """UTC datetime for an epoch time, truncated to whole seconds."""
    return datetime.fromtimestamp(int(epoch_seconds // 1), tz=timezone.utc)


def format_created_at(created_at: datetime) -> str:
    return created_at.astimezone(timezone.utc).strftime(CREATED_AT_FORMAT)


def parse_created_at(value: str) -> datetime:
    return datetime.strptime(value, CREATED_AT_FORMAT).replace(tzinfo=timezone.utc)


def parse_field_slots(params: Mapping[str, Any]) -> Dict[int, str]:
    """
    Extract fieldN parameters from an /update request.

    Keys that do not look like fields (api_key, status, lat, ...) are ignored.

    Raises:
        BadRequestError: For a field slot outside 1..8 or when no field is present
    """
    fields: Dict[int, str] = {}
    for key, value in params.items():
        if not key.startswith("field"):
            continue
        match = FIELD_KEY_PATTERN.match(key)
        if not match or not 1 <= int(match.group(1)) <= MAX_FIELD_SLOTS:
            raise BadRequestError(f"Malformed field slot '{key}'")
        fields[int(match.group(1))] = str(value)
    if not fields:
        raise BadRequestError("An update needs at least one field")
    return fields


def entry_to_json(entry: ChannelEntry) -> Dict[str, Any]:
    """Serialize an entry; absent slots are omitted and values stay strings."""
    payload: Dict[str, Any] = {
        "created_at": format_created_at(entry.created_at),
        "entry_id": entry.entry_id,
    }
    for slot in sorted(entry.fields):
        payload[field_key(slot)] = entry.fields[slot]
    return payload


def entry_from_json(payload: Mapping[str, Any]) -> ChannelEntry:
    fields: Dict[int, str] = {}
    for key, value in payload.items():
        match = FIELD_KEY_PATTERN.match(key)
        if match and value is not None:
            fields[int(match.group(1))] = str(value)
    return ChannelEntry(
        entry_id=int(payload["entry_id"]),
        created_at=parse_created_at(payload["created_at"]),
        fields=fields,
    )


def channel_to_json(config: ChannelConfig, last_entry_id: Optional[int]) -> Dict[str, Any]:
    payload: Dict[str, Any] = {
        "id": config.channel_id,
        "name": config.name,
        "last_entry_id": last_entry_id,
    }
    for slot in sorted(config.field_names):
        payload[field_key(slot)] = config.field_names[slot]
    return payload


def refined_to_json(series: RefinedSeries) -> Dict[str, Any]:
    return {
        "channel_id": series.channel_id,
        "window": series.window,
        "entry_id": series.entry_id,
        "fields": {field_key(slot): series.fields[slot] for slot in sorted(series.fields)},
        "skipped": series.skipped,
        "out_of_range": series.out_of_range,
    }


def refined_from_json(payload: Mapping[str, Any]) -> RefinedSeries:
    fields = {}
    for key, value in payload.get("fields", {}).items():
        match = FIELD_KEY_PATTERN.match(key)
        if match:
            fields[int(match.group(1))] = float(value)
    return RefinedSeries(
        channel_id=int(payload["channel_id"]),
        window=int(payload["window"]),
        fields=fields,
        skipped=int(payload.get("skipped", 0)),
        out_of_range=int(payload.get("out_of_range", 0)),
        entry_id=payload.get("entry_id"),
    )


def quantum_decimals(quantum: float) -> int:
    exponent = Decimal(repr(quantum)).normalize().as_tuple().exponent
    return max(0, -exponent)


def format_reading(reading: RangeReading, quantum: float) -> str:
    """Field value for a reading: fixed decimals for the quantum, or the out-of-range sentinel."""
    if not reading.is_in_range:
        return OUT_OF_RANGE_SENTINEL
    return f"{reading.distance:.{quantum_decimals(quantum)}f}"


def format_precise_time(seconds: float) -> str:
    return f"{seconds:.{PRECISE_TIME_DECIMALS}f}"


def slot_assignment(sensor_ids: Iterable[int]) -> Dict[int, int]:
    """Field slot per sensor: 1..N in ascending sensor_id order."""
    ordered = sorted(sensor_ids)
    if len(ordered) > MAX_SENSORS_PER_CHANNEL:
        raise InvalidArgumentError(
            f"A channel carries at most {MAX_SENSORS_PER_CHANNEL} sensors, got {len(ordered)}")
    return {sensor_id: slot for slot, sensor_id in enumerate(ordered, 1)}


def sensor_update_fields(slot: int, reading: RangeReading, quantum: float, sample_time: float) -> Dict[int, str]:
    """The slots one sensor node writes: its own distance plus the precise sample time."""
    return {
        slot: format_reading(reading, quantum),
        PRECISE_TIME_SLOT: format_precise_time(sample_time),
    }
