"""
The supervisory controller: polls the channel, fuses the fence readings,
applies the staleness failsafe and issues speed commands.

The controller is a state machine. poll_once() takes the previous
SupervisorState and returns the next one together with the command for
this poll; command_stream() drives it on a fixed schedule.
"""

import math
import threading
import time
from dataclasses import replace
from typing import Dict, Iterator, List, Optional, Tuple

from ciot.client import ChannelClient
from ciot.wire import slot_assignment
from core.constants import OUT_OF_RANGE_SENTINEL, PRECISE_TIME_SLOT
from core.enums import SupervisorMode
from core.exceptions import ChannelError, DecodeError, InvalidArgumentError, TransportError
from logging_config import get_logger
from models.channel import ChannelEntry
from models.readings import RangeReading, SensorPlacement
from models.supervisor import CachedReading, DecodedEntry, SupervisorCommand, SupervisorConfig, SupervisorState
from processors.safety_core import classify_zone, fuse, is_stale, quantize_range, speed_override

logger = get_logger(__name__)

QUANTUM_MATCH_TOLERANCE = 1e-6  # in quanta


# ============================================================================
# Clocks
# ============================================================================

class SimulatedClock:
    """Clock for lockstep runs; time only moves when the harness sets it."""

    def __init__(self, start: float = 0.0) -> None:
        self.start = start
        self._now = start

    def now(self) -> float:
        return self._now

    def elapsed(self) -> float:
        return self._now - self.start

    def set(self, elapsed: float) -> None:
        self._now = self.start + elapsed

    def wait_until(self, target: float, stop_event: Optional[threading.Event] = None) -> bool:
        if target > self._now + 1e-9:
            raise RuntimeError(f"Simulated clock at {self._now} cannot wait for {target}")
        return stop_event is None or not stop_event.is_set()


class WallClock:
    """Epoch-aligned clock that never steps backwards."""

    def __init__(self) -> None:
        self.start = time.time()
        self._origin = time.monotonic()

    def now(self) -> float:
        return self.start + (time.monotonic() - self._origin)

    def elapsed(self) -> float:
        return time.monotonic() - self._origin

    def wait_until(self, target: float, stop_event: Optional[threading.Event] = None) -> bool:
        """
        Sleep until the epoch time `target`.

        Returns:
            False if stop_event was set before or while waiting
        """
        delay = target - self.now()
        if stop_event is None:
            if delay > 0:
                time.sleep(delay)
            return True
        if delay > 0:
            return not stop_event.wait(delay)
        return not stop_event.is_set()


# ============================================================================
# Decoding
# ============================================================================

def _parse_distance(raw: str, quantum: float, max_range: float) -> Optional[RangeReading]:
    text = raw.strip()
    if text == OUT_OF_RANGE_SENTINEL:
        return RangeReading.out_of_range()
    try:
        value = float(text)
    except ValueError:
        return None
    if not math.isfinite(value) or value < 0 or value > max_range:
        return None
    steps = value / quantum
    if abs(steps - round(steps)) > QUANTUM_MATCH_TOLERANCE:
        return None
    return RangeReading.in_range(value)


def decode_entry(entry: ChannelEntry, fence: List[SensorPlacement], quantum: float, max_range: float) -> DecodedEntry:
    """
    Recover per-sensor readings from a channel entry.

    Slot i belongs to the i-th sensor in ascending sensor_id order. Only
    sensors whose slot is present are returned. A value that does not
    decode to a valid reading becomes OutOfRange and is counted.

    Raises:
        DecodeError: When the entry carries no sensor slot at all
    """
    slots = slot_assignment([placement.sensor_id for placement in fence])
    readings: List[Tuple[SensorPlacement, RangeReading]] = []
    errors = 0
    for placement in sorted(fence, key=lambda p: p.sensor_id):
        raw = entry.fields.get(slots[placement.sensor_id])
        if raw is None:
            continue
        reading = _parse_distance(raw, quantum, max_range)
        if reading is None:
            logger.warning(f"Entry {entry.entry_id}: sensor {placement.sensor_id} value '{raw}' does not decode")
            errors += 1
            reading = RangeReading.out_of_range()
        readings.append((placement, reading))
    if not readings:
        raise DecodeError(f"Entry {entry.entry_id} carries no sensor slot (fields {sorted(entry.fields)})")

    sample_time = None
    raw_time = entry.fields.get(PRECISE_TIME_SLOT)
    if raw_time is not None:
        try:
            sample_time = float(raw_time)
        except ValueError:
            logger.warning(f"Entry {entry.entry_id}: sample time '{raw_time}' does not decode")
            errors += 1
        else:
            if not math.isfinite(sample_time):
                sample_time = None
                errors += 1
    return DecodedEntry(readings=readings, sample_time=sample_time, errors=errors)


# ============================================================================
# Polling
# ============================================================================

def _fault(state: SupervisorState, now: float, reason: str, decode_errors: int = 0,
           fresh: bool = False) -> Tuple[SupervisorState, SupervisorCommand]:
    if state.mode != SupervisorMode.FAULT_STOP:
        logger.warning(f"FAULT_STOP: {reason}")
    new_state = replace(state, mode=SupervisorMode.FAULT_STOP, current_override=0.0)
    command = SupervisorCommand(
        override=0.0,
        mode=SupervisorMode.FAULT_STOP,
        issued_at=now,
        cause_entry_id=state.last_entry_id,
        fresh=fresh,
        cause_sample_time=state.last_sample_time,
        decode_errors=decode_errors,
        fault_reason=reason,
    )
    return new_state, command


def _stale_sensor(cache: Dict[int, CachedReading], config: SupervisorConfig, now: float) -> Optional[str]:
    """Reason the fence cannot be trusted right now, or None when every sensor is fresh."""
    for placement in config.ordered_fence:
        cached = cache.get(placement.sensor_id)
        if cached is None:
            return f"no reading from sensor {placement.sensor_id}"
        effective_now = now
        if now < cached.created_at:
            if cached.created_at - now > config.clock_skew_grace:
                return f"sensor {placement.sensor_id} reading is {cached.created_at - now:.3f}s in the future"
            effective_now = cached.created_at
        if is_stale(cached.created_at, effective_now, config.staleness):
            return f"sensor {placement.sensor_id} reading is {now - cached.created_at:.3f}s old"
    return None


def _evaluate(state: SupervisorState, config: SupervisorConfig, now: float, fresh: bool,
              decode_errors: int = 0) -> Tuple[SupervisorState, SupervisorCommand]:
    reason = _stale_sensor(state.sensor_cache, config, now)
    if reason:
        return _fault(state, now, reason, decode_errors=decode_errors, fresh=fresh)

    readings = [(placement, state.sensor_cache[placement.sensor_id].reading) for placement in config.ordered_fence]
    estimate = fuse(readings, config.max_range)
    zone = classify_zone(estimate.min_distance, config.zones)
    override = speed_override(estimate.min_distance, config.zones)
    mode = SupervisorMode.from_zone(zone)
    if mode != state.mode:
        logger.info(f"Supervisor {state.mode.value} -> {mode.value} (nearest {estimate.min_distance})")

    new_state = replace(state, mode=mode, current_override=override, last_bearing=estimate.approach_bearing)
    command = SupervisorCommand(
        override=override,
        mode=mode,
        issued_at=now,
        cause_entry_id=state.last_entry_id,
        fresh=fresh,
        cause_sample_time=state.last_sample_time,
        min_distance=estimate.min_distance.distance,
        approach_bearing=estimate.approach_bearing,
        decode_errors=decode_errors,
    )
    return new_state, command


def _apply_refined(cache: Dict[int, CachedReading], config: SupervisorConfig,
                   client: ChannelClient) -> Dict[int, CachedReading]:
    try:
        series = client.fetch_refined(config.refine_window, config.channel_id)
    except ChannelError as e:
        logger.warning(f"Refined series unavailable, using raw readings: {e}")
        return cache
    slots = slot_assignment([placement.sensor_id for placement in config.fence])
    refined = dict(cache)
    for sensor_id, cached in cache.items():
        mean = series.fields.get(slots[sensor_id])
        if mean is None or not cached.reading.is_in_range:
            continue
        reading = quantize_range(max(0.0, mean), config.quantum, config.max_range)
        refined[sensor_id] = replace(cached, reading=reading)
    return refined


def poll_once(state: SupervisorState, config: SupervisorConfig, client: ChannelClient,
              now: float) -> Tuple[SupervisorState, SupervisorCommand]:
    """
    One supervisor poll.

    Args:
        state: State after the previous poll
        config: Supervisor configuration
        client: Channel client holding the read key
        now: Epoch seconds of this poll

    Returns:
        The next state and the command to hand to the robot
    """
    try:
        entry = client.fetch_last(config.channel_id)
    except TransportError as e:
        failures = state.transport_failures + 1
        state = replace(state, transport_failures=failures)
        if failures >= config.transport_grace:
            return _fault(state, now, f"{failures} consecutive transport failure(s): {e}")
        logger.warning(f"Poll failed ({failures}/{config.transport_grace}): {e}")
        return _evaluate(state, config, now, fresh=False)
    except ChannelError as e:
        return _fault(state, now, f"channel read rejected: {e}")

    state = replace(state, transport_failures=0)
    if entry is None:
        return _fault(state, now, "channel is empty")
    if entry.entry_id == state.last_entry_id:
        return _evaluate(state, config, now, fresh=False)

    try:
        decoded = decode_entry(entry, config.fence, config.quantum, config.max_range)
    except DecodeError as e:
        logger.warning(str(e))
        state = replace(state, last_entry_id=entry.entry_id, decode_errors=state.decode_errors + 1)
        return _evaluate(state, config, now, fresh=False, decode_errors=1)

    cache = dict(state.sensor_cache)
    for placement, reading in decoded.readings:
        cache[placement.sensor_id] = CachedReading(reading, entry.created_at_epoch, entry.entry_id)
    if config.use_refined:
        cache = _apply_refined(cache, config, client)
    state = replace(
        state,
        last_entry_id=entry.entry_id,
        last_sample_time=decoded.sample_time,
        sensor_cache=cache,
        decode_errors=state.decode_errors + decoded.errors,
    )
    return _evaluate(state, config, now, fresh=True, decode_errors=decoded.errors)


def command_stream(config: SupervisorConfig, client: ChannelClient, clock, stop_event: Optional[threading.Event] = None,
                   state: Optional[SupervisorState] = None) -> Iterator[SupervisorCommand]:
    """
    Poll on a drift-free schedule and yield one command per poll.

    Poll k happens at clock.start + k * poll_interval. A late poll is not
    made up for by skipping; the next one is simply due sooner.

    Args:
        config: Supervisor configuration
        client: Channel client for this task only
        clock: SimulatedClock or WallClock
        stop_event: Ends the stream when set
        state: Initial state, FAULT_STOP by default
    """
    if config.poll_interval <= 0:
        raise InvalidArgumentError(f"poll_interval must be positive, got {config.poll_interval}")
    state = state or SupervisorState()
    poll = 0
    while stop_event is None or not stop_event.is_set():
        if not clock.wait_until(clock.start + poll * config.poll_interval, stop_event):
            return
        state, command = poll_once(state, config, client, clock.now())
        yield command
        poll += 1


class CommandMailbox:
    """
    Capacity-1 handoff from the supervisor to the robot; a new command replaces an unread one.

    Attributes:
        replaced: Commands overwritten before the robot read them
    """

    def __init__(self) -> None:
        self._condition = threading.Condition()
        self._command: Optional[SupervisorCommand] = None
        self.replaced = 0

    def put(self, command: SupervisorCommand) -> None:
        with self._condition:
            if self._command is not None:
                self.replaced += 1
            self._command = command
            self._condition.notify_all()

    def take(self, timeout: Optional[float] = None) -> Optional[SupervisorCommand]:
        """Remove and return the newest command; waits up to timeout seconds when empty."""
        with self._condition:
            if self._command is None and timeout:
                self._condition.wait(timeout)
            command, self._command = self._command, None
            return command
