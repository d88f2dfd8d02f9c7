import random
import threading
from datetime import datetime, timezone

import pytest

from ciot.client import ChannelClient
from core.enums import SupervisorMode
from core.exceptions import AuthError, BadRequestError, DecodeError, NotFoundError, TransportError
from models.channel import ChannelEntry, RefinedSeries
from models.readings import SensorPlacement, StalenessPolicy, ZoneThresholds
from models.supervisor import SupervisorCommand, SupervisorConfig, SupervisorState
from services.supervisor_service import (
    CommandMailbox, SimulatedClock, WallClock, command_stream, decode_entry, poll_once
)

pytestmark = pytest.mark.unit

ONE = (SensorPlacement(1, 0.0),)
PAIR = (SensorPlacement(1, 0.0), SensorPlacement(2, 90.0))


def entry(entry_id, created_at, **fields):
    return ChannelEntry(
        entry_id=entry_id,
        created_at=datetime.fromtimestamp(created_at, tz=timezone.utc),
        fields={int(key[5:]): value for key, value in fields.items()},
    )


class ScriptedClient(ChannelClient):
    """Answers fetch_last from a script; each item is an entry, None, or an exception."""

    def __init__(self, *script, refined=None):
        super().__init__(channel_id=1, read_key="READKEY")
        self.script = list(script)
        self.refined = refined
        self.polls = 0

    def fetch_last(self, channel_id=None):
        item = self.script[min(self.polls, len(self.script) - 1)]
        self.polls += 1
        if isinstance(item, Exception):
            raise item
        return item

    def fetch_refined(self, window, channel_id=None):
        if self.refined is None:
            raise TransportError("no refined series")
        return self.refined


def make_config(fence=ONE, **overrides):
    values = {
        "fence": fence,
        "poll_interval": 0.25,
        "staleness": StalenessPolicy(3.0),
        "zones": ZoneThresholds(0.5, 2.0),
        "clock_skew_grace": 0.5,
        "transport_grace": 1,
    }
    values.update(overrides)
    return SupervisorConfig(**values)


def run_polls(config, client, times, state=None):
    state = state or SupervisorState()
    commands = []
    for now in times:
        state, command = poll_once(state, config, client, now)
        commands.append(command)
    return state, commands


class TestDecodeEntry:

    def test_slots_map_to_sensors_in_id_order(self):
        fence = [SensorPlacement(7, 0.0), SensorPlacement(3, 90.0)]
        decoded = decode_entry(entry(1, 0, field1="1.20", field2="-1", field8="4.250000"), fence, 0.01, 5.0)
        readings = {placement.sensor_id: reading for placement, reading in decoded.readings}
        assert readings[3].distance == 1.2
        assert not readings[7].is_in_range
        assert decoded.sample_time == 4.25
        assert decoded.errors == 0

    @pytest.mark.parametrize("raw", ["abc", "7.00", "1.234", "nan", "-0.50"])
    def test_invalid_values_become_out_of_range_and_are_counted(self, raw):
        decoded = decode_entry(entry(1, 0, field1=raw), ONE, 0.01, 5.0)
        (_, reading), = decoded.readings
        assert not reading.is_in_range
        assert decoded.errors == 1

    def test_entry_without_sensor_slots(self):
        with pytest.raises(DecodeError):
            decode_entry(entry(1, 0, field8="1.000000"), ONE, 0.01, 5.0)

    def test_missing_sample_time(self):
        assert decode_entry(entry(1, 0, field1="1.00"), ONE, 0.01, 5.0).sample_time is None


class TestPollOnce:

    def test_initial_state_is_fault_stop(self):
        state = SupervisorState()
        assert state.mode == SupervisorMode.FAULT_STOP
        assert state.current_override == 0.0

    @pytest.mark.parametrize("raw, mode, override", [
        ("4.00", SupervisorMode.CLEAR, 1.0),
        ("-1", SupervisorMode.CLEAR, 1.0),
        ("1.25", SupervisorMode.SLOW, 0.5),
        ("0.50", SupervisorMode.STOP, 0.0),
    ])
    def test_fresh_entry_sets_mode_and_override(self, raw, mode, override):
        client = ScriptedClient(entry(1, 100, field1=raw, field8="9.000000"))
        state, command = poll_once(SupervisorState(), make_config(), client, 100.25)
        assert (command.mode, command.override) == (mode, pytest.approx(override))
        assert command.fresh is True
        assert command.cause_entry_id == 1
        assert command.cause_sample_time == 9.0
        assert state.last_entry_id == 1

    def test_repeated_entry_is_not_fresh(self):
        client = ScriptedClient(entry(1, 100, field1="1.25"))
        _, (first, second) = run_polls(make_config(), client, [100.0, 100.25])
        assert first.fresh is True
        assert second.fresh is False
        assert second.mode == SupervisorMode.SLOW

    def test_stale_reading_forces_fault_stop_until_a_fresh_entry(self):
        client = ScriptedClient(entry(1, 100, field1="4.00"), entry(1, 100, field1="4.00"),
                                entry(1, 100, field1="4.00"), entry(2, 104, field1="4.00"))
        _, commands = run_polls(make_config(), client, [100.0, 103.0, 103.25, 104.0])
        assert [command.mode for command in commands] == [
            SupervisorMode.CLEAR, SupervisorMode.CLEAR, SupervisorMode.FAULT_STOP, SupervisorMode.CLEAR]
        assert commands[2].override == 0.0
        assert "old" in commands[2].fault_reason

    def test_empty_channel_is_a_fault(self):
        _, command = poll_once(SupervisorState(), make_config(), ScriptedClient(None), 10.0)
        assert command.mode == SupervisorMode.FAULT_STOP
        assert command.fault_reason == "channel is empty"

    def test_transport_failure_faults_at_the_grace_limit(self):
        fresh = entry(1, 100, field1="4.00")
        client = ScriptedClient(fresh, TransportError("down"), TransportError("down"), fresh)
        state, commands = run_polls(make_config(transport_grace=2), client, [100.0, 100.25, 100.5, 100.75])
        assert [command.mode for command in commands] == [
            SupervisorMode.CLEAR, SupervisorMode.CLEAR, SupervisorMode.FAULT_STOP, SupervisorMode.CLEAR]
        assert state.transport_failures == 0

    def test_single_transport_failure_faults_by_default(self):
        client = ScriptedClient(entry(1, 100, field1="4.00"), TransportError("down"))
        _, commands = run_polls(make_config(), client, [100.0, 100.25])
        assert commands[1].mode == SupervisorMode.FAULT_STOP

    def test_rejected_read_key_is_a_fault(self):
        _, command = poll_once(SupervisorState(), make_config(), ScriptedClient(AuthError("no")), 10.0)
        assert command.mode == SupervisorMode.FAULT_STOP

    def test_every_fence_sensor_needs_a_reading(self):
        client = ScriptedClient(entry(1, 100, field1="4.00"), entry(2, 101, field2="3.00"))
        _, commands = run_polls(make_config(fence=PAIR), client, [100.0, 101.0])
        assert commands[0].mode == SupervisorMode.FAULT_STOP
        assert "sensor 2" in commands[0].fault_reason
        assert commands[1].mode == SupervisorMode.CLEAR
        assert commands[1].min_distance == 3.0

    def test_nearest_sensor_drives_the_command(self):
        client = ScriptedClient(entry(1, 100, field1="4.00"), entry(2, 101, field2="0.80"))
        _, commands = run_polls(make_config(fence=PAIR), client, [100.0, 101.0])
        assert commands[1].mode == SupervisorMode.SLOW
        assert commands[1].override == pytest.approx(0.2)
        assert commands[1].approach_bearing is not None

    def test_decode_error_keeps_the_cache_and_counts(self):
        client = ScriptedClient(entry(1, 100, field1="4.00"), entry(2, 101, field8="1.000000"))
        state, commands = run_polls(make_config(), client, [100.0, 101.0])
        assert commands[1].mode == SupervisorMode.CLEAR
        assert commands[1].fresh is False
        assert commands[1].decode_errors == 1
        assert state.decode_errors == 1
        assert state.last_entry_id == 2

    def test_small_clock_skew_is_tolerated(self):
        client = ScriptedClient(entry(1, 100, field1="4.00"))
        _, command = poll_once(SupervisorState(), make_config(), client, 99.7)
        assert command.mode == SupervisorMode.CLEAR

    def test_large_clock_skew_is_a_fault(self):
        client = ScriptedClient(entry(1, 100, field1="4.00"))
        _, command = poll_once(SupervisorState(), make_config(), client, 99.0)
        assert command.mode == SupervisorMode.FAULT_STOP
        assert "future" in command.fault_reason

    def test_refined_averages_replace_raw_readings(self):
        refined = RefinedSeries(channel_id=1, window=3, fields={1: 1.254, 8: 3.0})
        client = ScriptedClient(entry(1, 100, field1="4.00"), refined=refined)
        _, command = poll_once(SupervisorState(), make_config(use_refined=True), client, 100.0)
        assert command.mode == SupervisorMode.SLOW
        assert command.min_distance == pytest.approx(1.25)

    def test_unavailable_refined_series_falls_back_to_raw(self):
        client = ScriptedClient(entry(1, 100, field1="4.00"))
        _, command = poll_once(SupervisorState(), make_config(use_refined=True), client, 100.0)
        assert command.mode == SupervisorMode.CLEAR


class TestSupervisorProperties:

    @staticmethod
    def fresh_override(raw):
        client = ScriptedClient(entry(1, 100, field1=raw))
        _, command = poll_once(SupervisorState(), make_config(), client, 100.0)
        return command.override

    def test_nearer_object_never_gets_a_higher_override(self):
        rng = random.Random(31337)
        for _ in range(2_000):
            near, far = sorted(round(rng.uniform(0.0, 5.0), 2) for _ in range(2))
            far_raw = "-1" if rng.random() < 0.1 else f"{far:.2f}"
            assert self.fresh_override(f"{near:.2f}") <= self.fresh_override(far_raw)

    def random_script_item(self, rng, entry_id):
        roll = rng.random()
        if roll < 0.08:
            return None
        if roll < 0.16:
            return rng.choice([TransportError("down"), AuthError("no"), NotFoundError("gone"),
                               BadRequestError("bad")])
        fields = {}
        for slot in rng.sample(range(1, 9), rng.randint(1, 4)):
            fields[f"field{slot}"] = rng.choice([
                f"{rng.uniform(0.0, 5.0):.2f}", "-1", "abc", "nan", "7.00", "1.234", "", f"{rng.uniform(0, 50):.6f}",
            ])
        return entry(entry_id, 100 + rng.randint(-3, 6), **fields)

    def test_random_entry_sequences_always_yield_a_valid_command(self):
        rng = random.Random(2718)
        modes = set(SupervisorMode)
        for _ in range(2_000):
            entry_id = 0
            script = []
            for _ in range(10):
                entry_id += rng.choice([0, 1, 1, 2])
                script.append(self.random_script_item(rng, max(entry_id, 1)))
            config = make_config(fence=PAIR, transport_grace=rng.randint(1, 3), use_refined=rng.random() < 0.2)
            client = ScriptedClient(*script)
            state = SupervisorState()
            now = 99.0
            for _ in script:
                now += rng.choice([0.0, 0.25, 0.5, 2.0])
                state, command = poll_once(state, config, client, now)
                assert command.mode in modes
                assert 0.0 <= command.override <= 1.0
                assert state.mode == command.mode
                if command.mode in (SupervisorMode.FAULT_STOP, SupervisorMode.STOP):
                    assert command.override == 0.0


class TestCommandStream:

    def test_polls_follow_the_simulated_clock(self):
        clock = SimulatedClock(100.0)
        client = ScriptedClient(entry(1, 100, field1="1.25", field8="0.000000"))
        stream = command_stream(make_config(), client, clock)
        first = next(stream)
        assert first.issued_at == 100.0
        clock.set(0.25)
        assert next(stream).issued_at == 100.25
        stream.close()

    def test_poll_before_its_time_is_an_error(self):
        clock = SimulatedClock(0.0)
        stream = command_stream(make_config(), ScriptedClient(None), clock)
        next(stream)
        clock.set(0.1)
        with pytest.raises(RuntimeError):
            next(stream)

    def test_stop_event_ends_the_stream(self):
        stop = threading.Event()
        stop.set()
        stream = command_stream(make_config(), ScriptedClient(None), WallClock(), stop_event=stop)
        assert list(stream) == []


class TestCommandMailbox:

    def command(self, override, mode=SupervisorMode.SLOW):
        return SupervisorCommand(override=override, mode=mode, issued_at=0.0)

    def test_newest_command_wins(self):
        mailbox = CommandMailbox()
        mailbox.put(self.command(0.3))
        mailbox.put(self.command(0.6))
        assert mailbox.take().override == 0.6
        assert mailbox.take() is None
        assert mailbox.replaced == 1

    def test_take_waits_for_a_command(self):
        mailbox = CommandMailbox()
        timer = threading.Timer(0.05, mailbox.put, args=(self.command(0.0, SupervisorMode.STOP),))
        timer.start()
        try:
            assert mailbox.take(timeout=2.0).mode == SupervisorMode.STOP
        finally:
            timer.cancel()

    def test_mode_and_override_must_agree(self):
        with pytest.raises(ValueError):
            SupervisorCommand(override=0.5, mode=SupervisorMode.STOP, issued_at=0.0)
        with pytest.raises(ValueError):
            SupervisorCommand(override=0.5, mode=SupervisorMode.CLEAR, issued_at=0.0)
