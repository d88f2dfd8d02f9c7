import math
import os

import pytest

from core.enums import RunMode, SupervisorMode
from models.scenario import load_scenario, scenario_from_dict
from models.supervisor import SupervisorCommand
from services.lockstep_runner import command_latency, delay_ticks, run_lockstep
from services.report_service import check_acceptance, csv_header, emit_report, file_digest

pytestmark = pytest.mark.unit


def column_values(metrics, name):
    index = csv_header(metrics.metadata["sensor_ids"]).index(name)
    return [row[index] for row in metrics.rows]


def rows_by_time(metrics):
    header = csv_header(metrics.metadata["sensor_ids"])
    return [(float(row[0]), dict(zip(header, row))) for row in metrics.rows]


class TestHelpers:

    @pytest.mark.parametrize("delay, ticks", [(0.0, 0), (0.01, 1), (0.05, 5), (0.051, 6), (0.3, 30)])
    def test_delay_ticks(self, delay, ticks):
        assert delay_ticks(delay, 0.01) == ticks

    def test_latency_only_for_fresh_commands(self):
        fresh = SupervisorCommand(override=1.0, mode=SupervisorMode.CLEAR, issued_at=12.5, fresh=True,
                                  cause_sample_time=2.0)
        assert command_latency(fresh, 10.0) == pytest.approx(0.5)
        stale = SupervisorCommand(override=1.0, mode=SupervisorMode.CLEAR, issued_at=12.5, cause_sample_time=2.0)
        assert command_latency(stale, 10.0) is None


class TestLockstepRun:

    def test_one_row_per_tick(self, scenario_data):
        scenario_data["duration"] = 1.0
        metrics = run_lockstep(scenario_from_dict(scenario_data))
        assert metrics.summary.rows == 100
        assert column_values(metrics, "t")[:3] == ["0.000000", "0.010000", "0.020000"]

    def test_canonical_approach_stops_in_time(self, scenario_data):
        spec = scenario_from_dict(scenario_data)
        metrics = run_lockstep(spec)
        assert metrics.safety.stop_achieved_before_d_stop is True
        assert metrics.safety.first_inside_d_stop_tick == 900
        assert not metrics.safety.collision
        assert check_acceptance(spec, metrics, RunMode.LOCKSTEP) == []

        rows = dict(rows_by_time(metrics))
        assert rows[9.0]["mode"] == SupervisorMode.STOP.value
        assert rows[9.0]["robot_speed"] == "0.000000"
        assert rows[9.0]["s1_measured"] == "0.50"
        assert rows[8.0]["mode"] == SupervisorMode.SLOW.value

    def test_canonical_counts_and_latency(self, scenario_data):
        metrics = run_lockstep(scenario_from_dict(scenario_data))
        counts = metrics.counts
        assert counts.attempts == 12
        assert counts.published == 12
        assert counts.polls == 48
        assert counts.stale_faults == 0
        assert metrics.latency.count == 12
        assert metrics.latency.max == 0.0
        assert metrics.summary.samples_per_sensor == {"1": 12}

    def test_slow_writes_miss_the_stop(self, scenario_data):
        scenario_data["timing"]["write_interval"] = 4.0
        spec = scenario_from_dict(scenario_data)
        metrics = run_lockstep(spec)
        assert metrics.safety.stop_achieved_before_d_stop is False
        assert check_acceptance(spec, metrics, RunMode.LOCKSTEP) != []

    def test_runs_are_deterministic(self, tmp_path, scenario_data):
        scenario_data["sensors"][0]["noise_sigma"] = 0.05
        scenario_data["comms"] = {"dropout_prob": 0.2}
        spec = scenario_from_dict(scenario_data)
        emit_report(run_lockstep(spec), str(tmp_path / "first"))
        emit_report(run_lockstep(spec), str(tmp_path / "second"))
        for name in ("run.csv", "summary.json"):
            assert file_digest(str(tmp_path / "first" / name)) == file_digest(str(tmp_path / "second" / name))

    def test_different_seeds_differ(self, scenario_data):
        scenario_data["sensors"][0]["noise_sigma"] = 0.05
        spec = scenario_from_dict(scenario_data)
        assert run_lockstep(spec).rows != run_lockstep(spec.with_seed(8)).rows

    def test_blackout_trips_the_staleness_failsafe(self, scenario_dir):
        metrics = run_lockstep(load_scenario(os.path.join(scenario_dir, "uplink_blackout.json")))
        rows = rows_by_time(metrics)
        blacked_out = [row for t, row in rows if 6.25 <= t < 10.0]
        assert blacked_out
        assert all(row["mode"] == SupervisorMode.FAULT_STOP.value for row in blacked_out)
        assert all(row["override"] == "0.000000" for row in blacked_out)
        assert dict(rows)[6.0]["mode"] == SupervisorMode.CLEAR.value
        assert dict(rows)[10.0]["mode"] == SupervisorMode.CLEAR.value
        assert metrics.counts.stale_faults == 15
        assert metrics.counts.transport_errors == 6

    def test_conservation_with_dropouts_and_uplink_delay(self, scenario_data):
        scenario_data["comms"] = {"dropout_prob": 0.3, "uplink_delay": 0.05}
        metrics = run_lockstep(scenario_from_dict(scenario_data))
        counts = metrics.counts
        assert counts.attempts == 12
        assert counts.published + counts.dropped + counts.rate_limited + counts.suppressed == counts.attempts
        assert counts.dropped > 0

    def test_write_still_on_the_uplink_at_the_end_is_dropped(self, scenario_data):
        scenario_data["duration"] = 1.0
        scenario_data["comms"] = {"uplink_delay": 2.0}
        metrics = run_lockstep(scenario_from_dict(scenario_data))
        assert metrics.counts.attempts == 1
        assert metrics.counts.dropped == 1
        assert column_values(metrics, "dropped")[-1] == "1"
        assert all(mode == SupervisorMode.FAULT_STOP.value for mode in column_values(metrics, "mode"))

    def test_four_sensor_fence(self, scenario_dir):
        spec = load_scenario(os.path.join(scenario_dir, "fence_four_sensors.json"))
        metrics = run_lockstep(spec)
        assert metrics.summary.rows == 2000
        assert set(metrics.summary.samples_per_sensor) == {"1", "2", "3", "4"}
        assert metrics.counts.attempts == 20
        assert metrics.safety.stop_achieved_before_d_stop is True
        assert check_acceptance(spec, metrics, RunMode.LOCKSTEP) == []


class TestCommandLiveness:

    @pytest.mark.parametrize("poll_interval", [0.25, 0.3, 1.0])
    @pytest.mark.parametrize("uplink_delay", [0.0, 0.05])
    def test_published_entry_reaches_the_command_stream_in_time(self, scenario_data, poll_interval, uplink_delay):
        scenario_data["timing"]["poll_interval"] = poll_interval
        scenario_data["comms"] = {"uplink_delay": uplink_delay}
        spec = scenario_from_dict(scenario_data)
        metrics = run_lockstep(spec)
        assert metrics.counts.rate_limited == 0

        bound = math.ceil(poll_interval / spec.tick) + 1
        published = [int(value) for value in column_values(metrics, "published")]
        commanded = [int(value) if value else 0 for value in column_values(metrics, "entry_id")]
        entry_id = 0
        for tick, count in enumerate(published):
            if not count:
                continue
            entry_id += count
            window = commanded[tick:tick + bound + 1]
            if tick + bound < len(commanded):
                assert max(window) >= entry_id, f"entry {entry_id} published at tick {tick} not commanded"
