import json
import os
import xml.etree.ElementTree as ET
from dataclasses import replace

import pytest

from core.enums import RunMode
from core.exceptions import ReportWriteError, SchemaError, SchemaVersionError
from models.metrics import LatencyStats
from models.scenario import scenario_from_dict
from services.lockstep_runner import run_lockstep
from services.report_service import (
    RUN_CSV, SUMMARY_JSON, check_acceptance, csv_header, emit_report, file_digest, latency_bound, read_run_csv,
    replay, summary_json
)
from utils.svg_plot import Guide, Series, render_plot

pytestmark = pytest.mark.unit

PLOTS = ("distance.svg", "override.svg", "speed.svg")


@pytest.fixture
def short_run(scenario_data):
    scenario_data["duration"] = 2.0
    return run_lockstep(scenario_from_dict(scenario_data))


@pytest.fixture
def report_dir(tmp_path, short_run):
    out_dir = tmp_path / "report"
    emit_report(short_run, str(out_dir))
    return out_dir


def rewrite_lines(path, edit):
    lines = path.read_text(encoding="utf-8").splitlines()
    path.write_text("\n".join(edit(lines)) + "\n", encoding="utf-8")


class TestCsvLayout:

    def test_header_columns(self):
        assert csv_header([2, 5]) == [
            "t", "true_range", "bearing", "s2_measured", "s5_measured", "entry_id", "mode", "override",
            "robot_speed", "latency_s", "published", "dropped", "rate_limited", "suppressed", "polled",
            "decode_errors", "transport_errors",
        ]

    def test_file_layout(self, report_dir):
        lines = (report_dir / RUN_CSV).read_text(encoding="utf-8").splitlines()
        metadata = json.loads(lines[0][2:])
        assert metadata["schema_version"] == 1
        assert metadata["mode"] == "lockstep"
        assert metadata["sensor_ids"] == [1]
        assert lines[1] == ",".join(csv_header([1]))
        assert lines[-1] == "# end rows=200"
        assert len(lines) == 203


class TestEmitReport:

    def test_writes_every_artifact(self, tmp_path, short_run):
        paths = emit_report(short_run, str(tmp_path / "nested" / "out"))
        assert [os.path.basename(path) for path in paths] == [RUN_CSV, SUMMARY_JSON, *PLOTS]
        assert all(os.path.getsize(path) > 0 for path in paths)

    def test_single_row_run_still_plots(self, tmp_path, scenario_data):
        scenario_data["duration"] = 0.01
        metrics = run_lockstep(scenario_from_dict(scenario_data))
        emit_report(metrics, str(tmp_path))
        assert metrics.summary.rows == 1
        for name in PLOTS:
            assert ET.parse(str(tmp_path / name)).getroot().tag.endswith("svg")

    def test_re_emitting_produces_identical_files(self, tmp_path, short_run):
        emit_report(short_run, str(tmp_path / "a"))
        emit_report(short_run, str(tmp_path / "b"))
        for name in (RUN_CSV, SUMMARY_JSON, *PLOTS):
            assert file_digest(str(tmp_path / "a" / name)) == file_digest(str(tmp_path / "b" / name))

    def test_unwritable_destination(self, tmp_path, short_run):
        blocker = tmp_path / "occupied"
        blocker.write_text("not a directory", encoding="utf-8")
        with pytest.raises(ReportWriteError):
            emit_report(short_run, str(blocker / "out"))

    def test_summary_json_is_stable(self, report_dir, short_run):
        text = (report_dir / SUMMARY_JSON).read_text(encoding="utf-8")
        assert text == summary_json(short_run.summary)
        payload = json.loads(text)
        assert payload["rows"] == 200
        assert payload["duration"] == 2.0
        assert payload["safety"]["collision"] is False
        assert list(payload) == sorted(payload)


class TestReplay:

    def test_replay_reproduces_the_summary(self, report_dir):
        replayed = replay(str(report_dir / RUN_CSV))
        assert summary_json(replayed.summary) == (report_dir / SUMMARY_JSON).read_text(encoding="utf-8")

    def test_truncated_file(self, report_dir):
        rewrite_lines(report_dir / RUN_CSV, lambda lines: lines[:-5])
        with pytest.raises(SchemaError):
            replay(str(report_dir / RUN_CSV))

    def test_row_count_mismatch(self, report_dir):
        rewrite_lines(report_dir / RUN_CSV, lambda lines: lines[:-3] + lines[-1:])
        with pytest.raises(SchemaError, match="announces"):
            read_run_csv(str(report_dir / RUN_CSV))

    def test_other_schema_version(self, report_dir):
        def bump(lines):
            metadata = json.loads(lines[0][2:])
            metadata["schema_version"] = 2
            return ["# " + json.dumps(metadata)] + lines[1:]

        rewrite_lines(report_dir / RUN_CSV, bump)
        with pytest.raises(SchemaVersionError) as raised:
            replay(str(report_dir / RUN_CSV))
        assert raised.value.found == 2

    def test_header_mismatch(self, report_dir):
        rewrite_lines(report_dir / RUN_CSV, lambda lines: [lines[0], lines[1].replace("s1_", "s9_")] + lines[2:])
        with pytest.raises(SchemaError, match="header"):
            replay(str(report_dir / RUN_CSV))

    def test_missing_metadata(self, report_dir):
        rewrite_lines(report_dir / RUN_CSV, lambda lines: lines[1:])
        with pytest.raises(SchemaError, match="metadata"):
            replay(str(report_dir / RUN_CSV))

    def test_short_row(self, report_dir):
        rewrite_lines(report_dir / RUN_CSV, lambda lines: lines[:2] + [lines[2].rsplit(",", 1)[0]] + lines[3:])
        with pytest.raises(SchemaError, match="columns"):
            replay(str(report_dir / RUN_CSV))

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError):
            replay(str(tmp_path / "absent.csv"))


class TestAcceptance:

    def test_latency_bound(self, scenario_data):
        assert latency_bound(scenario_from_dict(scenario_data)) == pytest.approx(1.35)

    def test_latency_only_checked_for_realtime_runs(self, scenario_data, short_run):
        spec = scenario_from_dict(scenario_data)
        short_run.summary = replace(short_run.summary, latency=LatencyStats(count=1, p50=5.0, p95=5.0, max=5.0))
        assert check_acceptance(spec, short_run, RunMode.LOCKSTEP) == []
        (violation,) = check_acceptance(spec, short_run, RunMode.REALTIME)
        assert "p95 latency" in violation


class TestSvgPlot:

    def test_rendering_is_deterministic(self):
        series = [Series("a", [(0.0, 1.0), (1.0, 2.0)]), Series("b", [(0.5, 1.5)], style="points")]
        first = render_plot("t", "x", "y", series, [Guide(1.2, "g")])
        assert first == render_plot("t", "x", "y", series, [Guide(1.2, "g")])
        ET.fromstring(first)

    def test_labels_are_escaped(self):
        document = render_plot("a < b & c", "x", "y", [Series("<s>", [(0.0, 0.0)], style="step")])
        assert "a &lt; b &amp; c" in document
        ET.fromstring(document)

    def test_no_data(self):
        ET.fromstring(render_plot("empty", "x", "y", [Series("nothing")]))
