"""
Service layer: the simulated fence, the supervisor, the robot and the run harness.
"""

from .lockstep_runner import run_lockstep
from .realtime_runner import RealtimeRun, run_realtime
from .report_service import RunRecorder, emit_report, replay
from .robot_service import advance, apply_command, score_safety
from .sensor_node import SensorNode, node_tick
from .supervisor_service import CommandMailbox, SimulatedClock, WallClock, command_stream, poll_once

__all__ = [
    'CommandMailbox',
    'RealtimeRun',
    'RunRecorder',
    'SensorNode',
    'SimulatedClock',
    'WallClock',
    'advance',
    'apply_command',
    'command_stream',
    'emit_report',
    'node_tick',
    'poll_once',
    'replay',
    'run_lockstep',
    'run_realtime',
    'score_safety'
]
