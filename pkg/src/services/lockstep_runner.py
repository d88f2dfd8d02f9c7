"""
Deterministic lockstep runs.

Every component advances on the same simulated tick, in a fixed order:

    1. object motion
    2. sensor sampling, ascending sensor_id
    3. delivery of writes whose uplink delay has elapsed
    4. supervisor poll, when one is due
    5. robot command and motion
    6. trace row

The broker lives in-process behind LocalChannelClient and every random
stream derives from the scenario seed, so a (scenario, seed) pair always
produces the same run.csv.
"""

import heapq
import math
from typing import List, Optional, Tuple

from ciot.broker import ChannelBroker
from ciot.client import LocalChannelClient
from core.enums import PublishStatus, RunMode
from logging_config import get_logger
from models.metrics import RunMetrics
from models.robot import RobotState
from models.scenario import ScenarioSpec
from models.supervisor import SupervisorCommand
from services.report_service import RunRecorder, TickRecord
from services.robot_service import advance, apply_command
from services.sensor_node import PendingWrite, PublishOutcome, SensorNode
from services.supervisor_service import CommandMailbox, SimulatedClock, command_stream

logger = get_logger(__name__)

LOCKSTEP_EPOCH = 0.0
DELAY_TICK_TOLERANCE = 1e-9


def delay_ticks(delay: float, tick: float) -> int:
    """Ticks a write spends on the uplink; a zero delay is delivered in the tick it was sampled."""
    return max(0, math.ceil(delay / tick - DELAY_TICK_TOLERANCE))


def command_latency(command: SupervisorCommand, clock_start: float) -> Optional[float]:
    """Seconds from the sample behind a fresh command to the poll that issued it."""
    if not command.fresh or command.cause_sample_time is None:
        return None
    return command.issued_at - clock_start - command.cause_sample_time


def run_lockstep(spec: ScenarioSpec) -> RunMetrics:
    """
    Run a scenario on simulated time.

    Args:
        spec: Validated scenario

    Returns:
        The trace and its summary
    """
    clock = SimulatedClock(LOCKSTEP_EPOCH)
    broker = ChannelBroker([spec.channel_config()])
    channel = spec.channel
    nodes = [SensorNode(config, spec.slot_for(config.sensor_id), spec.seed) for config in spec.sensors]
    nodes_by_id = {node.sensor_id: node for node in nodes}
    node_clients = {
        node.sensor_id: LocalChannelClient(broker, channel.channel_id, clock.now, write_key=channel.write_key)
        for node in nodes
    }
    supervisor_client = LocalChannelClient(broker, channel.channel_id, clock.now, read_key=channel.read_key)
    commands = command_stream(spec.supervisor_config(), supervisor_client, clock)
    mailbox = CommandMailbox()
    recorder = RunRecorder(spec, RunMode.LOCKSTEP)

    poll_ticks = spec.ticks_for(spec.timing.poll_interval)
    uplink: List[Tuple[int, int, PendingWrite]] = []
    sequence = 0
    robot = RobotState()
    command: Optional[SupervisorCommand] = None
    logger.info(f"Lockstep run of '{spec.name}': {spec.n_ticks} ticks, seed {spec.seed}")

    for index in range(spec.n_ticks):
        t = spec.tick_time(index)
        clock.set(t)
        obj = spec.object.state_at(t)
        record = TickRecord(t=t, true_range=obj.range_from_robot_base, bearing=obj.bearing)

        for node in nodes:
            if not node.is_due(index, spec.tick):
                continue
            result = node.prepare(obj, t)
            if isinstance(result, PublishOutcome):
                record.count(result)
                continue
            due = index + delay_ticks(node.config.uplink_delay, spec.tick)
            heapq.heappush(uplink, (due, sequence, result))
            sequence += 1

        while uplink and uplink[0][0] <= index:
            _, _, pending = heapq.heappop(uplink)
            node = nodes_by_id[pending.sensor_id]
            record.count(node.deliver(pending, node_clients[node.sensor_id], spec.comms.in_blackout(t)))

        if index % poll_ticks == 0:
            mailbox.put(next(commands))
            record.polled = 1
        received = mailbox.take()
        if received is not None:
            command = received
            record.entry_id = received.cause_entry_id
            record.decode_errors = received.decode_errors
            record.latency = command_latency(received, clock.start)

        if command is not None:
            robot = apply_command(robot, command, spec.robot, spec.tick)
            record.mode = command.mode
            record.override = command.override
        robot = advance(robot, spec.tick, spec.robot)
        record.robot_speed = robot.actual_speed
        recorder.record(record)

    # Writes still on the uplink when the run ends never arrive.
    recorder.fold_late([
        PublishOutcome(PublishStatus.DROPPED, pending.sensor_id, pending.sample_time)
        for _, _, pending in uplink
    ])
    commands.close()
    metrics = recorder.finish()
    logger.info(f"Lockstep run of '{spec.name}' finished: "
                f"stop before d_stop={metrics.safety.stop_achieved_before_d_stop}")
    return metrics

