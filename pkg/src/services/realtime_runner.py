"""
Real-time runs against a live HTTP broker.

Each sensor node and the supervisor run on their own thread with their own
HttpChannelClient; the robot and the trace recorder run on the calling
thread, one row per tick of wall-clock time. Sensors and the supervisor
report what they did through an event queue, and the supervisor hands
commands to the robot through a CommandMailbox.

Sensor sends on the shared channel are spaced by a WriteSpacer. The private
broker also absorbs a little request transit jitter in its rate limit. After
the last tick the published entry ids are read back from the channel feed.
"""

import queue
import threading
from contextlib import contextmanager
from typing import Callable, Iterator, List, Mapping, Optional, Set, Tuple

from ciot.app import create_broker_app
from ciot.broker import ChannelBroker
from ciot.client import ChannelClient, HttpChannelClient
from ciot.rate_limiter import WriteRateLimiter
from ciot.server import BrokerServer
from core.constants import DEFAULT_BROKER_HOST, REALTIME_RATE_LIMIT_JITTER, REQUEST_TIMEOUT_SECONDS
from core.enums import PublishStatus, RunMode
from core.exceptions import ChannelError, RunFaultError, TransportError
from logging_config import get_logger
from models.channel import PublishResult
from models.metrics import RunMetrics
from models.robot import RobotState
from models.scenario import ScenarioSpec
from models.supervisor import SupervisorCommand
from services.lockstep_runner import command_latency
from services.report_service import RunRecorder, TickRecord
from services.robot_service import advance, apply_command
from services.sensor_node import PendingWrite, PublishOutcome, SensorNode
from services.supervisor_service import CommandMailbox, WallClock, command_stream

logger = get_logger(__name__)

THREAD_JOIN_TIMEOUT = 5.0
PUBLISH_EVENT = "publish"
POLL_EVENT = "poll"


class WriteSpacer:
    """
    Serializes the sends of every node sharing one channel.

    A send starts no earlier than min_interval after the previous send
    started. Nodes woken late on the write cadence therefore never send
    closer together than the channel's minimum write interval.
    """

    def __init__(self, clock: WallClock, min_interval: float, stop_event: threading.Event) -> None:
        self.clock = clock
        self.min_interval = min_interval
        self.stop_event = stop_event
        self.last_send: Optional[float] = None
        self._lock = threading.Lock()

    @contextmanager
    def turn(self) -> Iterator[bool]:
        """
        Hold the channel for one send.

        Yields:
            False when the run stopped while waiting; the caller must not send
        """
        with self._lock:
            if self.last_send is not None:
                if not self.clock.wait_until(self.last_send + self.min_interval, self.stop_event):
                    yield False
                    return
            self.last_send = self.clock.now()
            yield True


class SpacedChannelClient(ChannelClient):
    """Write-only client that takes a WriteSpacer turn around every publish."""

    def __init__(self, client: HttpChannelClient, spacer: WriteSpacer) -> None:
        super().__init__(client.channel_id, write_key=client.write_key)
        self.client = client
        self.spacer = spacer

    def publish(self, fields: Mapping[int, str]) -> PublishResult:
        with self.spacer.turn() as may_send:
            if not may_send:
                raise TransportError("Run stopped before the write could be sent", endpoint=self.client.endpoint)
            return self.client.publish(fields)


class RealtimeRun:
    """
    One real-time run of a scenario.

    Attributes:
        spec: Scenario being run
        endpoint: Broker URL, or None to start a private broker on an ephemeral port
    """

    def __init__(self, spec: ScenarioSpec, endpoint: Optional[str] = None) -> None:
        self.spec = spec
        self.endpoint = endpoint
        self.server: Optional[BrokerServer] = None
        self.clock: Optional[WallClock] = None
        self.stop_event = threading.Event()
        self.events: "queue.Queue[Tuple[str, object]]" = queue.Queue()
        self.mailbox = CommandMailbox()
        self.errors: List[BaseException] = []
        self.threads: List[threading.Thread] = []
        self.clients: List[HttpChannelClient] = []
        self.spacer: Optional[WriteSpacer] = None
        self.reader: Optional[HttpChannelClient] = None
        self.published_ids: Set[int] = set()
        self.unconfirmed: Optional[List[int]] = None
        self._stopped = False

    # ------------------------------------------------------------------
    # Threads
    # ------------------------------------------------------------------

    def _guarded(self, name: str, target: Callable[[], None]) -> threading.Thread:
        def run() -> None:
            try:
                target()
            except Exception as e:
                logger.error(f"{name} failed: {e}")
                self.errors.append(e)
                self.stop_event.set()

        return threading.Thread(target=run, daemon=True, name=name)

    def _client(self, **keys) -> HttpChannelClient:
        client = HttpChannelClient(self.endpoint, self.spec.channel.channel_id,
                                   timeout=REQUEST_TIMEOUT_SECONDS, **keys)
        self.clients.append(client)
        return client

    def _sensor_loop(self, node: SensorNode, client: ChannelClient) -> None:
        config = node.config
        sample = 0
        while True:
            offset = config.phase_offset + sample * config.write_interval
            if offset >= self.spec.duration - 1e-9:
                return
            if not self.clock.wait_until(self.clock.start + offset, self.stop_event):
                return
            sample_time = self.clock.elapsed()
            result = node.prepare(self.spec.object.state_at(sample_time), sample_time)
            if isinstance(result, PendingWrite):
                if config.uplink_delay > 0 and self.stop_event.wait(config.uplink_delay):
                    result = PublishOutcome(PublishStatus.DROPPED, node.sensor_id, sample_time)
                else:
                    result = node.deliver(result, client, self.spec.comms.in_blackout(self.clock.elapsed()))
            self.events.put((PUBLISH_EVENT, result))
            sample += 1

    def _supervisor_loop(self, client: HttpChannelClient) -> None:
        config = self.spec.supervisor_config(self.endpoint)
        for command in command_stream(config, client, self.clock, self.stop_event):
            self.mailbox.put(command)
            self.events.put((POLL_EVENT, command))

    def start(self) -> None:
        if self.endpoint is None:
            broker = ChannelBroker([self.spec.channel_config()],
                                   rate_limiter=WriteRateLimiter(tolerance=REALTIME_RATE_LIMIT_JITTER))
            self.server = BrokerServer(create_broker_app(broker), DEFAULT_BROKER_HOST, 0)
            self.server.start()
            self.endpoint = self.server.endpoint
        self.clock = WallClock()
        self.spacer = WriteSpacer(self.clock, self.spec.timing.min_write_interval, self.stop_event)

        channel = self.spec.channel
        for config in self.spec.sensors:
            node = SensorNode(config, self.spec.slot_for(config.sensor_id), self.spec.seed)
            client = SpacedChannelClient(self._client(write_key=channel.write_key), self.spacer)
            self.threads.append(self._guarded(f"sensor-{node.sensor_id}",
                                              lambda node=node, client=client: self._sensor_loop(node, client)))
        self.reader = self._client(read_key=channel.read_key)
        self.threads.append(self._guarded("supervisor", lambda: self._supervisor_loop(self.reader)))
        for thread in self.threads:
            thread.start()

    def _join_threads(self) -> None:
        self.stop_event.set()
        for thread in self.threads:
            thread.join(timeout=THREAD_JOIN_TIMEOUT)

    def stop(self) -> None:
        if self._stopped:
            return
        self._stopped = True
        self._join_threads()
        for client in self.clients:
            client.close()
        if self.server:
            self.server.stop()

    # ------------------------------------------------------------------
    # Collection
    # ------------------------------------------------------------------

    def _drain(self, record: TickRecord) -> None:
        while True:
            try:
                kind, payload = self.events.get_nowait()
            except queue.Empty:
                return
            if kind == PUBLISH_EVENT:
                self._note_published(payload)
                record.count(payload)
                continue
            record.polled += 1
            record.entry_id = payload.cause_entry_id
            record.decode_errors += payload.decode_errors
            latency = command_latency(payload, self.clock.start)
            if latency is not None:
                record.latency = latency

    def _late_outcomes(self) -> List[PublishOutcome]:
        outcomes = []
        while True:
            try:
                kind, payload = self.events.get_nowait()
            except queue.Empty:
                return outcomes
            if kind == PUBLISH_EVENT:
                self._note_published(payload)
                outcomes.append(payload)

    def _note_published(self, outcome: PublishOutcome) -> None:
        if outcome.status == PublishStatus.PUBLISHED and outcome.entry_id is not None:
            self.published_ids.add(outcome.entry_id)

    def reconcile_feed(self) -> List[int]:
        """
        Read the run's entries back from the channel feed.

        Returns:
            Entry ids acknowledged to a sensor but missing from the feed
        """
        if not self.published_ids:
            self.unconfirmed = []
            return self.unconfirmed
        try:
            feed = self.reader.fetch_feed(results=len(self.published_ids))
        except ChannelError as e:
            logger.warning(f"Could not read back the channel feed: {e}")
            self.unconfirmed = sorted(self.published_ids)
            return self.unconfirmed
        self.unconfirmed = sorted(self.published_ids - {entry.entry_id for entry in feed})
        if self.unconfirmed:
            logger.warning(f"{len(self.unconfirmed)} acknowledged entries are missing from the channel feed: "
                           f"{self.unconfirmed}")
        else:
            logger.debug(f"All {len(self.published_ids)} published entries found in the channel feed")
        return self.unconfirmed

    def collect(self) -> RunMetrics:
        """Record one row per tick until the scenario duration has elapsed."""
        spec = self.spec
        recorder = RunRecorder(spec, RunMode.REALTIME)
        robot = RobotState()
        command: Optional[SupervisorCommand] = None

        for index in range(spec.n_ticks):
            t = spec.tick_time(index)
            self.clock.wait_until(self.clock.start + t)
            if self.errors:
                raise RunFaultError(f"Real-time run aborted at {t:.3f}s: {self.errors[0]}", self.errors)
            obj = spec.object.state_at(t)
            record = TickRecord(t=t, true_range=obj.range_from_robot_base, bearing=obj.bearing)
            self._drain(record)

            received = self.mailbox.take()
            if received is not None:
                command = received
            if command is not None:
                robot = apply_command(robot, command, spec.robot, spec.tick)
                record.mode = command.mode
                record.override = command.override
            robot = advance(robot, spec.tick, spec.robot)
            record.robot_speed = robot.actual_speed
            recorder.record(record)

        self._join_threads()
        if self.errors:
            raise RunFaultError(f"Real-time run aborted: {self.errors[0]}", self.errors)
        recorder.fold_late(self._late_outcomes())
        self.reconcile_feed()
        self.stop()
        return recorder.finish()


def run_realtime(spec: ScenarioSpec, endpoint: Optional[str] = None) -> RunMetrics:
    """
    Run a scenario on wall-clock time over HTTP.

    Args:
        spec: Validated scenario
        endpoint: Existing broker hosting the scenario's channel; a private broker is started when None

    Raises:
        BrokerStartError: The private broker could not be started
        RunFaultError: A sensor or supervisor thread failed
    """
    logger.info(f"Real-time run of '{spec.name}' for {spec.duration}s")
    run = RealtimeRun(spec, endpoint)
    try:
        run.start()
        metrics = run.collect()
    finally:
        run.stop()
    logger.info(f"Real-time run of '{spec.name}' finished: p95 latency {metrics.latency.p95}")
    return metrics
