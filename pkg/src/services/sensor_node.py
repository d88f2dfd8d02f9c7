"""
Simulated ultrasonic proximity nodes.

A node samples the object's distance, adds Gaussian noise, quantizes the
result and writes it, with the precise sample time, to its channel slot.
Every node owns a random stream derived from (seed, sensor_id); each tick
draws the dropout decision and then the noise, whatever the outcome, so the
stream never depends on what happened earlier in the run.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Union

import numpy as np

from ciot.client import ChannelClient
from ciot.wire import sensor_update_fields
from core.enums import PublishStatus
from core.exceptions import TransportError
from logging_config import get_logger
from models.readings import RangeReading, SensorPlacement
from models.sensor import ObjectState, SensorNodeConfig
from processors.safety_core import quantize_range

logger = get_logger(__name__)


@dataclass(frozen=True)
class PendingWrite:
    """A sample that has been taken and is on its way to the broker."""

    sensor_id: int
    slot: int
    reading: RangeReading
    sample_time: float
    fields: Dict[int, str] = field(default_factory=dict)


@dataclass(frozen=True)
class PublishOutcome:
    """
    What became of one sample.

    Attributes:
        status: Published, dropped, rate limited or suppressed
        sensor_id: Node that took the sample
        sample_time: Seconds since scenario start
        entry_id: Broker entry id when published
        error: The sample was lost to a transport failure or a blackout
        value: Field string that was sent, if any
    """

    status: PublishStatus
    sensor_id: int
    sample_time: float
    entry_id: Optional[int] = None
    error: bool = False
    value: Optional[str] = None


def make_rng(seed: int, sensor_id: int) -> np.random.Generator:
    """Independent, reproducible stream for one node of one run."""
    return np.random.default_rng([seed, sensor_id])


def true_distance(obj: ObjectState, placement: SensorPlacement) -> float:
    """Planar distance between the object and the sensor, both given in polar form about the robot base."""
    object_angle = math.radians(obj.bearing)
    sensor_angle = math.radians(placement.bearing)
    dx = obj.range_from_robot_base * math.cos(object_angle) - placement.mount_radius * math.cos(sensor_angle)
    dy = obj.range_from_robot_base * math.sin(object_angle) - placement.mount_radius * math.sin(sensor_angle)
    return math.hypot(dx, dy)


def sample(node: SensorNodeConfig, obj: ObjectState, rng: np.random.Generator) -> RangeReading:
    """One noisy, quantized range measurement. Draws exactly one normal variate."""
    noise = float(rng.normal(0.0, node.noise_sigma))
    return quantize_range(max(0.0, true_distance(obj, node.placement) + noise), node.quantum, node.max_range)


def prepare_write(node: SensorNodeConfig, obj: ObjectState, now: float, rng: np.random.Generator, slot: int,
                  last_sent: Optional[RangeReading] = None) -> Union[PendingWrite, PublishOutcome]:
    """
    Take a sample and decide whether it leaves the node.

    Returns:
        A PendingWrite to deliver, or the final PublishOutcome for a dropped or suppressed sample
    """
    dropped = float(rng.random()) < node.dropout_prob
    reading = sample(node, obj, rng)
    if dropped:
        return PublishOutcome(PublishStatus.DROPPED, node.sensor_id, now)
    if node.suppress_unchanged and last_sent == reading:
        return PublishOutcome(PublishStatus.SUPPRESSED, node.sensor_id, now)
    return PendingWrite(
        sensor_id=node.sensor_id,
        slot=slot,
        reading=reading,
        sample_time=now,
        fields=sensor_update_fields(slot, reading, node.quantum, now),
    )


def deliver_write(pending: PendingWrite, client: ChannelClient, blackout: bool = False) -> PublishOutcome:
    """Hand a pending write to the channel and report the broker's answer."""
    value = pending.fields[pending.slot]
    if blackout:
        logger.debug(f"Sensor {pending.sensor_id}: write at {pending.sample_time:.3f}s lost to blackout")
        return PublishOutcome(PublishStatus.DROPPED, pending.sensor_id, pending.sample_time, error=True)
    try:
        result = client.publish(pending.fields)
    except TransportError as e:
        logger.warning(f"Sensor {pending.sensor_id}: publish failed: {e}")
        return PublishOutcome(PublishStatus.DROPPED, pending.sensor_id, pending.sample_time, error=True)
    if result.rejected:
        return PublishOutcome(PublishStatus.RATE_LIMITED, pending.sensor_id, pending.sample_time, value=value)
    return PublishOutcome(PublishStatus.PUBLISHED, pending.sensor_id, pending.sample_time,
                          entry_id=result.entry_id, value=value)


def node_tick(node: SensorNodeConfig, obj: ObjectState, client: ChannelClient, now: float,
              rng: np.random.Generator, slot: int = 1) -> PublishOutcome:
    """
    Sample and publish in one step.

    uplink_delay is not applied here; callers that model it hold the
    PendingWrite from prepare_write and deliver it later.
    """
    result = prepare_write(node, obj, now, rng, slot)
    if isinstance(result, PublishOutcome):
        return result
    return deliver_write(result, client)


class SensorNode:
    """
    A node with its own random stream and suppression memory.

    Attributes:
        config: Node parameters
        slot: Channel field slot the node writes
        rng: The node's random stream
    """

    def __init__(self, config: SensorNodeConfig, slot: int, seed: int) -> None:
        self.config = config
        self.slot = slot
        self.rng = make_rng(seed, config.sensor_id)
        self.last_sent: Optional[RangeReading] = None

    @property
    def sensor_id(self) -> int:
        return self.config.sensor_id

    def is_due(self, tick_index: int, tick: float) -> bool:
        offset = int(round(self.config.phase_offset / tick))
        every = int(round(self.config.write_interval / tick))
        return tick_index >= offset and (tick_index - offset) % every == 0

    def prepare(self, obj: ObjectState, sample_time: float) -> Union[PendingWrite, PublishOutcome]:
        result = prepare_write(self.config, obj, sample_time, self.rng, self.slot, self.last_sent)
        if isinstance(result, PendingWrite):
            self.last_sent = result.reading
        return result

    def deliver(self, pending: PendingWrite, client: ChannelClient, blackout: bool = False) -> PublishOutcome:
        return deliver_write(pending, client, blackout)
