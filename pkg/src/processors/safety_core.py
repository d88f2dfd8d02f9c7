"""
Pure safety logic: distance quantization, zone classification, the proportional
speed law, multi-sensor fusion and the staleness check.

Nothing here holds state; every function is safe to call from any thread.
"""

import math
from decimal import Decimal, ROUND_FLOOR, ROUND_HALF_UP
from typing import List, Sequence, Tuple

from core.constants import FUSION_DEGENERACY_EPSILON
from core.enums import Zone
from core.exceptions import InvalidArgumentError
from models.readings import FusedEstimate, RangeReading, SensorPlacement, StalenessPolicy, ZoneThresholds


def quantize_range(true_distance: float, quantum: float, max_range: float) -> RangeReading:
    """
    Quantize a true distance the way the ultrasonic node reports it.

    Rounds to the nearest multiple of quantum, ties away from zero. Distances
    beyond max_range are OutOfRange. A rounded value that would land above
    max_range is floored back onto the grid.

    Args:
        true_distance: Distance in meters, >= 0
        quantum: Reporting resolution in meters, > 0
        max_range: Maximum sensing range in meters, > 0

    Returns:
        The quantized RangeReading

    Raises:
        InvalidArgumentError: On a negative distance or non-positive quantum/max_range
    """
    if quantum <= 0 or max_range <= 0:
        raise InvalidArgumentError(f"quantum and max_range must be positive, got {quantum}, {max_range}")
    if true_distance < 0 or math.isnan(true_distance):
        raise InvalidArgumentError(f"true_distance must be non-negative, got {true_distance}")
    if true_distance > max_range:
        return RangeReading.out_of_range()

    step = Decimal(repr(quantum))
    steps = (Decimal(repr(true_distance)) / step).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    value = steps * step
    limit = Decimal(repr(max_range))
    if value > limit:
        value = (limit / step).quantize(Decimal(1), rounding=ROUND_FLOOR) * step
    return RangeReading.in_range(float(value))


def classify_zone(reading: RangeReading, zones: ZoneThresholds) -> Zone:
    """Map a reading onto STOP / SLOW / CLEAR."""
    zones.validate()
    if not reading.is_in_range or reading.distance >= zones.d_slow:
        return Zone.CLEAR
    if reading.distance <= zones.d_stop:
        return Zone.STOP
    return Zone.SLOW


def speed_override(reading: RangeReading, zones: ZoneThresholds) -> float:
    """
    Proportional speed law: 0 at or inside d_stop, 1 at or beyond d_slow,
    linear in between.
    """
    zones.validate()
    if not reading.is_in_range or reading.distance >= zones.d_slow:
        return 1.0
    if reading.distance <= zones.d_stop:
        return 0.0
    fraction = (reading.distance - zones.d_stop) / (zones.d_slow - zones.d_stop)
    return min(1.0, max(0.0, fraction))


def _normalize_bearing(degrees: float) -> float:
    bearing = degrees % 360.0
    # -1e-15 % 360.0 rounds to 360.0
    return 0.0 if bearing >= 360.0 else bearing


def fuse(readings: Sequence[Tuple[SensorPlacement, RangeReading]], max_range: float) -> FusedEstimate:
    """
    Combine per-sensor readings into the nearest distance and an approach bearing.

    The bearing is the circular mean of the in-range sensors' bearings, each
    weighted by max(0, max_range - distance). When the weighted vectors cancel
    (or every weight is zero) the bearing of the lowest in-range sensor_id is used.

    Raises:
        InvalidArgumentError: On an empty list or duplicate sensor ids
    """
    if not readings:
        raise InvalidArgumentError("fuse() needs at least one reading")
    sensor_ids = [placement.sensor_id for placement, _ in readings]
    if len(set(sensor_ids)) != len(sensor_ids):
        raise InvalidArgumentError(f"Duplicate sensor ids in fusion input: {sorted(sensor_ids)}")

    in_range: List[Tuple[SensorPlacement, float]] = [
        (placement, reading.distance) for placement, reading in readings if reading.is_in_range
    ]
    if not in_range:
        return FusedEstimate(min_distance=RangeReading.out_of_range(), approach_bearing=None)

    nearest = min(distance for _, distance in in_range)

    x = y = 0.0
    for placement, distance in in_range:
        weight = max(0.0, max_range - distance)
        radians = math.radians(placement.bearing)
        x += weight * math.cos(radians)
        y += weight * math.sin(radians)

    if math.hypot(x, y) < FUSION_DEGENERACY_EPSILON:
        bearing = min(in_range, key=lambda item: item[0].sensor_id)[0].bearing
    else:
        bearing = _normalize_bearing(math.degrees(math.atan2(y, x)))

    return FusedEstimate(min_distance=RangeReading.in_range(nearest), approach_bearing=bearing)


def is_stale(sample_time: float, now: float, policy: StalenessPolicy) -> bool:
    """
    True when the sample is older than the policy allows.

    Raises:
        InvalidArgumentError: If now precedes sample_time; skew is resolved by the caller
    """
    if now < sample_time:
        raise InvalidArgumentError(f"now ({now}) precedes sample_time ({sample_time})")
    return (now - sample_time) > policy.stale_after

