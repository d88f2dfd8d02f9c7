import math
import random

import pytest

from core.enums import SupervisorMode, Zone
from core.exceptions import InvalidArgumentError
from models.readings import RangeReading, SensorPlacement, StalenessPolicy, ZoneThresholds
from processors.safety_core import classify_zone, fuse, is_stale, quantize_range, speed_override

pytestmark = pytest.mark.unit

ZONES = ZoneThresholds(d_stop=0.5, d_slow=2.0)


def circular_difference(a, b):
    difference = abs(a - b) % 360.0
    return min(difference, 360.0 - difference)


class TestQuantizeRange:

    def test_random_distances_stay_within_half_a_quantum(self):
        rng = random.Random(20240501)
        for _ in range(100_000):
            distance = rng.uniform(0.0, 5.0)
            reading = quantize_range(distance, 0.01, 5.0)
            assert reading.is_in_range
            assert abs(reading.distance - distance) <= 0.005 + 1e-9
            steps = reading.distance / 0.01
            assert abs(steps - round(steps)) < 1e-6

    def test_ties_round_away_from_zero(self):
        assert quantize_range(0.005, 0.01, 5.0).distance == pytest.approx(0.01)
        assert quantize_range(1.235, 0.01, 5.0).distance == pytest.approx(1.24)

    def test_max_range_is_in_range(self):
        assert quantize_range(5.0, 0.01, 5.0) == RangeReading.in_range(5.0)

    def test_beyond_max_range_is_out_of_range(self):
        assert quantize_range(5.0001, 0.01, 5.0) == RangeReading.out_of_range()

    def test_rounding_above_max_range_is_floored_onto_the_grid(self):
        reading = quantize_range(4.995, 0.01, 4.995)
        assert reading.distance == pytest.approx(4.99)

    def test_zero_distance(self):
        assert quantize_range(0.0, 0.01, 5.0).distance == 0.0

    @pytest.mark.parametrize("distance, quantum, max_range", [
        (-0.01, 0.01, 5.0),
        (float("nan"), 0.01, 5.0),
        (1.0, 0.0, 5.0),
        (1.0, 0.01, -1.0),
    ])
    def test_invalid_inputs_are_rejected(self, distance, quantum, max_range):
        with pytest.raises(InvalidArgumentError):
            quantize_range(distance, quantum, max_range)


class TestZonesAndSpeedLaw:

    @pytest.mark.parametrize("distance, zone", [
        (0.0, Zone.STOP),
        (0.5, Zone.STOP),
        (0.51, Zone.SLOW),
        (1.99, Zone.SLOW),
        (2.0, Zone.CLEAR),
        (4.5, Zone.CLEAR),
    ])
    def test_classify_zone_boundaries(self, distance, zone):
        assert classify_zone(RangeReading.in_range(distance), ZONES) == zone

    def test_zones_order_by_distance(self):
        assert sorted([Zone.CLEAR, Zone.STOP, Zone.SLOW]) == [Zone.STOP, Zone.SLOW, Zone.CLEAR]
        assert min(Zone.SLOW, Zone.STOP) == Zone.STOP

    def test_out_of_range_is_clear_at_full_speed(self):
        assert classify_zone(RangeReading.out_of_range(), ZONES) == Zone.CLEAR
        assert speed_override(RangeReading.out_of_range(), ZONES) == 1.0

    def test_speed_law_midpoint(self):
        assert speed_override(RangeReading.in_range(1.25), ZONES) == pytest.approx(0.5)

    def test_random_speed_law_properties(self):
        rng = random.Random(7)
        for _ in range(10_000):
            d_stop = rng.uniform(0.05, 2.0)
            d_slow = d_stop + rng.uniform(0.01, 3.0)
            zones = ZoneThresholds(d_stop, d_slow)
            near, far = sorted(rng.uniform(0.0, 6.0) for _ in range(2))
            low = speed_override(RangeReading.in_range(near), zones)
            high = speed_override(RangeReading.in_range(far), zones)
            assert 0.0 <= low <= high <= 1.0
            assert speed_override(RangeReading.in_range(d_stop), zones) == 0.0
            assert speed_override(RangeReading.in_range(d_slow), zones) == 1.0

    def test_zero_override_exactly_in_stop_zone(self):
        for distance in (0.0, 0.25, 0.5):
            reading = RangeReading.in_range(distance)
            assert speed_override(reading, ZONES) == 0.0
            assert SupervisorMode.from_zone(classify_zone(reading, ZONES)) == SupervisorMode.STOP

    @pytest.mark.parametrize("d_stop, d_slow", [(2.0, 2.0), (2.0, 0.5), (0.0, 1.0)])
    def test_invalid_thresholds_are_rejected(self, d_stop, d_slow):
        with pytest.raises(InvalidArgumentError):
            speed_override(RangeReading.in_range(1.0), ZoneThresholds(d_stop, d_slow))


class TestFuse:

    def test_min_distance_and_weighted_bearing(self):
        readings = [
            (SensorPlacement(1, 0.0), RangeReading.in_range(1.0)),
            (SensorPlacement(2, 90.0), RangeReading.in_range(1.0)),
            (SensorPlacement(3, 180.0), RangeReading.out_of_range()),
        ]
        estimate = fuse(readings, 5.0)
        assert estimate.min_distance.distance == 1.0
        assert estimate.approach_bearing == pytest.approx(45.0)

    def test_nearer_sensor_pulls_the_bearing(self):
        readings = [
            (SensorPlacement(1, 0.0), RangeReading.in_range(0.5)),
            (SensorPlacement(2, 90.0), RangeReading.in_range(4.0)),
        ]
        assert fuse(readings, 5.0).approach_bearing < 45.0

    def test_all_out_of_range(self):
        readings = [(SensorPlacement(1, 0.0), RangeReading.out_of_range())]
        estimate = fuse(readings, 5.0)
        assert not estimate.min_distance.is_in_range
        assert estimate.approach_bearing is None

    def test_cancelling_vectors_fall_back_to_lowest_sensor_id(self):
        readings = [
            (SensorPlacement(2, 0.0), RangeReading.in_range(1.0)),
            (SensorPlacement(1, 180.0), RangeReading.in_range(1.0)),
        ]
        assert fuse(readings, 5.0).approach_bearing == 180.0

    def test_zero_weights_fall_back_to_lowest_sensor_id(self):
        readings = [
            (SensorPlacement(4, 270.0), RangeReading.in_range(5.0)),
            (SensorPlacement(3, 90.0), RangeReading.in_range(5.0)),
        ]
        assert fuse(readings, 5.0).approach_bearing == 90.0

    def test_rotating_the_fence_rotates_the_bearing(self):
        rng = random.Random(99)
        for _ in range(500):
            count = rng.randint(1, 6)
            bearings = [rng.uniform(0.0, 359.0) for _ in range(count)]
            distances = [rng.uniform(0.0, 4.5) for _ in range(count)]
            delta = rng.uniform(0.0, 360.0)
            base = [(SensorPlacement(i + 1, b), RangeReading.in_range(d))
                    for i, (b, d) in enumerate(zip(bearings, distances))]
            rotated = [(SensorPlacement(i + 1, (b + delta) % 360.0), RangeReading.in_range(d))
                       for i, (b, d) in enumerate(zip(bearings, distances))]
            before = fuse(base, 5.0)
            after = fuse(rotated, 5.0)
            assert after.min_distance == before.min_distance
            assert 0.0 <= after.approach_bearing < 360.0
            assert circular_difference(after.approach_bearing, before.approach_bearing + delta) < 1e-9

    def test_empty_and_duplicate_inputs_are_rejected(self):
        with pytest.raises(InvalidArgumentError):
            fuse([], 5.0)
        duplicate = [(SensorPlacement(1, 0.0), RangeReading.in_range(1.0))] * 2
        with pytest.raises(InvalidArgumentError):
            fuse(duplicate, 5.0)


class TestIsStale:

    def test_age_at_the_limit_is_fresh(self):
        policy = StalenessPolicy(3.0)
        assert is_stale(10.0, 13.0, policy) is False
        assert is_stale(10.0, 13.01, policy) is True

    def test_future_sample_is_rejected(self):
        with pytest.raises(InvalidArgumentError):
            is_stale(10.0, 9.0, StalenessPolicy(3.0))

    def test_policy_must_be_positive(self):
        with pytest.raises(InvalidArgumentError):
            StalenessPolicy(0.0)

    def test_infinite_age_is_stale(self):
        assert is_stale(0.0, math.inf, StalenessPolicy(1.0))
