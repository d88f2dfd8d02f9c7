"""
Speed-scalable robot arm model and the safety scoring of a run.
"""

import math
from dataclasses import replace
from typing import Sequence, Tuple

from core.constants import SLEW_SNAP_TOLERANCE
from core.exceptions import InvalidArgumentError
from models.readings import ZoneThresholds
from models.robot import RobotConfig, RobotState, SafetyOutcome
from models.sensor import ObjectState
from models.supervisor import SupervisorCommand


def apply_command(state: RobotState, command: SupervisorCommand, config: RobotConfig, dt: float) -> RobotState:
    """
    Move the arm's speed toward nominal_speed * override.

    Without a decel_limit the target is reached immediately. With one, the
    speed changes by at most decel_limit * dt per call, in either direction.
    """
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    target = config.nominal_speed * command.override
    if config.decel_limit is None:
        speed = target
    else:
        step = config.decel_limit * dt
        difference = target - state.actual_speed
        if abs(difference) <= step + SLEW_SNAP_TOLERANCE:
            speed = target
        else:
            speed = state.actual_speed + math.copysign(step, difference)
    speed = min(max(speed, 0.0), config.nominal_speed)
    return replace(state, actual_speed=speed, applied_override=command.override)


def advance(state: RobotState, dt: float, config: RobotConfig) -> RobotState:
    """Move along the cyclic path at the current speed; phase wraps at 1."""
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if state.actual_speed == 0:
        return state
    phase = (state.path_phase + state.actual_speed * dt / config.path_length) % 1.0
    return replace(state, path_phase=phase)


def score_safety(trace: Sequence[Tuple[ObjectState, RobotState]], config: RobotConfig,
                 zones: ZoneThresholds) -> SafetyOutcome:
    """
    Aggregate per-tick object and robot states into a SafetyOutcome.

    Raises:
        InvalidArgumentError: On an empty trace
    """
    if not trace:
        raise InvalidArgumentError("score_safety() needs at least one tick")

    min_clearance = math.inf
    violation_ticks = 0
    first_inside = None
    stopped_inside = True
    for index, (obj, robot) in enumerate(trace):
        distance = obj.range_from_robot_base
        min_clearance = min(min_clearance, distance - config.envelope_radius)
        moving = robot.actual_speed > 0
        if distance <= config.envelope_radius and moving:
            violation_ticks += 1
        if distance <= zones.d_stop:
            if first_inside is None:
                first_inside = index
            if moving:
                stopped_inside = False

    return SafetyOutcome(
        min_object_clearance=min_clearance,
        stop_achieved_before_d_stop=stopped_inside,
        violation_ticks=violation_ticks,
        first_inside_d_stop_tick=first_inside,
    )
