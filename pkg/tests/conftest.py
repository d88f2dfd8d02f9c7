import copy
import os
import sys

import pytest

ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SRC_DIR = os.path.join(ROOT_DIR, "src")
if SRC_DIR not in sys.path:
    sys.path.insert(0, SRC_DIR)

SCENARIO_DIR = os.path.join(ROOT_DIR, "scenarios")

CANONICAL_SCENARIO = {
    "schema_version": 1,
    "name": "canonical",
    "duration": 12.0,
    "tick": 0.01,
    "seed": 7,
    "timing": {"write_interval": 1.0, "poll_interval": 0.25, "min_write_interval": 1.0},
    "zones": {"d_stop": 0.5, "d_slow": 2.0},
    "sensors": [{"sensor_id": 1, "bearing": 0.0, "mount_radius": 0.0, "noise_sigma": 0.0}],
    "object": {"range": 5.0, "bearing": 0.0, "radial_speed": -0.5},
    "robot": {"nominal_speed": 0.2, "envelope_radius": 0.33},
}


@pytest.fixture
def scenario_data():
    """A fresh copy of the canonical approach document, safe to mutate."""
    return copy.deepcopy(CANONICAL_SCENARIO)


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR
