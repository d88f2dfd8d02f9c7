"""
Application-wide constants.
"""

import os

from core.__version__ import __version__

# Application metadata
APP_NAME = "fencewire"
CURRENT_VERSION = f"v{__version__}"

# Python version requirements
MIN_PYTHON_MAJOR = 3
MIN_PYTHON_MINOR = 10

# Environment
LOG_LEVEL_ENV = "FENCEWIRE_LOG"
BROKER_CONFIG_ENV = "FENCEWIRE_BROKER_CONFIG"
DATA_DIR_ENV = "FENCEWIRE_DATA_DIR"
RUNNING_IN_DOCKER = os.getenv("RUNNING_IN_DOCKER") == "1"

# File paths - environment-aware defaults
DEFAULT_BROKER_CONFIG_PATH = "/config/broker.json" if RUNNING_IN_DOCKER else "broker.json"
DEFAULT_DATA_DIR = "/data" if RUNNING_IN_DOCKER else "data"
DEFAULT_RUNS_DIR = "/runs" if RUNNING_IN_DOCKER else "runs"

# Broker
DEFAULT_BROKER_HOST = "127.0.0.1"
DEFAULT_BROKER_PORT = 3000
MAX_FIELD_SLOTS = 8
DEFAULT_MIN_WRITE_INTERVAL = 1.0  # seconds between accepted writes
RATE_LIMIT_TOLERANCE = 1e-6  # seconds
REALTIME_RATE_LIMIT_JITTER = 0.05  # seconds of request transit jitter the private real-time broker absorbs
REJECTED_ENTRY_ID = 0
DEFAULT_CHANNEL_ID = 1
DEFAULT_WRITE_KEY = "FENCEWIREWRITE01"
DEFAULT_READ_KEY = "FENCEWIREREAD001"
REQUEST_TIMEOUT_SECONDS = 2.0
DEFAULT_FEED_RESULTS = 100

# Channel slot layout
PRECISE_TIME_SLOT = 8
MAX_SENSORS_PER_CHANNEL = PRECISE_TIME_SLOT - 1
OUT_OF_RANGE_SENTINEL = "-1"
PRECISE_TIME_DECIMALS = 6

# Sensor defaults
DEFAULT_QUANTUM = 0.01  # meters
DEFAULT_MAX_RANGE = 5.0  # meters
DEFAULT_NOISE_SIGMA = 0.005  # meters
DEFAULT_WRITE_INTERVAL = 1.0  # seconds

# Zone defaults
DEFAULT_D_STOP = 0.5  # meters
DEFAULT_D_SLOW = 2.0  # meters

# Fusion
FUSION_DEGENERACY_EPSILON = 1e-9

# Supervisor defaults
DEFAULT_POLL_INTERVAL = 0.25  # seconds
STALE_AFTER_WRITE_MULTIPLE = 3
DEFAULT_STALE_AFTER = STALE_AFTER_WRITE_MULTIPLE * DEFAULT_WRITE_INTERVAL
DEFAULT_CLOCK_SKEW_GRACE = 0.5  # seconds
DEFAULT_TRANSPORT_GRACE = 1  # consecutive failures
DEFAULT_REFINE_WINDOW = 3

# Robot defaults
DEFAULT_NOMINAL_SPEED = 0.2  # m/s end-effector speed
DEFAULT_ENVELOPE_RADIUS = 0.33  # meters
DEFAULT_PATH_LENGTH = 0.4  # meters
SLEW_SNAP_TOLERANCE = 1e-12

# Harness
SCENARIO_SCHEMA_VERSION = 1
CSV_SCHEMA_VERSION = 1
DEFAULT_TICK = 0.01  # seconds
TICK_DIVISIBILITY_TOLERANCE = 1e-9
LATENCY_BOUND_MARGIN = 0.1  # seconds added to write_interval + poll_interval

# Exit codes
EXIT_OK = 0
EXIT_VALIDATION_ERROR = 2
EXIT_RUNTIME_FAULT = 3
EXIT_ACCEPTANCE_VIOLATION = 4
