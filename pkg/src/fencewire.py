"""
fencewire command line entry point.

    fencewire run --scenario scenarios/canonical_approach.json
    fencewire broker --config broker.json
    fencewire replay --csv runs/canonical_approach/run.csv
    fencewire validate --scenario scenarios/fence_four_sensors.json
"""

import os
import sys
from typing import List, Optional

from ciot.app import create_broker_app
from ciot.broker import ChannelBroker
from ciot.server import BrokerServer
from core.config import BrokerConfig
from core.constants import (
    CURRENT_VERSION, DEFAULT_RUNS_DIR, EXIT_ACCEPTANCE_VIOLATION, EXIT_OK, EXIT_RUNTIME_FAULT, EXIT_VALIDATION_ERROR,
    MIN_PYTHON_MAJOR, MIN_PYTHON_MINOR
)
from core.enums import RunMode
from core.exceptions import ConfigurationError, FencewireException, InvalidArgumentError, SchemaError
from logging_config import get_logger, setup_logging
from models import arguments
from models.scenario import load_scenario
from services.lockstep_runner import run_lockstep
from services.realtime_runner import run_realtime
from services.report_service import SUMMARY_JSON, check_acceptance, emit_report, replay, summary_json

logger = get_logger(__name__)


def run_command(args) -> int:
    spec = load_scenario(args.scenario)
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    mode = RunMode(args.mode)
    out_dir = args.out or os.path.join(DEFAULT_RUNS_DIR, spec.name)

    if mode == RunMode.LOCKSTEP:
        metrics = run_lockstep(spec)
    else:
        metrics = run_realtime(spec, args.endpoint)
    emit_report(metrics, out_dir)

    violations = check_acceptance(spec, metrics, mode)
    for violation in violations:
        logger.error(f"Acceptance bound violated: {violation}")
    print(summary_json(metrics.summary), end="")
    return EXIT_ACCEPTANCE_VIOLATION if violations else EXIT_OK


def broker_command(args) -> int:
    config = BrokerConfig(config_path=args.config)
    config.load()
    port = args.port if args.port is not None else config.port
    broker = ChannelBroker(config.to_channels(), data_dir=config.get_data_dir())
    server = BrokerServer(create_broker_app(broker), config.host, port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        logger.info("Broker stopped")
    return EXIT_OK


def replay_command(args) -> int:
    metrics = replay(args.csv)
    summary = summary_json(metrics.summary)
    summary_path = os.path.join(os.path.dirname(os.path.abspath(args.csv)), SUMMARY_JSON)
    try:
        with open(summary_path, "w", encoding="utf-8", newline="\n") as summary_file:
            summary_file.write(summary)
    except OSError as e:
        logger.warning(f"Could not rewrite {summary_path}: {e}")
    print(summary, end="")
    return EXIT_OK


def validate_command(args) -> int:
    spec = load_scenario(args.scenario)
    logger.info(f"Scenario '{spec.name}' is valid: {spec.n_ticks} ticks, sensors {spec.sensor_ids}")
    return EXIT_OK


COMMANDS = {
    "run": run_command,
    "broker": broker_command,
    "replay": replay_command,
    "validate": validate_command,
}


def main(argv: Optional[List[str]] = None) -> int:
    if sys.version_info < (MIN_PYTHON_MAJOR, MIN_PYTHON_MINOR):
        sys.stderr.write(f"fencewire needs Python {MIN_PYTHON_MAJOR}.{MIN_PYTHON_MINOR} or newer\n")
        return EXIT_RUNTIME_FAULT

    args = arguments.parse_arguments(argv)
    setup_logging(debug=args.debug, log_dir=args.logs)
    logger.debug(f"fencewire {CURRENT_VERSION}, command line: {args}")

    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, InvalidArgumentError, SchemaError) as e:
        logger.error(str(e))
        return EXIT_VALIDATION_ERROR
    except FencewireException as e:
        logger.error(f"Run failed: {e}")
        return EXIT_RUNTIME_FAULT
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return EXIT_RUNTIME_FAULT


if __name__ == "__main__":
    sys.exit(main())
