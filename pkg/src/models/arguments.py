import argparse
from typing import List, Optional

from core.constants import APP_NAME, CURRENT_VERSION


# Parse the command line arguments.
# ---------------------------------------------------------
# run --scenario FILE    Run a scenario and write run.csv, summary.json and plots
#     --mode             lockstep (default, deterministic) or realtime (wall clock over HTTP)
#     --seed             Override the scenario seed
#     --out              Output directory (default: runs/<scenario name>)
#     --endpoint         Use a running broker instead of a private one (realtime only)
# broker                 Serve the HTTP broker in the foreground
#     --config           Broker config file (default: broker.json)
#     --port             Override the configured port
# replay --csv FILE      Recompute summary.json from a stored run.csv
# validate --scenario    Check a scenario file without running it
# --debug                Spits out debugging information
# ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=APP_NAME, description="Proximity fence safety supervisor over a cloud IoT channel")
    parser.add_argument("--version", action="version", version=f"%(prog)s {CURRENT_VERSION}")
    parser.add_argument("--debug", action='store_true',
                        help="Spits out debugging information")
    parser.add_argument("--logs", type=str, default=None,
                        help="Also write a rotating log file to this directory")

    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run a scenario")
    run.add_argument("--scenario", required=True, help="Scenario JSON file")
    run.add_argument("--mode", choices=["lockstep", "realtime"], default="lockstep",
                     help="lockstep: simulated time; realtime: wall clock over HTTP")
    run.add_argument("--seed", type=int, default=None, help="Override the scenario seed")
    run.add_argument("--out", type=str, default=None,
                     help="Output directory (default: runs/<scenario name>)")
    run.add_argument("--endpoint", type=str, default=None,
                     help="Existing broker URL for realtime runs (default: start a private broker)")

    broker = commands.add_parser("broker", help="Serve the broker")
    broker.add_argument("--config", type=str, default=None,
                        help="Path to broker config file (default: broker.json)")
    broker.add_argument("--port", type=int, default=None, help="Override the configured port")

    replay = commands.add_parser("replay", help="Recompute the summary of a stored run")
    replay.add_argument("--csv", required=True, help="Path to run.csv")

    validate = commands.add_parser("validate", help="Validate a scenario file")
    validate.add_argument("--scenario", required=True, help="Scenario JSON file")

    return parser


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)
