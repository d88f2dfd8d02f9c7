"""
Flask routes exposing a ChannelBroker over the ThingSpeak-compatible HTTP subset.

Routes:
- POST|GET /update                                  write one entry (form or query)
- GET /channels/<id>/feeds/last.json                newest entry
- GET /channels/<id>/feeds.json?results=N           newest N entries, ascending
- GET /channels/<id>/refined.json?window=N          moving average per field
"""

import time
from typing import Callable, Optional

from flask import Flask, Response, jsonify, request

from ciot.broker import ChannelBroker
from ciot.wire import channel_to_json, entry_to_json, parse_field_slots, refined_to_json
from core.constants import DEFAULT_FEED_RESULTS, DEFAULT_REFINE_WINDOW
from core.exceptions import AuthError, BadRequestError, NotFoundError
from logging_config import get_logger

logger = get_logger(__name__)


def _positive_int_arg(name: str, default: int) -> int:
    raw = request.args.get(name)
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise BadRequestError(f"'{name}' must be an integer, got '{raw}'") from None
    if value < 1:
        raise BadRequestError(f"'{name}' must be >= 1, got {value}")
    return value


def setup_routes(app: Flask, broker: ChannelBroker, clock: Callable[[], float] = time.time) -> None:
    """
    Register the channel routes and error handlers on a Flask app.

    Args:
        app: Flask application
        broker: Broker backing the routes
        clock: Epoch-seconds source stamped on writes
    """

    @app.errorhandler(AuthError)
    def handle_auth_error(error: AuthError):
        logger.warning(f"{request.method} {request.path}: {error}")
        return jsonify({"error": "unauthorized"}), 401

    @app.errorhandler(NotFoundError)
    def handle_not_found(error: NotFoundError):
        logger.debug(f"{request.method} {request.path}: {error}")
        return jsonify({"error": "not_found"}), 404

    @app.errorhandler(BadRequestError)
    def handle_bad_request(error: BadRequestError):
        logger.warning(f"{request.method} {request.path}: {error}")
        return jsonify({"error": "bad_request"}), 400

    @app.route("/update", methods=["GET", "POST"])
    def update():
        params = request.values
        channel = broker.channel_for_write_key(params.get("api_key"))
        fields = parse_field_slots(params)
        result = broker.write(channel.channel_id, params.get("api_key"), fields, clock())
        if result.rejected:
            logger.warning(f"Channel {channel.channel_id}: write rate limited")
        return Response(str(result.entry_id), status=200, mimetype="text/plain")

    @app.route("/channels/<int:channel_id>/feeds/last.json", methods=["GET"])
    def feeds_last(channel_id: int):
        entry = broker.read_last(channel_id, request.args.get("api_key"))
        if entry is None:
            return jsonify({"error": "empty"}), 404
        return jsonify(entry_to_json(entry))

    @app.route("/channels/<int:channel_id>/feeds.json", methods=["GET"])
    def feeds(channel_id: int):
        results = _positive_int_arg("results", DEFAULT_FEED_RESULTS)
        entries = broker.read_feed(channel_id, request.args.get("api_key"), results)
        return jsonify({
            "channel": channel_to_json(broker.channel(channel_id), broker.last_entry_id(channel_id)),
            "feeds": [entry_to_json(entry) for entry in entries],
        })

    @app.route("/channels/<int:channel_id>/refined.json", methods=["GET"])
    def refined(channel_id: int):
        window = _positive_int_arg("window", DEFAULT_REFINE_WINDOW)
        broker.check_read_key(channel_id, request.args.get("api_key"))
        return jsonify(refined_to_json(broker.refine(channel_id, window)))


def create_broker_app(broker: ChannelBroker, clock: Optional[Callable[[], float]] = None) -> Flask:
    """Build the Flask application serving `broker`."""
    app = Flask(__name__)
    app.json.sort_keys = True
    setup_routes(app, broker, clock or time.time)
    return app
