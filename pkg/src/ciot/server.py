"""
Runs the broker Flask app on a Werkzeug server, either in the foreground
(`fencewire broker`) or on a background thread (real-time scenario runs).
"""

import errno
import socket
import threading
from typing import Optional

from flask import Flask
from werkzeug.serving import BaseWSGIServer, make_server

from core.exceptions import BrokerStartError, PortInUseError
from logging_config import get_logger

logger = get_logger(__name__)


class BrokerServer:
    """Owns one bound Werkzeug server and the thread serving it."""

    def __init__(self, app: Flask, host: str, port: int) -> None:
        """
        Bind the server immediately so port problems surface before anything else starts.

        Args:
            app: Broker Flask application
            host: Interface to bind
            port: TCP port, 0 for an ephemeral port

        Raises:
            PortInUseError: The port is already bound
            BrokerStartError: Any other bind failure
        """
        self.host = host
        try:
            self._server: BaseWSGIServer = make_server(host, port, app, threaded=True)
        except (OSError, SystemExit) as e:
            # Werkzeug exits instead of raising on bind failures, so test-bind the port to tell them apart.
            raise _bind_failure(host, port) from e
        self.port: int = self._server.server_port
        self._thread: Optional[threading.Thread] = None

    @property
    def endpoint(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> bool:
        """
        Serve on a daemon thread.

        Returns:
            True if started, False if already running
        """
        if self._thread is not None and self._thread.is_alive():
            return False
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True, name="broker")
        self._thread.start()
        logger.info(f"Broker listening on {self.endpoint}")
        return True

    def serve_forever(self) -> None:
        """Serve on the calling thread until interrupted."""
        logger.info(f"Broker listening on {self.endpoint}")
        try:
            self._server.serve_forever()
        finally:
            self._server.server_close()

    def stop(self) -> None:
        if self._thread is not None and self._thread.is_alive():
            self._server.shutdown()
            self._thread.join(timeout=2)
        self._server.server_close()


def _bind_failure(host: str, port: int) -> BrokerStartError:
    try:
        with socket.socket(socket.AF_INET6 if ":" in host else socket.AF_INET, socket.SOCK_STREAM) as sock:
            sock.bind((host, port))
    except OSError as e:
        if e.errno == errno.EADDRINUSE:
            return PortInUseError(f"Port {port} on {host} is already in use")
        return BrokerStartError(f"Could not bind broker to {host}:{port}: {e}")
    return BrokerStartError(f"Could not start broker on {host}:{port}")
