"""
Broker configuration management.
"""

import json
import os
from typing import Any, Dict, List, Optional

from core.constants import (
    BROKER_CONFIG_ENV, DATA_DIR_ENV, DEFAULT_BROKER_CONFIG_PATH, DEFAULT_BROKER_HOST, DEFAULT_BROKER_PORT,
    DEFAULT_CHANNEL_ID, DEFAULT_DATA_DIR, DEFAULT_MIN_WRITE_INTERVAL, DEFAULT_READ_KEY, DEFAULT_WRITE_KEY,
    PRECISE_TIME_SLOT
)
from core.exceptions import ConfigCreationError, ConfigLoadError, ConfigSaveError, InvalidArgumentError
from logging_config import get_logger
from models.channel import ChannelConfig

logger = get_logger(__name__)


def default_channel() -> Dict[str, Any]:
    """The channel a freshly created config file declares."""
    return {
        "channel_id": DEFAULT_CHANNEL_ID,
        "name": "fence",
        "write_key": DEFAULT_WRITE_KEY,
        "read_key": DEFAULT_READ_KEY,
        "min_write_interval": DEFAULT_MIN_WRITE_INTERVAL,
        "field_names": {"1": "sensor 1 distance", str(PRECISE_TIME_SLOT): "sample time"},
    }


class BrokerConfig:
    """
    Manages the broker configuration stored in JSON format.

    Attributes:
        path: Path to the configuration file
        host: Interface the broker binds
        port: TCP port the broker listens on
        data_dir: Directory for per-channel entry logs; empty keeps entries in memory only
        channels: Raw channel declarations as stored in the file
    """

    def __init__(self, config_path: Optional[str] = None) -> None:
        self.path: str = config_path or os.environ.get(BROKER_CONFIG_ENV) or DEFAULT_BROKER_CONFIG_PATH
        self.host: str = DEFAULT_BROKER_HOST
        self.port: int = DEFAULT_BROKER_PORT
        self.data_dir: str = DEFAULT_DATA_DIR
        self.channels: List[Dict[str, Any]] = [default_channel()]

    def load(self) -> None:
        """Load the configuration from the JSON file, creating it first if missing."""
        logger.debug(f"Broker config path: {self.path}")
        if not os.path.isfile(self.path):
            logger.debug("Broker config file does not exist, calling create()")
            self.create()

        try:
            with open(self.path, "r", encoding="utf-8") as config_file:
                config = json.load(config_file)

            self.host = config.get("host", DEFAULT_BROKER_HOST) or DEFAULT_BROKER_HOST
            self.port = int(config.get("port", DEFAULT_BROKER_PORT))
            self.data_dir = config.get("data_dir", DEFAULT_DATA_DIR) or ""
            self.channels = config.get("channels", [])
            if not isinstance(self.channels, list) or not self.channels:
                raise ValueError("'channels' must be a non-empty list")
            self.to_channels()
        except Exception as e:
            raise ConfigLoadError(f"Failed to load broker config from {self.path}: {str(e)}") from e

    def create(self) -> None:
        """Create a new configuration file with one default channel."""
        if os.path.isfile(self.path):
            logger.debug("Broker config file already exists, skipping creation")
            return

        self.host = DEFAULT_BROKER_HOST
        self.port = DEFAULT_BROKER_PORT
        self.data_dir = DEFAULT_DATA_DIR
        self.channels = [default_channel()]
        try:
            parent_dir = os.path.dirname(self.path)
            if parent_dir and not os.path.isdir(parent_dir):
                os.makedirs(parent_dir, exist_ok=True)
            self.save()
            logger.info(f"Broker config file '{self.path}' created with default settings.")
        except Exception as e:
            logger.error(f"Failed to create broker config file at {self.path}", exc_info=True)
            raise ConfigCreationError(f"Failed to create broker config file at {self.path}: {str(e)}") from e

    def save(self) -> None:
        """Save the current configuration to the file."""
        config_json = {
            "host": self.host,
            "port": self.port,
            "data_dir": self.data_dir,
            "channels": self.channels,
        }
        try:
            with open(self.path, "w", encoding="utf-8") as config_file:
                json.dump(config_json, config_file, indent=4)
        except Exception as e:
            raise ConfigSaveError(f"Failed to save broker config to {self.path}: {str(e)}") from e

    def get_data_dir(self) -> Optional[str]:
        """Entry log directory, with FENCEWIRE_DATA_DIR taking precedence; None for memory only."""
        return os.environ.get(DATA_DIR_ENV, "").strip() or self.data_dir or None

    def to_channels(self) -> List[ChannelConfig]:
        """
        Build ChannelConfig objects from the stored declarations.

        Raises:
            InvalidArgumentError: On a missing key or an invalid value
        """
        channels = []
        for index, raw in enumerate(self.channels):
            try:
                channels.append(ChannelConfig(
                    channel_id=int(raw["channel_id"]),
                    write_key=str(raw["write_key"]),
                    read_key=str(raw["read_key"]),
                    min_write_interval=float(raw.get("min_write_interval", DEFAULT_MIN_WRITE_INTERVAL)),
                    field_names={int(slot): str(label) for slot, label in raw.get("field_names", {}).items()},
                    name=str(raw.get("name", "")),
                ))
            except KeyError as e:
                raise InvalidArgumentError(f"channels[{index}] is missing {e}") from e
            except (TypeError, ValueError) as e:
                raise InvalidArgumentError(f"channels[{index}]: {e}") from e
        return channels
