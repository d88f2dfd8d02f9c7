import json

import pytest

from core.config import BrokerConfig
from core.constants import DEFAULT_BROKER_PORT, DEFAULT_READ_KEY, DEFAULT_WRITE_KEY
from core.exceptions import ConfigLoadError, ConfigSaveError

pytestmark = pytest.mark.unit


def write_config(tmp_path, payload):
    path = tmp_path / "broker.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


@pytest.fixture
def config(tmp_path, monkeypatch):
    monkeypatch.delenv("FENCEWIRE_DATA_DIR", raising=False)
    cfg = BrokerConfig(config_path=str(tmp_path / "broker.json"))
    cfg.load()
    return cfg


class TestBrokerConfig:

    def test_missing_file_is_created_with_a_default_channel(self, tmp_path, config):
        assert (tmp_path / "broker.json").is_file()
        assert config.port == DEFAULT_BROKER_PORT
        (channel,) = config.to_channels()
        assert channel.channel_id == 1
        assert channel.write_key == DEFAULT_WRITE_KEY
        assert channel.read_key == DEFAULT_READ_KEY
        assert channel.field_names[8] == "sample time"

    def test_channels_are_parsed(self, tmp_path):
        cfg = BrokerConfig(config_path=write_config(tmp_path, {
            "host": "0.0.0.0",
            "port": 3100,
            "channels": [
                {"channel_id": 3, "write_key": "W3", "read_key": "R3", "min_write_interval": 15,
                 "field_names": {"1": "north"}},
                {"channel_id": 4, "write_key": "W4", "read_key": "R4"},
            ],
        }))
        cfg.load()
        first, second = cfg.to_channels()
        assert (cfg.host, cfg.port) == ("0.0.0.0", 3100)
        assert first.min_write_interval == 15.0
        assert first.field_names == {1: "north"}
        assert second.min_write_interval == 1.0

    @pytest.mark.parametrize("payload", [
        {"channels": []},
        {"channels": [{"channel_id": 1, "read_key": "R"}]},
        {"channels": [{"channel_id": 1, "write_key": "W", "read_key": "R", "field_names": {"9": "x"}}]},
        {"port": "not a port", "channels": [{"channel_id": 1, "write_key": "W", "read_key": "R"}]},
    ])
    def test_invalid_files_raise_config_load_error(self, tmp_path, payload):
        cfg = BrokerConfig(config_path=write_config(tmp_path, payload))
        with pytest.raises(ConfigLoadError):
            cfg.load()

    def test_malformed_json_raises_config_load_error(self, tmp_path):
        path = tmp_path / "broker.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigLoadError):
            BrokerConfig(config_path=str(path)).load()

    def test_save_round_trips(self, tmp_path, config):
        config.port = 3200
        config.channels.append({"channel_id": 2, "write_key": "W2", "read_key": "R2"})
        config.save()

        reloaded = BrokerConfig(config_path=config.path)
        reloaded.load()
        assert reloaded.port == 3200
        assert [channel.channel_id for channel in reloaded.to_channels()] == [1, 2]

    def test_create_writes_defaults_through_save(self, tmp_path, mocker):
        cfg = BrokerConfig(config_path=str(tmp_path / "nested" / "broker.json"))
        save = mocker.spy(cfg, "save")
        cfg.load()
        save.assert_called_once_with()
        stored = json.loads((tmp_path / "nested" / "broker.json").read_text(encoding="utf-8"))
        assert stored["port"] == DEFAULT_BROKER_PORT
        assert [channel["channel_id"] for channel in stored["channels"]] == [1]

    def test_save_failure_is_wrapped(self, tmp_path, config):
        config.path = str(tmp_path / "missing" / "dir" / "broker.json")
        with pytest.raises(ConfigSaveError):
            config.save()


class TestEnvironmentPrecedence:

    def test_config_path_from_environment(self, tmp_path, monkeypatch):
        path = write_config(tmp_path, {"port": 3300, "channels": [
            {"channel_id": 1, "write_key": "W", "read_key": "R"}]})
        monkeypatch.setenv("FENCEWIRE_BROKER_CONFIG", path)
        cfg = BrokerConfig()
        cfg.load()
        assert cfg.port == 3300

    def test_explicit_path_beats_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FENCEWIRE_BROKER_CONFIG", str(tmp_path / "other.json"))
        cfg = BrokerConfig(config_path=str(tmp_path / "broker.json"))
        assert cfg.path == str(tmp_path / "broker.json")

    def test_data_dir_environment_beats_file(self, config, monkeypatch):
        config.data_dir = "file-data"
        assert config.get_data_dir() == "file-data"
        monkeypatch.setenv("FENCEWIRE_DATA_DIR", "/var/fencewire")
        assert config.get_data_dir() == "/var/fencewire"

    def test_empty_data_dir_keeps_entries_in_memory(self, config):
        config.data_dir = ""
        assert config.get_data_dir() is None
