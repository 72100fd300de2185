import logging
import os

import pytest

from edt_lab import config
from edt_lab.errors import ConfigError


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("EDT_LAB_THREADS", "3")
    assert config.get_settings().threads == 3


@pytest.mark.parametrize("raw", ["zero", "0", "-2"])
def test_invalid_threads_rejected(monkeypatch, raw):
    monkeypatch.setenv("EDT_LAB_THREADS", raw)
    with pytest.raises(ConfigError):
        config.get_settings()


def test_threads_default_to_cpu_count(monkeypatch):
    monkeypatch.delenv("EDT_LAB_THREADS", raising=False)
    assert config.get_settings().threads >= 1


def test_dotenv_does_not_override_exported(tmp_path):
    env = tmp_path / ".env"
    env.write_text("EDT_LAB_THREADS=9\nEDT_LAB_DOTENV_MARKER=set\n", encoding="utf-8")
    try:
        assert config.load_dotenv_if_present(str(env))
        assert config.get_settings().threads == 2
        assert os.environ["EDT_LAB_DOTENV_MARKER"] == "set"
    finally:
        os.environ.pop("EDT_LAB_DOTENV_MARKER", None)


def test_missing_dotenv_is_fine(tmp_path):
    assert config.load_dotenv_if_present(str(tmp_path / "nothing.env")) is False


def test_read_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# half-slot periodic run\nLAMBDA=3\nmu = 2\ngrid-res=20\npsi_values=2, 5 10\n", encoding="utf-8")
    values = config.read_config_file(str(path))
    assert values == {"lambda": "3", "mu": "2", "grid_res": "20", "psi_values": "2, 5 10"}


def test_read_config_file_missing(tmp_path):
    with pytest.raises(ConfigError):
        config.read_config_file(str(tmp_path / "absent.cfg"))


def test_set_log_level():
    logger = config.get_logger("edt_lab.test_config")
    config.set_log_level("debug")
    assert logger.level == logging.DEBUG
    config.set_log_level("WARNING")
    assert logger.level == logging.WARNING
    with pytest.raises(ConfigError):
        config.set_log_level("chatty")
