import pytest

from edt_lab.models import PacketSpec, PrimaryTrafficModel, SensingMode


@pytest.fixture
def base_model():
    return PrimaryTrafficModel(lam=3.0, mu=2.0)


@pytest.fixture
def long_packet():
    return PacketSpec(t_tr=4.0)


@pytest.fixture
def half_slot_mode():
    return SensingMode.periodic(0.5)


@pytest.fixture
def queue_model():
    return PrimaryTrafficModel(lam=10.0, mu=6.0)


@pytest.fixture(autouse=True)
def _quiet_threads(monkeypatch):
    monkeypatch.setenv("EDT_LAB_THREADS", "2")
    monkeypatch.setenv("EDT_LAB_LOG_LEVEL", "WARNING")
