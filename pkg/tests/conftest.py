import pytest

from fsobridge.config import build_config


@pytest.fixture(scope="session")
def cfg():
    return build_config()


@pytest.fixture(scope="session")
def topology(cfg):
    return cfg.topology_model()


@pytest.fixture(scope="session")
def ofdm_cfg(cfg):
    return cfg.ofdm_config()
