"""
Shared fixtures: small oracle cities, a quickly trained model and fast run configurations
"""

import pytest

from src.core.citygen import generate_city, split
from src.core.genmodel import train_generative_model
from src.utils.debug import set_debug
from src.utils.run_config import (
    DataConfig, GppConfig, LinkStateConfig, OracleConfig, RunConfig, SnrMapConfig, VaeConfig,
)


@pytest.fixture(scope="session")
def oracle_cfg():
    return OracleConfig()


@pytest.fixture(scope="session")
def small_city(oracle_cfg):
    return generate_city(oracle_cfg, 600, seed=7)


@pytest.fixture(scope="session")
def small_split(small_city):
    return split(small_city, 0.75, seed=7)


@pytest.fixture(scope="session")
def small_model(small_split):
    train, _ = small_split
    return train_generative_model(
        train,
        LinkStateConfig(epochs=5, batch_size=50),
        VaeConfig(epochs=3, batch_size=50, learning_rate=1e-3),
        seed=3,
    )


@pytest.fixture(scope="session")
def fast_config():
    """Run configuration small enough for command smoke tests"""
    return RunConfig(
        seed=11,
        data=DataConfig(n_links=300),
        link_state=LinkStateConfig(epochs=2, batch_size=50),
        vae=VaeConfig(epochs=2, batch_size=50, learning_rate=1e-3),
        gpp=GppConfig(epochs=2),
        snr_map=SnrMapConfig(x_max_m=100.0, x_steps=3, z_min_m=40.0, z_max_m=100.0, z_steps=2, n_real=3),
    )


@pytest.fixture(autouse=True)
def reset_debug():
    yield
    set_debug(None)
