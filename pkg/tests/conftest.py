import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from config.manager import ConfigManager

settings.register_profile(
    "fast", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))


@pytest.fixture(autouse=True)
def fresh_config(monkeypatch, tmp_path):
    """Each test gets a ConfigManager built from a clean environment."""
    for key in list(os.environ):
        if key.startswith("STEERING_"):
            monkeypatch.delenv(key)
    monkeypatch.setenv("STEERING_OUTPUT_DIR", str(tmp_path / "results"))
    ConfigManager.reset()
    ConfigManager(dotenv_path=tmp_path / "missing.env")
    yield
    ConfigManager.reset()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
