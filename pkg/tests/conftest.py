import sys
from pathlib import Path

import numpy as np
import pytest

PROJECT_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from src.core.emitter import Emitter  # noqa: E402
from src.core.mechanics import MechMode, load_catalog  # noqa: E402

CONFIG_DIR = PROJECT_ROOT / "configs"

GAMMA_SP_DEVICE = 1.1e9
TWO_PI = 2.0 * np.pi


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: statistical round trips that take several seconds")


@pytest.fixture(scope="session")
def device_catalog():
    return load_catalog(CONFIG_DIR / "catalog_device.json")


@pytest.fixture(scope="session")
def fem_catalog():
    return load_catalog(CONFIG_DIR / "catalog_fem.json")


@pytest.fixture(scope="session")
def f1x(device_catalog):
    return device_catalog.get("F1x")


@pytest.fixture(scope="session")
def f1y(device_catalog):
    return device_catalog.get("F1y")


@pytest.fixture(scope="session")
def b2(device_catalog):
    return device_catalog.get("B2")


@pytest.fixture(scope="session")
def paper_emitter():
    """Emitter reproducing the measured Voigt line at omega_r = gamma_sp."""
    return Emitter.from_linewidths(
        GAMMA_SP_DEVICE, TWO_PI * 0.45e9, TWO_PI * 0.70e9, omega_r=GAMMA_SP_DEVICE
    )


@pytest.fixture(scope="session")
def figure_emitter():
    return Emitter(gamma_sp=1e9)


@pytest.fixture(scope="session")
def figure_mode():
    return MechMode(
        label="F1", family="flexural-x", order=1,
        omega_m=TWO_PI * 607.9e3, gamma_m=TWO_PI * 300.0, m_eff=2.6e-14,
    )
