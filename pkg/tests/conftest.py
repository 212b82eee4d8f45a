import numpy as np
import pytest

from config.settings import Settings
from numerics.kernels import grid
from lab.app.factories.build_services import build_core_services
from lab.scenarios import main_problem


@pytest.fixture
def settings(tmp_path) -> Settings:
    return Settings(_env_file=None, OUTPUT_DIR=str(tmp_path / "results"))


@pytest.fixture
def services(settings):
    return build_core_services(settings)


@pytest.fixture
def main_spec():
    return main_problem()


@pytest.fixture
def main_mesh():
    return grid.uniform_mesh2d(45)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)
