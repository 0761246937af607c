"""测试共享夹具：小规模点集、临时实验库、线程数复位"""

import numpy as np
import pytest

from discrepancy_lab.numerics import set_worker_count
from discrepancy_lab.pointset import PointSet, generate_faure_net, generate_random, generate_van_der_corput
from discrepancy_lab.storage import LabDatabase


@pytest.fixture(autouse=True)
def reset_workers():
    yield
    set_worker_count(None)


@pytest.fixture
def hammersley_64() -> PointSet:
    return generate_van_der_corput(64)


@pytest.fixture
def random_2d() -> PointSet:
    return generate_random(2, 64, seed=7)


@pytest.fixture
def random_3d() -> PointSet:
    return generate_random(3, 64, seed=11)


@pytest.fixture
def faure_3_3_3() -> PointSet:
    return generate_faure_net(3, 3, 3)


@pytest.fixture
def lab_db(tmp_path):
    with LabDatabase(str(tmp_path / "lab.db")) as db:
        yield db


def midpoint_grid(resolution: int, dim: int = 2) -> np.ndarray:
    """[0,1]^d 上 resolution^d 个格子中点"""
    axis = (np.arange(resolution) + 0.5) / resolution
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


@pytest.fixture
def grid_2d():
    return midpoint_grid
