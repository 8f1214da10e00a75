import math

import numpy as np
import pytest

from geometry.space_model import (
    from_distance_matrix,
    from_graph_edges,
    generate_circle,
    generate_glued_squares,
    generate_grid_square,
    generate_sierpinski_carpet,
)
from utils.config import reset_config
from utils.flow_stats import reset_flow_stats


@pytest.fixture(autouse=True)
def fresh_config(monkeypatch, tmp_path):
    """Каждый тест начинает с конфигурации по умолчанию и чистой статистикой потока."""
    for name in (
        "QCF_SEED",
        "QCF_MESH_FLOOR_MULT",
        "QCF_THREADS",
        "QCF_RESTARTS",
        "QCF_FLOW_ENGINE",
        "QCF_CIRCLE_GAP",
        "QCF_DENSE_LIMIT",
    ):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("QCF_DATA_DIR", str(tmp_path / "data"))
    reset_config()
    reset_flow_stats()
    yield
    reset_config()


@pytest.fixture
def grid8():
    return generate_grid_square(8)


@pytest.fixture
def grid16():
    return generate_grid_square(16)


@pytest.fixture
def grid24():
    return generate_grid_square(24)


@pytest.fixture
def carpet1():
    return generate_sierpinski_carpet(1)


@pytest.fixture
def carpet2():
    return generate_sierpinski_carpet(2)


@pytest.fixture
def circle64():
    return generate_circle(64)


@pytest.fixture
def glued8():
    return generate_glued_squares(8)


@pytest.fixture
def path_space():
    """Отрезок из 21 точки с шагом 1 (графовая метрика)."""
    return from_graph_edges(21, [[i, i + 1, 1.0] for i in range(20)])


@pytest.fixture
def four_point_space():
    """Квадрат со стороной 1 и диагоналями √2."""
    s = math.sqrt(2)
    matrix = np.array(
        [
            [0.0, 1.0, s, 1.0],
            [1.0, 0.0, 1.0, s],
            [s, 1.0, 0.0, 1.0],
            [1.0, s, 1.0, 0.0],
        ]
    )
    return from_distance_matrix(matrix)
