import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from geometry.graph_ops import articulation_points
from geometry.space_model import (
    Annulus,
    Ball,
    MetricSpace,
    from_distance_matrix,
    generate_cusp,
    generate_grid_square,
    generate_sierpinski_carpet,
    grid_corners,
    grid_index,
    load_space,
    save_space,
)
from utils.config import override_config
from utils.error_handler import InputError, MetricAxiomError


def _vertex(space: MetricSpace, x: float, y: float) -> int:
    hits = np.nonzero(np.all(np.isclose(space.coords, [x, y]), axis=1))[0]
    assert len(hits) == 1
    return int(hits[0])


def test_grid_square_layout(grid8):
    assert grid8.n_points == 81
    assert grid8.mesh_h == pytest.approx(math.sqrt(2) / 8)
    assert grid8.coords.shape == (81, 2)
    assert tuple(grid8.coords[grid_index(8, 3, 5)]) == pytest.approx((3 / 8, 5 / 8))
    a, _, _, d = grid_corners(8)
    assert grid8.dist(a, d) == pytest.approx(math.sqrt(2))


def test_grid_step_graph_uses_diagonals(grid8):
    # внутренняя точка: 4 стороны и 4 диагонали
    assert len(grid8.neighbors(grid_index(8, 4, 4))) == 8
    assert len(grid8.neighbors(0)) == 3


def test_generated_grid_passes_metric_check():
    space = generate_grid_square(32)
    assert space.is_dense
    assert space.dist(0, 1) == pytest.approx(1 / 32)
    loaded = load_space(save_space(space))
    assert loaded.dist(0, 1088) == pytest.approx(math.sqrt(2))


def test_coincident_points_are_rejected():
    matrix = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    with pytest.raises(MetricAxiomError) as info:
        from_distance_matrix(matrix, mesh_h=1.0)
    assert info.value.witness == (0, 1)


def test_sparse_rows_from_many_threads():
    override_config(dense_limit=10)
    space = generate_grid_square(16)
    assert not space.is_dense
    with ThreadPoolExecutor(max_workers=8) as pool:
        rows = list(pool.map(space.row, [p % 40 for p in range(400)]))
    assert all(np.array_equal(rows[i], space.row(i % 40)) for i in range(400))
    assert space.dist(0, 16) == pytest.approx(1.0)


def test_grid_rejects_tiny_k():
    with pytest.raises(InputError):
        generate_grid_square(1)


def test_carpet_cell_counts(carpet1, carpet2):
    assert carpet1.meta["cells"] == 8
    assert carpet1.n_points == 16
    assert carpet2.meta["cells"] == 64
    # четыре внутренние вершины центральной дыры не принадлежат ни одной клетке
    assert carpet2.n_points == 96
    assert carpet2.mesh_h == pytest.approx(1 / 9)


def test_carpet_intrinsic_metric_goes_around_hole(carpet2):
    euclidean = generate_sierpinski_carpet(2, metric="euclidean")
    left = _vertex(carpet2, 3 / 9, 4 / 9)
    right = _vertex(carpet2, 6 / 9, 4 / 9)
    assert euclidean.dist(left, right) == pytest.approx(3 / 9)
    assert carpet2.dist(left, right) > euclidean.dist(left, right) + 1e-9


def test_carpet_rejects_unknown_metric():
    with pytest.raises(InputError):
        generate_sierpinski_carpet(1, metric="manhattan")


def test_circle_chordal_metric(circle64):
    assert circle64.n_points == 64
    assert circle64.mesh_h == pytest.approx(2 * math.sin(math.pi / 64))
    assert circle64.dist(0, 32) == pytest.approx(2.0)
    assert sorted(int(v) for v in circle64.neighbors(0)) == [1, 63]


def test_glued_squares_single_cut_point(glued8):
    glue = glued8.meta["glue_point"]
    assert glued8.n_points == 2 * 81 - 1
    assert tuple(glued8.coords[glue]) == pytest.approx((1.0, 1.0))
    assert articulation_points(glued8) == [glue]


def test_cusp_tip_is_origin():
    space = generate_cusp(8)
    tip = space.meta["tip"]
    assert tuple(space.coords[tip]) == pytest.approx((0.0, 0.0))
    assert np.all(np.abs(space.coords[:, 1]) <= space.coords[:, 0] ** 2 + 1e-12)


def test_save_load_preserves_graph_metric(carpet2):
    loaded = load_space(save_space(carpet2))
    assert loaded.n_points == carpet2.n_points
    assert loaded.metric == "graph"
    assert np.allclose(loaded.dense_matrix, carpet2.dense_matrix)
    assert loaded.meta["cells"] == 64


def test_triangle_violation_reports_witness():
    matrix = np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]])
    with pytest.raises(MetricAxiomError) as info:
        from_distance_matrix(matrix)
    assert info.value.witness == (0, 1, 2)
    assert info.value.exit_code == 4


def test_asymmetry_reports_pair():
    document = {
        "n": 3,
        "mesh_h": 1.0,
        "metric": "explicit",
        "coords": None,
        "dist": [0, 1, 1, 2, 0, 1, 1, 1, 0],
    }
    with pytest.raises(MetricAxiomError) as info:
        load_space(document)
    assert info.value.witness == (0, 1)


@pytest.mark.parametrize(
    "document",
    [
        {"mesh_h": 1.0, "metric": "explicit"},
        {"n": 0, "mesh_h": 1.0, "metric": "explicit"},
        {"n": 2, "mesh_h": 1.0, "metric": "cosmic"},
        {"n": 2, "mesh_h": 1.0, "metric": "explicit", "dist": [0, 1, 1]},
        {"n": 2, "mesh_h": 1.0, "metric": "euclidean", "coords": None},
    ],
)
def test_bad_documents_are_input_errors(document):
    with pytest.raises(InputError):
        load_space(document)


def test_disconnected_step_graph_is_rejected():
    matrix = np.array([[0.0, 1.0, 9.0], [1.0, 0.0, 9.0], [9.0, 9.0, 0.0]])
    with pytest.raises(InputError):
        from_distance_matrix(matrix, mesh_h=1.0)


def test_scaled_space_keeps_structure(grid8):
    scaled = grid8.scaled(7.3)
    assert scaled.mesh_h == pytest.approx(7.3 * grid8.mesh_h)
    assert scaled.dist(0, 80) == pytest.approx(7.3 * grid8.dist(0, 80))
    assert scaled.step_graph.nnz == grid8.step_graph.nnz
    assert np.array_equal(scaled.step_graph.data, grid8.step_graph.data)


def test_balls_are_open_and_annuli_closed(grid8):
    x = grid_index(8, 4, 4)
    h = 1 / 8
    ball = Ball(x, h)
    assert not ball.contains(grid8, grid_index(8, 5, 4))
    assert ball.contains(grid8, x)
    annulus = Annulus(x, h, 2 * h)
    assert annulus.contains(grid8, grid_index(8, 5, 4))
    assert annulus.contains(grid8, grid_index(8, 6, 4))
    assert not annulus.contains(grid8, x)
    with pytest.raises(InputError):
        Ball(x, 0.0)


@settings(max_examples=25, deadline=None)
@given(
    count=st.integers(min_value=3, max_value=40),
    seed=st.integers(min_value=0, max_value=10_000),
)
def test_bottleneck_mesh_connects_random_clouds(count, seed):
    points = np.random.default_rng(seed).uniform(0.0, 1.0, size=(count, 2))
    matrix = cdist(points, points)
    if (matrix + np.eye(count)).min() <= 1e-9:
        return
    space = from_distance_matrix(matrix)
    components, _ = connected_components(space.step_graph, directed=False)
    assert components == 1
    assert space.min_separation() <= space.mesh_h + space.tol
