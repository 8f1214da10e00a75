import math

import numpy as np
import pytest

from geometry.arc_model import (
    ConstructionReport,
    DiscreteArc,
    DiscreteCircle,
    arc_separation,
    arc_length,
    check_follows,
    circle_arc,
    concatenate_to_circle,
    cone_epsilon,
    cut_circle,
    diam,
    measure_circle_lambda,
    measure_lambda,
    subarc,
    to_plain,
)
from geometry.space_model import grid_index
from utils.error_handler import ArcOverlapError, InputError


def _column(space, i, rows):
    return DiscreteArc(space, [grid_index(8, i, j) for j in rows])


@pytest.fixture
def hairpin(grid8):
    """Шпилька: вверх по столбцу 4 и вниз по столбцу 5."""
    up = [grid_index(8, 4, j) for j in range(8)]
    down = [grid_index(8, 5, j) for j in range(7, -1, -1)]
    return DiscreteArc(grid8, up + down)


def test_arc_validation(grid8):
    with pytest.raises(InputError):
        DiscreteArc(grid8, [])
    with pytest.raises(InputError):
        DiscreteArc(grid8, [0, 1, 0])
    with pytest.raises(InputError):
        DiscreteArc(grid8, [0, 2])
    with pytest.raises(InputError):
        DiscreteArc(grid8, [80, 81])
    with pytest.raises(InputError):
        DiscreteCircle(grid8, [0, 1])


def test_arc_basics(grid8):
    arc = _column(grid8, 0, range(9))
    assert (arc.start, arc.end) == (0, 8)
    assert arc.interior() == tuple(range(1, 8))
    assert arc.reversed().points == tuple(range(8, -1, -1))
    assert arc.to_dict("ref") == {"space_ref": "ref", "points": list(range(9)), "cyclic": False}
    assert subarc(arc, 5, 2).points == (2, 3, 4, 5)
    assert diam(arc) == pytest.approx(1.0)
    assert arc_length(arc) == pytest.approx(1.0)
    with pytest.raises(InputError):
        subarc(arc, 0, 9)


def test_straight_arc_is_one_quasi_arc(grid8):
    report = measure_lambda(_column(grid8, 3, range(9)))
    assert report.lambda_measured == pytest.approx(1.0)
    assert report.locality_eps == "global"
    assert report.extras["pairs"] > 0


def test_hairpin_lambda_and_resolution_floor(hairpin):
    report = measure_lambda(hairpin)
    # ближайшие допустимые пары: диагональ √2/8 при диаметре подуги √50/8
    assert report.lambda_measured == pytest.approx(5.0)
    assert report.extras["witness_pair"] is not None

    unfloored = measure_lambda(hairpin, min_distance=0.0)
    assert unfloored.lambda_measured == pytest.approx(math.sqrt(50))


def test_local_lambda_ignores_far_pairs(grid8):
    arc = _column(grid8, 0, range(9))
    report = measure_lambda(arc, locality=0.3)
    assert report.locality_eps == 0.3
    assert report.lambda_measured == pytest.approx(1.0)


def test_semicircle_length_constant(circle64):
    half = DiscreteArc(circle64, range(33))
    assert measure_lambda(half).lambda_measured == pytest.approx(1.0)
    length = measure_lambda(half, kind="length")
    assert length.lambda_measured == pytest.approx(math.pi / 2, rel=1e-3)
    with pytest.raises(InputError):
        measure_lambda(half, kind="area")


def test_round_circle_constants(circle64):
    circle = DiscreteCircle(circle64, range(64))
    assert measure_circle_lambda(circle).lambda_measured == pytest.approx(1.0)
    length = measure_circle_lambda(circle, kind="length")
    assert length.lambda_measured == pytest.approx(math.pi / 2, rel=1e-3)
    assert length.extras["pairs"] > 0


def test_follows_with_small_detour(grid8):
    straight = _column(grid8, 0, range(9))
    detour = DiscreteArc(
        grid8, [0] + [grid_index(8, 1, j) for j in range(1, 8)] + [grid_index(8, 0, 8)]
    )
    result = check_follows(detour, straight, 1 / 8)
    assert result.ok
    assert result.displacement == pytest.approx(1 / 8)
    assert result.mapping[0] == 0 and result.mapping[-1] == len(straight) - 1
    assert all(a <= b for a, b in zip(result.mapping, result.mapping[1:]))

    failed = check_follows(detour, straight, 0.1)
    assert not failed
    assert failed.witness is not None
    assert failed.witness[2] in detour.interior()


def test_absolute_separation(grid8):
    left = _column(grid8, 0, range(9))
    right = _column(grid8, 3, range(9))
    assert arc_separation(left, right) == pytest.approx(3 / 8)


def test_semicircles_are_relatively_separated(circle64):
    circle = DiscreteCircle(circle64, range(64))
    forward, backward = cut_circle(circle, 0, 32)
    assert forward.points == tuple(range(33))
    assert backward.points == (0,) + tuple(range(63, 31, -1))
    eta = arc_separation(forward, backward, relative_to=(0, 32))
    assert eta == pytest.approx(1.0)
    assert cone_epsilon(forward, forward, (0, 32), circle64.mesh_h) == 0.0


def test_relative_separation_needs_interior_points(circle64):
    arc = DiscreteArc(circle64, [0, 1])
    with pytest.raises(InputError):
        arc_separation(arc, arc.reversed(), relative_to=(0, 1))


def test_one_bare_arc_is_enough_to_fail(circle64):
    bare = DiscreteArc(circle64, [0, 1])
    detour = DiscreteArc(circle64, [0] + list(range(63, 0, -1)))
    with pytest.raises(InputError):
        arc_separation(detour, bare, relative_to=(0, 1))
    with pytest.raises(InputError):
        arc_separation(bare, detour, relative_to=(0, 1))


def test_concatenate_semicircles(circle64):
    circle = DiscreteCircle(circle64, range(64))
    forward, backward = cut_circle(circle, 0, 32)
    glued = concatenate_to_circle(forward, backward)
    assert glued.point_set == circle.point_set
    assert glued.rotated(32).points[0] == 32
    assert circle_arc(glued, 60, 2).points == (60, 61, 62, 63, 0, 1, 2)


def test_concatenate_reports_overlap_point(grid8):
    straight = _column(grid8, 0, range(9))
    zigzag = DiscreteArc(
        grid8,
        [0, grid_index(8, 1, 1), grid_index(8, 0, 2)]
        + [grid_index(8, 1, j) for j in range(3, 8)]
        + [grid_index(8, 0, 8)],
    )
    with pytest.raises(ArcOverlapError) as info:
        concatenate_to_circle(straight, zigzag)
    assert info.value.point == grid_index(8, 0, 2)
    assert info.value.exit_code == 4


def test_concatenate_rejects_foreign_ends(grid8):
    with pytest.raises(InputError):
        concatenate_to_circle(_column(grid8, 0, range(9)), _column(grid8, 1, range(9)))


def test_cut_circle_rejects_equal_positions(circle64):
    with pytest.raises(InputError):
        cut_circle(DiscreteCircle(circle64, range(64)), 3, 3)


def test_report_flattens_extras():
    report = ConstructionReport(
        lambda_measured=np.float64(2.5), extras={"gap": np.float64(np.inf), "pair": (1, 2)}
    )
    document = report.to_dict()
    assert document["lambda_measured"] == 2.5
    assert document["gap"] == "inf"
    assert document["pair"] == [1, 2]
    assert document["follows_iota"] == "not-applicable"


def test_to_plain_converts_numpy_values():
    assert to_plain({1: np.int64(3), "x": [np.float64(-np.inf), float("nan")]}) == {
        "1": 3,
        "x": ["-inf", "nan"],
    }
