import math

import pytest

from geometry.arc_model import DiscreteCircle
from geometry.circler import (
    LABEL_LINK,
    choose_case,
    circle_through_points,
    detour_circle,
    merge_circles,
    small_circle,
)
from geometry.space_model import generate_grid_square, grid_corners, grid_index
from utils.construction_trace import ConstructionTrace
from utils.error_handler import (
    ConstructionError,
    DetourError,
    InputError,
    ResolutionError,
)


def _square_loop(k: int, low: int, high: int) -> DiscreteCircle:
    """Граница квадрата [low, high]² на решётке k×k, обход против часовой стрелки."""
    cells = [(i, low) for i in range(low, high + 1)]
    cells += [(high, j) for j in range(low + 1, high + 1)]
    cells += [(i, high) for i in range(high - 1, low - 1, -1)]
    cells += [(low, j) for j in range(high - 1, low, -1)]
    space = generate_grid_square(k)
    return DiscreteCircle(space, [grid_index(k, i, j) for i, j in cells])


@pytest.fixture
def loop16():
    return _square_loop(16, 4, 12)


def test_detour_avoids_inner_ball(loop16):
    space = loop16.space
    x = grid_index(16, 8, 2)
    r_in, r_out = 0.36, 0.72
    result = detour_circle(loop16, x, r_in, r_out)

    assert all(space.dist(x, p) >= r_in - space.tol for p in result.points)
    outside = {p for p in loop16.points if space.dist(x, p) >= r_in - space.tol}
    assert outside <= result.point_set
    for p in result.point_set - loop16.point_set:
        assert space.dist(x, p) <= r_out + space.tol


def test_detour_leaves_far_circle_alone():
    loop = _square_loop(16, 2, 14)
    assert detour_circle(loop, grid_index(16, 8, 8), 0.36, 0.72) is loop


def test_detour_rejects_bad_radii(loop16):
    h = loop16.space.mesh_h
    x = grid_index(16, 8, 2)
    with pytest.raises(InputError):
        detour_circle(loop16, x, 3 * h, 1.0)
    with pytest.raises(InputError):
        detour_circle(loop16, x, 0.5, 0.5)


def test_detour_of_swallowed_circle_fails():
    loop = _square_loop(16, 6, 10)
    with pytest.raises(DetourError) as info:
        detour_circle(loop, grid_index(16, 8, 8), 0.4, 0.8)
    assert info.value.exit_code == 3


def test_small_circle_stays_in_ball(grid16):
    x = grid_index(16, 8, 8)
    circle = small_circle(grid16, x, 0.5)
    assert x in circle.point_set
    assert len(circle) >= 5
    assert all(grid16.dist(x, p) < 0.5 for p in circle.points)


def test_small_circle_below_resolution(grid16):
    with pytest.raises(ResolutionError) as info:
        small_circle(grid16, grid_index(16, 8, 8), 0.05)
    assert info.value.achieved == 0


def test_merge_keeps_marked_points(grid24):
    x, y = grid_index(24, 6, 12), grid_index(24, 18, 12)
    first = small_circle(grid24, x, 0.2)
    second = small_circle(grid24, y, 0.2)
    merged = merge_circles(first, second, [x], [y])

    assert {x, y} <= merged.circle.point_set
    assert len(merged.labels) == len(merged.circle)
    assert LABEL_LINK in merged.labels
    assert merged.sigma > 0
    assert merged.gaps == (0, 0)
    assert merged.rule == "gap_pairs"


def test_merge_picks_two_links_from_many(grid24):
    x, y = grid_index(24, 6, 12), grid_index(24, 18, 12)
    first = small_circle(grid24, x, 0.2)
    second = small_circle(grid24, y, 0.2)
    trace = ConstructionTrace()
    merged = merge_circles(first, second, [x], [y], count=4, trace=trace)

    assert {x, y} <= merged.circle.point_set
    assert merged.rule == "pigeonhole"
    assert merged.requested == 4
    # каждая отмеченная точка отнимает не больше одной дуги
    assert merged.discarded <= 2
    assert merged.found - merged.discarded >= 2
    links = [r for r in trace.to_list() if r["stage"] == "circle.links"]
    assert links[-1]["case"] == "pigeonhole"
    assert links[-1]["achieved"]["discarded"] == merged.discarded


def test_merge_needs_two_links(grid24):
    x, y = grid_index(24, 6, 12), grid_index(24, 18, 12)
    first = small_circle(grid24, x, 0.2)
    second = small_circle(grid24, y, 0.2)
    with pytest.raises(InputError):
        merge_circles(first, second, [x], [y], count=1)


def test_merge_rejects_crossing_circles(grid16):
    x = grid_index(16, 8, 8)
    circle = small_circle(grid16, x, 0.5)
    with pytest.raises(ConstructionError):
        merge_circles(circle, circle, [x], [x])


def test_circle_through_one_point(grid16):
    x = grid_index(16, 8, 8)
    circle, report = circle_through_points(grid16, [x])
    assert x in circle.point_set
    assert report.extras["size"] == 1
    assert report.extras["diam_bound_ok"]
    assert report.extras["cases"][0]["case"] == "single"


def test_circle_through_two_points(grid24):
    x, y = grid_index(24, 2, 2), grid_index(24, 22, 22)
    trace = ConstructionTrace()
    circle, report = circle_through_points(grid24, [y, x, x], trace=trace)

    assert {x, y} <= circle.point_set
    assert report.extras["size"] == 2
    assert report.extras["cases"][0]["case"] == "pair"
    assert report.lambda_measured >= 1.0
    assert report.extras["diam_circle"] >= report.extras["diam_T"]
    assert any(r["stage"] == "circle.alc" for r in trace.to_list())


def test_glue_point_blocks_the_circle(glued8):
    far_corner = 2 * 9**2 - 2
    with pytest.raises(DetourError) as info:
        circle_through_points(glued8, [0, far_corner])
    assert "annulus disconnected" in str(info.value)
    assert info.value.exit_code == 3
    last = info.value.trace[-1]
    assert last["stage"] == "circle.alc"
    assert last["achieved"]["failures"] >= 1
    assert not any(r["stage"] == "circle.case" for r in info.value.trace)


def test_circle_ignores_scale(grid24):
    x, y = grid_index(24, 2, 2), grid_index(24, 22, 22)
    circle, report = circle_through_points(grid24, [x, y])
    scaled, scaled_report = circle_through_points(grid24.scaled(7.3), [x, y])
    assert scaled.points == circle.points
    assert scaled_report.lambda_measured == pytest.approx(report.lambda_measured)
    assert scaled_report.extras["diam_T"] == pytest.approx(7.3 * report.extras["diam_T"])


def test_corner_cluster_takes_the_second_case():
    # три точки у угла на взаимном расстоянии 1/16 и противоположный угол решётки k = 64
    cells = [(0, 0), (4, 0), (0, 4), (64, 64)]
    far = sorted(math.hypot(i, j) / 64 for i, j in cells)
    choice = choose_case(far, delta=1e-6, gap_ratio=0.125)
    assert (choice.case, choice.m, choice.rule) == ("case2", 3, "gap_ratio")


def test_strict_gap_rule_wins_when_it_applies():
    choice = choose_case([0.0, 0.01, 0.02, 1.0], delta=0.5, gap_ratio=0.125)
    assert (choice.case, choice.m, choice.rule) == ("case2", 3, "strict")


def test_spread_points_take_the_first_case():
    far = sorted(math.hypot(i, j) for i, j in [(0, 0), (1, 0), (0, 1), (1, 1)])
    choice = choose_case(far, delta=1e-6, gap_ratio=0.125)
    assert (choice.case, choice.m, choice.rule) == ("case1", None, "none")
    with pytest.raises(InputError):
        choose_case([0.0, 1.0], delta=0.5, gap_ratio=0.125)


def test_circle_rejects_bad_point_sets(grid16):
    with pytest.raises(InputError):
        circle_through_points(grid16, [0, 1])
    with pytest.raises(InputError):
        circle_through_points(grid16, [])
    with pytest.raises(InputError):
        circle_through_points(grid16, [grid16.n_points])


@pytest.mark.slow
def test_circle_through_three_points():
    space = generate_grid_square(32)
    marked = [grid_index(32, 2, 2), grid_index(32, 30, 2), grid_index(32, 2, 30)]
    trace = ConstructionTrace()
    circle, report = circle_through_points(space, marked, trace=trace)
    assert set(marked) <= circle.point_set
    assert report.extras["size"] == 3

    (top,) = [c for c in report.extras["cases"] if len(c["points"]) == 3]
    assert top["case"] == "case1"
    assert top["rule"] == "none"
    assert top["arcs_requested"] == 6
    assert top["links"] in ("pigeonhole", "gap_pairs")

    # λ₁ узла измерена на окружности через две оставшиеся точки
    rest = [grid_index(32, 2, 30), grid_index(32, 30, 2)]
    _, pair = circle_through_points(space, rest)
    assert top["lambda1"] == pytest.approx(max(1.0, pair.lambda_measured))
    assert report.extras["lambda1"] >= top["lambda1"]

    entries = trace.to_list()
    stages = [r["stage"] for r in entries]
    assert "circle.rule" in stages
    assert "circle.links" in stages
    final = [r for r in entries if r["stage"] == "circle.straighten" and r["case"] == "case1.final"]
    assert final and final[-1]["scale"] >= 8 * space.mesh_h - space.tol


@pytest.mark.slow
def test_circle_through_square_corners():
    space = generate_grid_square(64)
    corners = grid_corners(64)
    circle, report = circle_through_points(space, corners)
    assert set(corners) <= circle.point_set
    assert report.extras["diam_T"] == pytest.approx(2**0.5)
    assert report.extras["diam_bound_ok"]
