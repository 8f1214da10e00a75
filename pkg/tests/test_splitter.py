from itertools import combinations

import pytest

from geometry.arc_model import (
    DiscreteArc,
    arc_separation,
    check_follows,
    concatenate_to_circle,
    cone_epsilon,
    measure_circle_lambda,
    to_plain,
)
from geometry.graph_ops import shortest_path
from geometry.space_model import generate_grid_square, grid_corners, grid_index
from geometry.splitter import (
    bogensatz,
    build_scaffold,
    split_even_subarc,
    split_quasi_arc,
    unzip_join,
    verify_scaffold,
)
from utils.config import get_config
from utils.construction_trace import ConstructionTrace
from utils.error_handler import ConstructionError, InputError, ResolutionError
from utils.file_handler import dumps_document


def _diagonal(k: int) -> DiscreteArc:
    space = generate_grid_square(k)
    a, _, _, d = grid_corners(k)
    return DiscreteArc(space, shortest_path(space, [a], [d]))


def _assert_split_contract(arc, first, second, report, eps):
    space = arc.space
    ends = (arc.start, arc.end)
    floor = get_config().mesh_floor_mult * space.mesh_h
    for piece in (first, second):
        assert {piece.start, piece.end} == set(ends)
        assert cone_epsilon(piece, arc, ends, floor) <= report.extras["eps_measured"] + 1e-12
    assert not set(first.interior()) & set(second.interior())
    assert report.extras["eps_measured"] <= eps + 1e-9
    assert report.separation_eta > 0
    assert arc_separation(first, second, relative_to=ends, floor=floor) == pytest.approx(
        report.separation_eta
    )
    circle = concatenate_to_circle(first, second)
    full = measure_circle_lambda(circle, min_distance=0).lambda_measured
    assert full == pytest.approx(report.extras["circle_lambda_full"])
    assert full <= report.extras["six_lambda_over_eta"] + 1e-9
    assert report.extras["six_lambda_ok"]


@pytest.fixture(scope="module")
def diagonal24():
    return _diagonal(24)


def test_diagonal_is_a_straight_arc(diagonal24):
    assert len(diagonal24) == 25
    assert diagonal24.end == grid_corners(24)[3]


def test_short_diagonal_splits_directly(diagonal24):
    trace = ConstructionTrace()
    first, second, report = split_quasi_arc(diagonal24, eps=0.3, trace=trace)
    assert report.extras["depth"] == 0
    assert report.extras["lambda0"] == pytest.approx(1.0)
    assert any(r["stage"] == "split.direct" for r in trace.to_list())
    assert trace.to_list()[-1]["stage"] == "split.result"
    _assert_split_contract(diagonal24, first, second, report, 0.3)


def test_scaffold_rejects_bad_constants(diagonal24):
    with pytest.raises(InputError):
        build_scaffold(diagonal24, 0.5, 0.3, L=1.0)
    with pytest.raises(InputError):
        build_scaffold(diagonal24, 1.0, 0.0, L=1.0)


def test_scaffold_needs_resolved_ends(grid16):
    arc = DiscreteArc(grid16, [grid_index(16, i, 0) for i in range(5)])
    with pytest.raises(ResolutionError) as info:
        build_scaffold(arc, 1.0, 0.3, L=1.0)
    assert info.value.achieved == 0
    assert info.value.exit_code == 3


def test_scaffold_depth_is_odd_and_verified():
    arc = _diagonal(48)
    scaffold = build_scaffold(arc, 1.0, 0.3, L=1.0)
    assert scaffold.depth == 1
    assert sorted(scaffold.markers) == [-1, 1]
    assert scaffold.delta == pytest.approx(0.1)
    assert scaffold.d1 == pytest.approx(0.3 * 0.1 / 3)
    assert verify_scaffold(scaffold) == []
    left, right = scaffold.markers[-1], scaffold.markers[1]
    assert 0 < left < right < len(arc) - 1
    assert scaffold.working_tube(0) >= 2 * arc.space.mesh_h


def test_eps_above_one_is_clamped(diagonal24):
    scaffold = build_scaffold(diagonal24, 1.0, 1.5, L=1.0)
    assert scaffold.eps == pytest.approx(0.99)
    assert any("0.99" in note for note in scaffold.notes)


def test_two_arcs_between_inner_points():
    space = generate_grid_square(24)
    x, y = grid_index(24, 1, 1), grid_index(24, 23, 23)
    arcs, report = bogensatz(space, x, y, 2)
    assert len(arcs) == 2
    for arc in arcs:
        assert (arc.start, arc.end) == (x, y)
    assert report.extras["n"] == 2
    assert report.extras["depth"] == 1
    (pair,) = report.extras["pairwise"]
    assert pair["eta"] > 0
    assert pair["ok"]
    assert report.separation_eta == pytest.approx(min(pair["eta"], 1.0))


def test_single_arc_is_the_straightened_base():
    space = generate_grid_square(24)
    x, y = grid_corners(24)[0], grid_corners(24)[3]
    arcs, report = bogensatz(space, x, y, 1)
    assert len(arcs) == 1
    assert report.extras["pairwise"] == []
    assert report.separation_eta == 1.0


def test_bogensatz_rejects_bad_requests(grid16):
    with pytest.raises(InputError):
        bogensatz(grid16, 0, 1, 2)
    with pytest.raises(InputError):
        bogensatz(grid16, 0, grid_corners(16)[3], 0)


@pytest.mark.slow
def test_deeper_diagonal_split_contract():
    arc = _diagonal(48)
    first, second, report = split_quasi_arc(arc, eps=0.3)
    assert report.extras["depth"] == 1
    assert len(report.extras["scales"]) >= 1
    _assert_split_contract(arc, first, second, report, 0.3)


@pytest.mark.slow
def test_long_diagonal_split_contract():
    arc = _diagonal(64)
    first, second, report = split_quasi_arc(arc, eps=0.3)
    _assert_split_contract(arc, first, second, report, 0.3)


@pytest.mark.slow
def test_four_arcs_between_inner_points():
    space = generate_grid_square(64)
    x, y = grid_index(64, 1, 1), grid_index(64, 63, 63)
    arcs, report = bogensatz(space, x, y, 4)
    assert len(arcs) == 4
    assert len(report.extras["pairwise"]) == 6
    for i, j in combinations(range(4), 2):
        assert not set(arcs[i].interior()) & set(arcs[j].interior())
    assert report.separation_eta > 0
    assert all(pair["ok"] for pair in report.extras["pairwise"])


@pytest.mark.slow
def test_corner_admits_only_two_levels():
    # у угла решётки три соседа: четыре дуги из него не выходят
    space = generate_grid_square(64)
    a, _, _, d = grid_corners(64)
    with pytest.raises(ResolutionError) as info:
        bogensatz(space, a, d, 4)
    assert info.value.achieved == 1
    assert info.value.trace


def test_even_piece_splits_in_its_tube():
    scaffold = build_scaffold(_diagonal(48), 1.0, 0.3, L=1.0)
    trace = ConstructionTrace()
    split = split_even_subarc(scaffold, 0, trace=trace)
    first, second = split.pair
    assert split.index == 0
    assert not set(first) & set(second)
    assert split.sigma > 0
    assert split.lambda_local >= 1.0

    assert split.follows_iota >= 0.5 * scaffold.tube_radius(0)
    assert split.displacement <= split.follows_iota + scaffold.space.tol
    piece = DiscreteArc(scaffold.space, scaffold.piece_points(0))
    for path in split.pair:
        assert check_follows(DiscreteArc(scaffold.space, path), piece, split.follows_iota).ok
    (entry,) = [e for e in trace.to_list() if e["stage"] == "split.follows"]
    assert entry["thresholds"]["iota"] == pytest.approx(split.follows_iota)
    with pytest.raises(InputError):
        split_even_subarc(scaffold, 1)


def test_direct_unzip_joins_the_ends(diagonal24):
    scaffold = build_scaffold(diagonal24, 1.0, 0.3)
    assert scaffold.depth == 0
    a, b = diagonal24.start, diagonal24.end
    join = unzip_join(scaffold, 0, ([a], [a]), ([b], [b]))
    first, second = join.arcs
    for path in (first, second):
        assert (path[0], path[-1]) == (a, b)
    assert not set(first[1:-1]) & set(second[1:-1])
    assert first != second


def test_report_survives_zero_separation(grid8, monkeypatch):
    import geometry.splitter as splitter

    lower = [grid_index(8, i, 0) for i in range(9)] + [grid_index(8, 8, j) for j in range(1, 9)]
    upper = [grid_index(8, 0, j) for j in range(9)] + [grid_index(8, i, 8) for i in range(1, 9)]
    arcs = [DiscreteArc(grid8, lower), DiscreteArc(grid8, upper)]
    monkeypatch.setattr(splitter, "arc_separation", lambda *args, **kwargs: 0.0)
    report = splitter._bogensatz_report(arcs, 0, 80, 1)
    (pair,) = report.extras["pairwise"]
    assert pair["bound"] == float("inf")
    assert pair["ok"]


def test_even_piece_must_follow_its_subarc(monkeypatch):
    import geometry.splitter as splitter

    scaffold = build_scaffold(_diagonal(48), 1.0, 0.3, L=1.0)
    tight = scaffold.space.mesh_h / 100
    monkeypatch.setattr(
        splitter, "check_follows", lambda arc_b, arc_a, iota: check_follows(arc_b, arc_a, tight)
    )
    trace = ConstructionTrace()
    with pytest.raises(ConstructionError) as info:
        split_even_subarc(scaffold, 0, trace=trace)
    assert info.value.exit_code == 3
    assert info.value.trace[-1]["stage"] == "split.follows"
    assert "не следует" in info.value.trace[-1]["note"]


def test_split_ignores_scale(diagonal24):
    scaled = DiscreteArc(diagonal24.space.scaled(7.3), diagonal24.points)
    first, second, report = split_quasi_arc(diagonal24, eps=0.3)
    first_s, second_s, report_s = split_quasi_arc(scaled, eps=0.3)
    assert (first_s.points, second_s.points) == (first.points, second.points)
    assert report_s.separation_eta == pytest.approx(report.separation_eta)
    assert report_s.extras["eps_measured"] == pytest.approx(report.extras["eps_measured"])


def test_bogensatz_ignores_scale():
    space = generate_grid_square(24)
    x, y = grid_index(24, 1, 1), grid_index(24, 23, 23)
    arcs, report = bogensatz(space, x, y, 2)
    arcs_s, report_s = bogensatz(space.scaled(7.3), x, y, 2)
    assert [a.points for a in arcs_s] == [a.points for a in arcs]
    assert report_s.separation_eta == pytest.approx(report.separation_eta)


@pytest.mark.slow
def test_four_arcs_are_byte_stable():
    x, y = grid_index(64, 1, 1), grid_index(64, 63, 63)

    def run() -> str:
        trace = ConstructionTrace()
        arcs, report = bogensatz(generate_grid_square(64), x, y, 4, trace=trace)
        document = {
            "arcs": [arc.to_dict() for arc in arcs],
            "report": report.to_dict(),
            "trace": to_plain(trace.to_list()),
        }
        return dumps_document(document)

    first = run()
    assert run() == first
    assert '"n": 4' in first
