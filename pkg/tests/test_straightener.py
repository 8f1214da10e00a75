import numpy as np
import pytest

from geometry.arc_model import DiscreteArc, check_follows
from geometry.graph_ops import shortest_path
from geometry.space_model import generate_grid_square, grid_index
from geometry.straightener import (
    ThreePieceArc,
    build_v_family,
    maximal_separated_net,
    single_scale_join,
    straighten,
)
from utils.config import get_config
from utils.construction_trace import ConstructionTrace
from utils.error_handler import ConstructionError, InputError


def _square_wave(k: int, row: int, height: int):
    """Меандр вдоль строки row: каждые два столбца подъём на height и спуск."""
    cells = [(0, row)]
    for m in range(0, k, 4):
        cells.append((m + 1, row))
        cells += [(m + 1, row + t) for t in range(1, height + 1)]
        cells += [(m + 2, row + height), (m + 3, row + height)]
        cells += [(m + 3, row + t) for t in range(height - 1, -1, -1)]
        cells.append((m + 4, row))
    return [grid_index(k, i, j) for i, j in cells]


@pytest.fixture
def wave(grid16):
    return DiscreteArc(grid16, _square_wave(16, 6, 3))


def test_square_wave_is_an_arc(wave):
    assert wave.start == grid_index(16, 0, 6)
    assert wave.end == grid_index(16, 16, 6)


def test_straightened_arc_follows_input(wave):
    trace = ConstructionTrace()
    eps = 8 * wave.space.mesh_h
    result, report = straighten(wave, eps, trace=trace)

    assert (result.start, result.end) == (wave.start, wave.end)
    assert report.locality_eps <= report.follows_iota + wave.space.tol
    assert check_follows(result, wave, report.follows_iota).ok
    assert report.extras["eps"] == eps
    assert report.extras["alpha"] == pytest.approx(report.locality_eps / eps)
    assert report.extras["alpha_bound"] == pytest.approx(report.follows_iota / eps)
    assert report.lambda_measured >= 1.0
    if not report.extras["returned_input"]:
        assert report.extras["passes"]
    assert trace.to_list()[-1]["stage"] == "straighten.result"


def test_straightening_ignores_scale(wave):
    scaled = DiscreteArc(wave.space.scaled(7.3), wave.points)
    result, report = straighten(wave, 8 * wave.space.mesh_h)
    result_s, report_s = straighten(scaled, 8 * scaled.space.mesh_h)
    assert result_s.points == result.points
    assert report_s.lambda_measured == pytest.approx(report.lambda_measured)
    assert report_s.follows_iota == pytest.approx(7.3 * report.follows_iota)


def test_straight_arc_comes_back_unchanged(grid16):
    arc = DiscreteArc(grid16, [grid_index(16, i, 3) for i in range(17)])
    result, report = straighten(arc, 8 * grid16.mesh_h)
    assert result.points == arc.points
    assert report.lambda_measured == pytest.approx(1.0)


def test_scale_below_resolution_is_rejected(wave):
    with pytest.raises(InputError):
        straighten(wave, 7 * wave.space.mesh_h)


def test_single_point_arc_is_rejected(grid16):
    with pytest.raises(InputError):
        straighten(DiscreteArc(grid16, [0]), 1.0)


def test_three_piece_hypothesis(grid16):
    arc = DiscreteArc(grid16, [grid_index(16, i, 0) for i in range(17)])
    with pytest.raises(InputError):
        ThreePieceArc(arc, 2, 14, eps=0.5)
    pieces = ThreePieceArc(arc, 2, 14, eps=0.3)
    assert pieces.head == arc.points[:3]
    assert pieces.tail == arc.points[14:]
    assert pieces.side_lambdas() == (1.0, 1.0)
    whole = ThreePieceArc.whole(arc, eps=5.0)
    assert whole.middle == arc.points


def test_maximal_net_is_separated_and_covering(grid8):
    r = 0.25
    net = maximal_separated_net(grid8, r, [40])
    assert 40 in net
    for a in net:
        for b in net:
            if a != b:
                assert grid8.dist(a, b) >= r - grid8.tol
    assert (grid8.dist_to_set(net) < r).all()


def test_net_rejects_close_anchors(grid8):
    with pytest.raises(InputError):
        maximal_separated_net(grid8, 0.5, [0, 1])
    with pytest.raises(InputError):
        maximal_separated_net(grid8, 0.01, [0])


@pytest.mark.slow
def test_cut_mode_keeps_far_components():
    space = generate_grid_square(32)
    arc = DiscreteArc(space, _square_wave(32, 10, 4))
    eps = 8 * space.mesh_h
    first_cut = arc.position[grid_index(32, 4, 10)]
    second_cut = arc.position[grid_index(32, 28, 10)]
    result, report = straighten(arc, eps, mode=(first_cut, second_cut))
    assert (result.start, result.end) == (arc.start, arc.end)
    assert report.extras["mode"] == [first_cut, second_cut]
    assert check_follows(result, arc, report.follows_iota).ok


def test_v_family_contains_close_net_points(grid16):
    r, L = 0.25, 1.5
    net = maximal_separated_net(grid16, r, [0])
    family = build_v_family(grid16, net, r, L)
    assert family.net == sorted(net)
    for x in net:
        assert x in family.sets[x]
        assert grid16.set_diameter(family.members[x]) <= 5 * L * r + 4 * grid16.mesh_h
        for y in net:
            if grid16.dist(x, y) <= 2 * r - grid16.tol:
                assert y in family.sets[x]


def test_v_family_needs_resolved_radius(grid16):
    with pytest.raises(InputError):
        build_v_family(grid16, [0], 0.01, 1.5)


def test_join_with_empty_middle_returns_input(grid16):
    arc = DiscreteArc(grid16, [grid_index(16, i, 0) for i in range(17)])
    joined, report = single_scale_join(
        ThreePieceArc(arc, 8, 8, eps=0.3, check_hypothesis=False), 0.2, L=1.0
    )
    assert joined is arc
    assert report.extras["chain_length"] == 0


def test_single_scale_join_keeps_ends(wave):
    first_cut = wave.position[grid_index(16, 4, 6)]
    second_cut = wave.position[grid_index(16, 12, 6)]
    pieces = ThreePieceArc(wave, first_cut, second_cut, eps=0.2)
    joined, report = single_scale_join(pieces, 0.15, L=1.0)
    assert (joined.start, joined.end) == (wave.start, wave.end)
    assert report.extras["floored"]
    assert report.extras["follows_ok"] == check_follows(joined, wave, 0.15).ok
    with pytest.raises(InputError):
        single_scale_join(pieces, 0.5, L=1.0)


def test_follows_bound_is_the_sum_of_scales(wave):
    eps = 8 * wave.space.mesh_h
    floor = get_config().mesh_floor_mult * wave.space.mesh_h
    _, report = straighten(wave, eps)
    passes = report.extras["passes"]
    assert passes[0]["iota"] == pytest.approx(eps / 2)
    assert report.follows_iota == pytest.approx(sum(max(p["iota"], floor) for p in passes))
    assert report.extras["alpha_bound"] <= 1.0
    assert report.extras["displacement"] <= report.follows_iota + wave.space.tol


def test_subarc_diameter_violation_aborts(wave, monkeypatch):
    import geometry.straightener as straightener

    real_scan = straightener._star_scan

    def broken_scan(*args):
        result = real_scan(*args)
        return {**result, "violations": 1}

    monkeypatch.setattr(straightener, "_star_scan", broken_scan)
    first_cut = wave.position[grid_index(16, 4, 6)]
    second_cut = wave.position[grid_index(16, 12, 6)]
    pieces = ThreePieceArc(wave, first_cut, second_cut, eps=0.2)
    trace = ConstructionTrace()
    with pytest.raises(ConstructionError) as info:
        single_scale_join(pieces, 0.15, L=1.0, trace=trace)
    assert info.value.exit_code == 3
    assert info.value.trace[-1]["stage"] == "straighten.star"
    assert info.value.trace[-1]["achieved"]["violations"] == 1


def _grid_instance(seed: int, space):
    rng = np.random.default_rng(seed)
    row = int(rng.integers(4, 24))
    height = int(rng.integers(2, 6))
    arc = DiscreteArc(space, _square_wave(32, row, height))
    c1, c2 = int(rng.choice([4, 8])), int(rng.choice([24, 28]))
    eps = 0.45 * (c2 - c1) / 32
    pieces = ThreePieceArc(
        arc, arc.position[grid_index(32, c1, row)], arc.position[grid_index(32, c2, row)], eps
    )
    return pieces, float(rng.uniform(0.3, 0.9)) * eps


def _carpet_instance(seed: int, carpet):
    rng = np.random.default_rng(seed)
    while True:
        a, b = (int(v) for v in rng.choice(carpet.n_points, size=2, replace=False))
        if carpet.dist(a, b) >= 0.5:
            break
    arc = DiscreteArc(carpet, shortest_path(carpet, [a], [b]))
    return ThreePieceArc.whole(arc, 1.0), float(rng.uniform(0.2, 0.8))


@pytest.fixture(scope="module")
def grid32():
    return generate_grid_square(32)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_subarc_diameters_on_grid(seed, grid32):
    pieces, iota = _grid_instance(seed, grid32)
    joined, report = single_scale_join(pieces, iota, L=1.0)
    assert report.extras["star"]["violations"] == 0
    assert (joined.start, joined.end) == (pieces.arc.start, pieces.arc.end)


@pytest.mark.parametrize("seed", range(10))
def test_subarc_diameters_on_carpet(seed, carpet2):
    pieces, iota = _carpet_instance(seed, carpet2)
    joined, report = single_scale_join(pieces, iota, L=1.5)
    assert report.extras["star"]["violations"] == 0
    assert (joined.start, joined.end) == (pieces.arc.start, pieces.arc.end)
