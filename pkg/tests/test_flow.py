from itertools import combinations

import networkx as nx
import numpy as np
import pytest

from flow_strategies.strategy_factory import create_strategy, get_available_engines
from geometry.connecting_arcs import disjoint_arcs, separated_arcs
from geometry.graph_ops import is_step_walk, to_networkx
from geometry.space_model import Ball, from_graph_edges, generate_grid_square, grid_index
from utils.error_handler import FlowCutError, InputError
from utils.flow_stats import get_total_flow_stats

REQUIRED = 3


def _random_space(seed: int):
    """Связный граф: остовный путь плюс случайные рёбра, все веса 1."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 15))
    order = rng.permutation(n)
    edges = {tuple(sorted((int(a), int(b)))) for a, b in zip(order, order[1:])}
    for _ in range(int(rng.integers(0, 2 * n))):
        a, b = rng.choice(n, size=2, replace=False)
        edges.add(tuple(sorted((int(a), int(b)))))
    space = from_graph_edges(n, [[a, b, 1.0] for a, b in sorted(edges)])
    ends = rng.permutation(n)
    size_a = int(rng.integers(1, 4))
    size_b = int(rng.integers(1, 4))
    sources = sorted(int(v) for v in ends[:size_a])
    sinks = sorted(int(v) for v in ends[size_a : size_a + size_b])
    return space, sources, sinks


def _separates(graph: nx.Graph, cut, sources, sinks) -> bool:
    rest = graph.copy()
    rest.remove_nodes_from(cut)
    alive_a = [a for a in sources if a in rest]
    alive_b = set(b for b in sinks if b in rest)
    for a in alive_a:
        if alive_b & nx.node_connected_component(rest, a):
            return False
    return True


def _brute_force_cut(graph: nx.Graph, sources, sinks, limit: int) -> int:
    """Размер наименьшего вершинного разреза A|B (разрез может содержать точки A и B)."""
    for size in range(limit):
        for cut in combinations(sorted(graph.nodes), size):
            if _separates(graph, cut, sources, sinks):
                return size
    return limit


def _assert_valid_paths(space, paths, sources, sinks):
    used = set()
    for path in paths:
        assert path[0] in sources and path[-1] in sinks
        assert is_step_walk(space, path)
        assert not used & set(path)
        used |= set(path)


@pytest.mark.parametrize("seed", range(50))
def test_flow_matches_menger_on_random_graphs(seed):
    space, sources, sinks = _random_space(seed)
    graph = to_networkx(space)
    expected = _brute_force_cut(graph, sources, sinks, REQUIRED)

    values = {}
    for engine in get_available_engines():
        result = create_strategy(engine).disjoint_paths(space, sources, sinks, REQUIRED)
        values[engine] = result.flow_value
        assert result.flow_value == expected
        assert len(result.paths) == result.flow_value
        _assert_valid_paths(space, result.paths, set(sources), set(sinks))
        if result.flow_value < REQUIRED:
            assert len(result.cut) == result.flow_value
            assert _separates(graph, result.cut, sources, sinks)
        else:
            assert result.cut == []
    assert len(set(values.values())) == 1


@pytest.mark.parametrize("k", [4, 8, 12])
@pytest.mark.parametrize("engine", ["networkx", "dinic"])
def test_grid_sides_are_joined_by_k_plus_one_arcs(k, engine):
    space = generate_grid_square(k)
    left = [grid_index(k, 0, j) for j in range(k + 1)]
    right = [grid_index(k, k, j) for j in range(k + 1)]
    arcs = disjoint_arcs(space, left, right, k + 1, engine=engine)
    assert len(arcs) == k + 1
    _assert_valid_paths(space, [a.points for a in arcs], set(left), set(right))


def test_corner_degree_limits_flow(grid8):
    corner, far = 0, grid_index(8, 8, 8)
    # у угла три соседа: больше трёх дуг через него не пройдёт
    with pytest.raises(FlowCutError) as info:
        disjoint_arcs(grid8, [corner], [far], 4, capacities={corner: 4, far: 4})
    assert info.value.flow_value == 3
    assert info.value.cut == sorted(int(v) for v in grid8.neighbors(corner))
    assert info.value.exit_code == 3


def test_region_restricts_flow(grid8):
    center = grid_index(8, 4, 4)
    region = Ball(center, 0.3)
    arcs = disjoint_arcs(
        grid8, [grid_index(8, 2, 4)], [grid_index(8, 6, 4)], 1, region=region
    )
    mask = region.mask(grid8)
    assert all(mask[p] for p in arcs[0].points)
    with pytest.raises(InputError):
        disjoint_arcs(grid8, [0], [grid_index(8, 6, 4)], 1, region=region)


def test_flow_stats_accumulate(grid8):
    disjoint_arcs(grid8, [0], [80], 1, engine="dinic")
    disjoint_arcs(grid8, [0], [80], 1, engine="networkx")
    stats = get_total_flow_stats()
    assert stats["total_calls"] == 2
    assert stats["engines"] == {"dinic": 1, "networkx": 1}
    assert stats["total_flow"] == 2


def test_unknown_engine_is_rejected():
    with pytest.raises(ValueError):
        create_strategy("push-relabel")


def test_separated_arcs_on_grid(grid16):
    left = [grid_index(16, 0, j) for j in range(17)]
    right = [grid_index(16, 16, j) for j in range(17)]
    found = separated_arcs(grid16, left, right, 3, None, scale=0.5)
    assert len(found.arcs) == 3
    assert not found.fallback
    assert found.sigma > grid16.mesh_h
    for first, second in combinations(found.arcs, 2):
        assert grid16.set_distance(first.points, second.points) >= found.sigma - grid16.tol


def test_narrow_strip_falls_back_and_says_so(grid8):
    strip = np.zeros(grid8.n_points, dtype=bool)
    strip[[grid_index(8, i, j) for i in (0, 1) for j in range(9)]] = True
    bottom = [grid_index(8, 0, 0), grid_index(8, 1, 0)]
    top = [grid_index(8, 0, 8), grid_index(8, 1, 8)]
    found = separated_arcs(grid8, bottom, top, 2, strip, scale=0.5)
    assert found.fallback
    assert found.below_mesh
    assert found.sigma == pytest.approx(1 / 8)
    assert found.sigma < grid8.mesh_h
    assert any("mesh_h" in note for note in found.notes)
