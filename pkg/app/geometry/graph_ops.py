"""
Операции над шаговым графом пространства: кратчайшие пути внутри области,
компоненты связности, стирание петель, выгрузка в networkx.
"""

from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.sparse.csgraph import connected_components, dijkstra

from geometry.space_model import MetricSpace

# Маркер отсутствия предшественника в scipy.sparse.csgraph
_NO_PRED = -9999


def _as_mask(space: MetricSpace, allowed: Optional[np.ndarray]) -> np.ndarray:
    if allowed is None:
        return np.ones(space.n_points, dtype=bool)
    return np.asarray(allowed, dtype=bool)


def induced_subgraph(space: MetricSpace, allowed: Optional[np.ndarray] = None):
    """
    Подграф шагового графа, индуцированный маской.

    Returns:
        tuple: (csr-матрица подграфа, глобальные индексы вершин подграфа)
    """
    mask = _as_mask(space, allowed)
    nodes = np.nonzero(mask)[0]
    graph = space.step_graph
    if len(nodes) == space.n_points:
        return graph, nodes
    return graph[nodes][:, nodes], nodes


def shortest_path(
    space: MetricSpace,
    sources: Iterable[int],
    targets: Iterable[int],
    allowed: Optional[np.ndarray] = None,
) -> Optional[List[int]]:
    """
    Кратчайший путь из множества sources в множество targets по шаговому графу,
    не выходящий из allowed.

    Веса квантованы в единицах mesh_h, поэтому среди равных по длине путей выбор
    детерминирован и не зависит от масштаба. Из равноудалённых целей берётся цель
    с наименьшим индексом.

    Returns:
        list[int] | None: Вершины пути от источника до цели или None, если пути нет
    """
    mask = _as_mask(space, allowed)
    sources = sorted({int(s) for s in sources if mask[int(s)]})
    targets = sorted({int(t) for t in targets if mask[int(t)]})
    if not sources or not targets:
        return None

    graph, nodes = induced_subgraph(space, mask)
    local = -np.ones(space.n_points, dtype=int)
    local[nodes] = np.arange(len(nodes))

    dist, pred, _ = dijkstra(
        graph,
        directed=False,
        indices=local[sources],
        min_only=True,
        return_predecessors=True,
    )
    target_local = local[targets]
    reach = dist[target_local]
    best = int(np.argmin(reach))
    if not np.isfinite(reach[best]):
        return None

    path = [int(target_local[best])]
    while pred[path[-1]] != _NO_PRED:
        path.append(int(pred[path[-1]]))
    path.reverse()
    return [int(nodes[v]) for v in path]


def component_labels(space: MetricSpace, allowed: Optional[np.ndarray] = None) -> np.ndarray:
    """Метки компонент связности области (−1 вне области)."""
    mask = _as_mask(space, allowed)
    labels = -np.ones(space.n_points, dtype=int)
    graph, nodes = induced_subgraph(space, mask)
    if len(nodes) == 0:
        return labels
    _, local_labels = connected_components(graph, directed=False)
    labels[nodes] = local_labels
    return labels


def loop_erase(walk: Sequence[int]) -> List[int]:
    """Хронологическое стирание петель: при повторном посещении вершины петля вырезается."""
    result: List[int] = []
    position: Dict[int, int] = {}
    for v in walk:
        v = int(v)
        if v in position:
            cut = position[v]
            for dropped in result[cut + 1 :]:
                del position[dropped]
            del result[cut + 1 :]
        else:
            position[v] = len(result)
            result.append(v)
    return result


def loop_erase_labeled(walk: Sequence[Tuple[int, int]]) -> List[Tuple[int, int]]:
    """Стирание петель для пути с метками (точка, номер куска)."""
    result: List[Tuple[int, int]] = []
    position: Dict[int, int] = {}
    for v, label in walk:
        v = int(v)
        if v in position:
            cut = position[v]
            for dropped, _ in result[cut + 1 :]:
                del position[dropped]
            del result[cut + 1 :]
        else:
            position[v] = len(result)
            result.append((v, label))
    return result


def is_step_walk(space: MetricSpace, points: Sequence[int], cyclic: bool = False) -> bool:
    """Соседние точки последовательности находятся на расстоянии ≤ mesh_h."""
    if len(points) < 2:
        return True
    seq = np.asarray(points, dtype=int)
    nxt = np.roll(seq, -1) if cyclic else seq[1:]
    cur = seq if cyclic else seq[:-1]
    steps = np.array([space.dist(int(a), int(b)) for a, b in zip(cur, nxt)])
    return bool((steps <= space.mesh_h + space.tol).all())


def to_networkx(space: MetricSpace, allowed: Optional[np.ndarray] = None) -> nx.Graph:
    """Шаговый граф (или его индуцированный подграф) как networkx.Graph."""
    mask = _as_mask(space, allowed)
    graph = space.step_graph.tocoo()
    result = nx.Graph()
    result.add_nodes_from(int(v) for v in np.nonzero(mask)[0])
    keep = (graph.row < graph.col) & mask[graph.row] & mask[graph.col]
    result.add_weighted_edges_from(
        (int(a), int(b), float(w))
        for a, b, w in zip(graph.row[keep], graph.col[keep], graph.data[keep])
    )
    return result


def articulation_points(space: MetricSpace, allowed: Optional[np.ndarray] = None) -> List[int]:
    """Точки сочленения шагового графа (кандидаты в локальные точки разреза)."""
    return sorted(int(v) for v in nx.articulation_points(to_networkx(space, allowed)))


class ShortestPathTree:
    """
    Дерево кратчайших путей от одной точки внутри области (одна прогонка Дейкстры).

    Attributes:
        source: Корень дерева
        distance: Квантованные длины путей до всех точек (inf вне досягаемости)
    """

    def __init__(self, space: MetricSpace, source: int, allowed: Optional[np.ndarray] = None):
        mask = _as_mask(space, allowed).copy()
        mask[source] = True
        graph, nodes = induced_subgraph(space, mask)
        local = -np.ones(space.n_points, dtype=int)
        local[nodes] = np.arange(len(nodes))
        dist, pred = dijkstra(
            graph, directed=False, indices=int(local[source]), return_predecessors=True
        )
        self.source = int(source)
        self._nodes = nodes
        self._local = local
        self._pred = pred
        self.distance = np.full(space.n_points, np.inf)
        self.distance[nodes] = dist

    def reaches(self, target: int) -> bool:
        return bool(np.isfinite(self.distance[target]))

    def path_to(self, target: int) -> Optional[List[int]]:
        """Путь от корня до target или None."""
        if not self.reaches(target):
            return None
        path = [int(self._local[target])]
        while self._pred[path[-1]] != _NO_PRED:
            path.append(int(self._pred[path[-1]]))
        path.reverse()
        return [int(self._nodes[v]) for v in path]

    def nearest(self, targets: Iterable[int]) -> Optional[int]:
        """Ближайшая по дереву цель; при равенстве берётся меньший индекс."""
        targets = np.asarray(sorted({int(t) for t in targets}), dtype=int)
        if len(targets) == 0:
            return None
        values = self.distance[targets]
        best = int(np.argmin(values))
        return int(targets[best]) if np.isfinite(values[best]) else None
