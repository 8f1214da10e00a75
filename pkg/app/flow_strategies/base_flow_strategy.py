"""
Базовый класс для движков максимального потока.
Реализует общую часть: построение сети с расщеплением вершин, разложение потока
на пути и поиск минимального вершинного разреза по остаточной сети.
Конкретные движки реализуют только max_flow.
"""

from abc import abstractmethod
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from flow_strategies.flow_network import DisjointPaths, FlowNetwork
from flow_strategies.flow_strategy import FlowStrategy
from geometry.graph_ops import loop_erase
from utils.logger import log_debug


class BaseFlowStrategy(FlowStrategy):
    """
    Базовый класс для всех движков потока.

    Attributes
    ----------
    augmentations : int
        Число увеличивающих путей последнего вычисления.
    nodes : int
        Число вершин сети последнего вычисления.
    edges : int
        Число дуг сети последнего вычисления.
    flow_value : int
        Величина последнего потока.
    """

    def __init__(self):
        self.augmentations = 0
        self.nodes = 0
        self.edges = 0
        self.flow_value = 0

    def get_augmentations(self) -> int:
        return self.augmentations

    def get_nodes(self) -> int:
        return self.nodes

    def get_edges(self) -> int:
        return self.edges

    def get_flow_value(self) -> int:
        return self.flow_value

    @abstractmethod
    def max_flow(self, network: FlowNetwork) -> int:
        pass

    def disjoint_paths(
        self,
        space,
        sources: Sequence[int],
        sinks: Sequence[int],
        n: int,
        allowed: Optional[np.ndarray] = None,
        capacities: Optional[Dict[int, int]] = None,
    ) -> DisjointPaths:
        """
        Вершинно-непересекающиеся пути через сеть с расщеплением вершин.

        Каждая точка v области даёт вершины v_in, v_out и дугу v_in → v_out с
        пропускной способностью 1 (или capacities[v]); шаги графа и подключения
        истока/стока имеют заведомо большую пропускную способность, поэтому любой
        минимальный разрез состоит из вершин. Поток ограничен сверху числом n.
        """
        mask = np.ones(space.n_points, dtype=bool) if allowed is None else np.asarray(allowed)
        capacities = capacities or {}
        source_set = {int(a) for a in sources if mask[int(a)]}
        sink_set = {int(b) for b in sinks if mask[int(b)]}

        network, nodes = self._build_split_network(
            space, sorted(source_set), sorted(sink_set), n, mask, capacities
        )
        self.nodes = network.n_nodes
        self.edges = network.n_arcs
        value = self.max_flow(network) if source_set and sink_set else 0
        self.flow_value = value

        paths = self._decompose(network, nodes, source_set, sink_set) if value else []
        cut: List[int] = []
        if value < n:
            cut = self._min_vertex_cut(network, nodes)
        log_debug(
            f"Поток {self.get_name()}: требуется {n}, найдено {value}, "
            f"вершин сети {self.nodes}, дуг {self.edges}"
        )
        return DisjointPaths(paths=paths, flow_value=value, cut=cut)

    def _build_split_network(
        self,
        space,
        sources: List[int],
        sinks: List[int],
        n: int,
        mask: np.ndarray,
        capacities: Dict[int, int],
    ) -> Tuple[FlowNetwork, np.ndarray]:
        nodes = np.nonzero(mask)[0]
        local = -np.ones(space.n_points, dtype=int)
        local[nodes] = np.arange(len(nodes))
        k = len(nodes)
        big = n + 1 + sum(capacities.values())

        super_source, source, sink = 2 * k, 2 * k + 1, 2 * k + 2
        network = FlowNetwork(2 * k + 3, source, sink)
        network.add_arc(source, super_source, n)
        for idx, v in enumerate(nodes):
            network.add_arc(2 * idx, 2 * idx + 1, capacities.get(int(v), 1))
        for a in sources:
            network.add_arc(super_source, 2 * local[a], big)
        for b in sinks:
            network.add_arc(2 * local[b] + 1, sink, big)

        graph = space.step_graph.tocoo()
        keep = (graph.row < graph.col) & mask[graph.row] & mask[graph.col]
        for u, v in zip(graph.row[keep], graph.col[keep]):
            lu, lv = local[u], local[v]
            network.add_arc(2 * lu + 1, 2 * lv, big)
            network.add_arc(2 * lv + 1, 2 * lu, big)
        return network, nodes

    def _decompose(
        self, network: FlowNetwork, nodes: np.ndarray, sources: set, sinks: set
    ) -> List[List[int]]:
        """Разложение потока на пути; циркуляции отбрасываются стиранием петель."""
        remaining = np.array(network.flow, dtype=np.int64)
        outgoing: List[List[int]] = [[] for _ in range(network.n_nodes)]
        for e in range(network.n_arcs):
            if remaining[e] > 0:
                outgoing[network.tails[e]].append(e)

        k = len(nodes)
        paths = []
        for _ in range(self.flow_value):
            u = network.source
            walk: List[int] = []
            while u != network.sink:
                e = next(e for e in outgoing[u] if remaining[e] > 0)
                remaining[e] -= 1
                head = network.heads[e]
                if u < 2 * k and u % 2 == 0 and head == u + 1:
                    walk.append(int(nodes[u // 2]))
                u = head
            paths.append(self._trim(loop_erase(walk), sources, sinks))
        return paths

    @staticmethod
    def _trim(path: List[int], sources: set, sinks: set) -> List[int]:
        """Последняя точка A, затем первая после неё точка B: внутренность вне A ∪ B."""
        start = max(i for i, v in enumerate(path) if v in sources)
        stop = next(i for i in range(start, len(path)) if path[i] in sinks)
        return path[start : stop + 1]

    def _min_vertex_cut(self, network: FlowNetwork, nodes: np.ndarray) -> List[int]:
        reach = network.residual_reachable()
        return sorted(
            int(v) for idx, v in enumerate(nodes) if reach[2 * idx] and not reach[2 * idx + 1]
        )
