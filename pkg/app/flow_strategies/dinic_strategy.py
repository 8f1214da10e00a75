"""
Реализация движка потока алгоритмом Диница.
Независимая от networkx реализация: служит вторым оракулом при проверке
совпадения числа непересекающихся путей с минимальным разрезом.
"""

from collections import deque
from typing import List

import numpy as np

from flow_strategies.base_flow_strategy import BaseFlowStrategy
from flow_strategies.flow_network import FlowNetwork


class DinicFlowStrategy(BaseFlowStrategy):
    """
    Алгоритм Диница: слоистая сеть обходом в ширину, затем блокирующий поток
    итеративным обходом в глубину с указателями текущей дуги.
    """

    def get_name(self) -> str:
        return "dinic"

    def max_flow(self, network: FlowNetwork) -> int:
        n = network.n_nodes
        # дуга e хранится парой 2e (прямая) и 2e+1 (обратная)
        to: List[int] = []
        residual: List[int] = []
        adjacency: List[List[int]] = [[] for _ in range(n)]
        for tail, head, cap in zip(network.tails, network.heads, network.caps):
            adjacency[tail].append(len(to))
            to.append(head)
            residual.append(cap)
            adjacency[head].append(len(to))
            to.append(tail)
            residual.append(0)

        source, sink = network.source, network.sink
        total = 0
        self.augmentations = 0
        while True:
            level = self._levels(adjacency, to, residual, source, sink, n)
            if level[sink] < 0:
                break
            pointer = [0] * n
            while True:
                pushed = self._augment(adjacency, to, residual, level, pointer, source, sink)
                if pushed == 0:
                    break
                total += pushed
                self.augmentations += 1

        network.flow = np.array(
            [cap - residual[2 * e] for e, cap in enumerate(network.caps)], dtype=np.int64
        )
        self.flow_value = total
        return total

    @staticmethod
    def _levels(adjacency, to, residual, source, sink, n) -> List[int]:
        level = [-1] * n
        level[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for e in adjacency[u]:
                v = to[e]
                if residual[e] > 0 and level[v] < 0:
                    level[v] = level[u] + 1
                    queue.append(v)
        return level

    @staticmethod
    def _augment(adjacency, to, residual, level, pointer, source, sink) -> int:
        path: List[int] = []
        u = source
        while True:
            if u == sink:
                pushed = min(residual[e] for e in path)
                for e in path:
                    residual[e] -= pushed
                    residual[e ^ 1] += pushed
                return pushed
            edges = adjacency[u]
            advanced = False
            while pointer[u] < len(edges):
                e = edges[pointer[u]]
                v = to[e]
                if residual[e] > 0 and level[v] == level[u] + 1:
                    path.append(e)
                    u = v
                    advanced = True
                    break
                pointer[u] += 1
            if advanced:
                continue
            if u == source:
                return 0
            # тупик: вершина исключается из слоистой сети
            level[u] = -1
            e = path.pop()
            u = to[e ^ 1]
            pointer[u] += 1
