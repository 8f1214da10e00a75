"""
Определяет контейнеры данных для движков потока: FlowNetwork (ориентированная сеть
с целыми пропускными способностями) и DisjointPaths (результат поиска
непересекающихся путей).
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np


class FlowNetwork:
    """
    Ориентированная сеть с целыми пропускными способностями.

    Parameters
    ----------
    n_nodes : int
        Число вершин (нумерация 0..n_nodes-1).
    source : int
        Исток.
    sink : int
        Сток.

    Attributes
    ----------
    tails, heads, caps : list[int]
        Начало, конец и пропускная способность каждой дуги.
    flow : np.ndarray | None
        Поток по дугам после вычисления.
    """

    def __init__(self, n_nodes: int, source: int, sink: int):
        self.n_nodes = n_nodes
        self.source = source
        self.sink = sink
        self.tails: List[int] = []
        self.heads: List[int] = []
        self.caps: List[int] = []
        self.flow = None

    def add_arc(self, tail: int, head: int, cap: int) -> int:
        self.tails.append(tail)
        self.heads.append(head)
        self.caps.append(int(cap))
        return len(self.caps) - 1

    @property
    def n_arcs(self) -> int:
        return len(self.caps)

    def residual_reachable(self) -> np.ndarray:
        """Маска вершин, достижимых из истока в остаточной сети."""
        flow = np.zeros(self.n_arcs, dtype=np.int64) if self.flow is None else self.flow
        forward = [[] for _ in range(self.n_nodes)]
        for e in range(self.n_arcs):
            if flow[e] < self.caps[e]:
                forward[self.tails[e]].append(self.heads[e])
            if flow[e] > 0:
                forward[self.heads[e]].append(self.tails[e])
        seen = np.zeros(self.n_nodes, dtype=bool)
        seen[self.source] = True
        stack = [self.source]
        while stack:
            u = stack.pop()
            for v in forward[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        return seen


@dataclass
class DisjointPaths:
    """
    Результат поиска непересекающихся путей.

    Attributes
    ----------
    paths : list[list[int]]
        Пути (глобальные индексы точек), каждый от точки A к точке B.
    flow_value : int
        Величина максимального потока (ограниченная сверху требуемым n).
    cut : list[int]
        Минимальный вершинный разрез, если flow_value < n; иначе пуст.
    """

    paths: List[List[int]]
    flow_value: int
    cut: List[int] = field(default_factory=list)
