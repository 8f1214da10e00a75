"""
Модуль реализует паттерн Стратегия для движков максимального потока.

Определяет абстрактный базовый класс FlowStrategy - общий интерфейс движков,
которые ищут вершинно-непересекающиеся пути в шаговом графе пространства
(дискретный аналог теорем Менгера/Циппина) и минимальный вершинный разрез
при нехватке путей.
"""

from abc import ABC, abstractmethod
from typing import Dict, Optional, Sequence

import numpy as np

from flow_strategies.flow_network import DisjointPaths, FlowNetwork


class FlowStrategy(ABC):
    """
    Абстрактный базовый класс для движков максимального потока.

    Methods
    -------
    get_name()
        Возвращает название движка.
    get_augmentations()
        Число увеличивающих путей (или их оценку) в последнем вычислении.
    get_nodes()
        Число вершин сети последнего вычисления.
    get_edges()
        Число дуг сети последнего вычисления.
    get_flow_value()
        Величина последнего найденного потока.
    max_flow(network)
        Вычисляет максимальный поток в сети.
    disjoint_paths(space, sources, sinks, n, allowed, capacities)
        Ищет n вершинно-непересекающихся путей из sources в sinks.
    """

    @abstractmethod
    def get_name(self) -> str:
        """
        Возвращает название движка.

        Returns
        -------
        str
            Название движка ('networkx', 'dinic').
        """
        pass

    @abstractmethod
    def get_augmentations(self) -> int:
        """
        Возвращает число увеличивающих путей последнего вычисления.

        Returns
        -------
        int
            Число увеличивающих путей.
        """
        pass

    @abstractmethod
    def get_nodes(self) -> int:
        """
        Возвращает число вершин сети последнего вычисления.

        Returns
        -------
        int
            Число вершин.
        """
        pass

    @abstractmethod
    def get_edges(self) -> int:
        """
        Возвращает число дуг сети последнего вычисления.

        Returns
        -------
        int
            Число дуг.
        """
        pass

    @abstractmethod
    def get_flow_value(self) -> int:
        """
        Возвращает величину последнего найденного потока.

        Returns
        -------
        int
            Величина потока.
        """
        pass

    @abstractmethod
    def max_flow(self, network: FlowNetwork) -> int:
        """
        Вычисляет максимальный поток из network.source в network.sink.

        Parameters
        ----------
        network : FlowNetwork
            Сеть с целыми пропускными способностями.

        Returns
        -------
        int
            Величина максимального потока; поток по дугам сохраняется в network.flow.
        """
        pass

    @abstractmethod
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
        Ищет n вершинно-непересекающихся путей из sources в sinks внутри allowed.

        Parameters
        ----------
        space : MetricSpace
            Пространство, по шаговому графу которого строятся пути.
        sources : Sequence[int]
            Множество A.
        sinks : Sequence[int]
            Множество B.
        n : int
            Требуемое число путей.
        allowed : np.ndarray, optional
            Маска области; по умолчанию всё пространство.
        capacities : Dict[int, int], optional
            Пропускные способности вершин, отличные от 1 (общий конец путей).

        Returns
        -------
        DisjointPaths
            Найденные пути (не больше n) и минимальный вершинный разрез, если путей меньше n.
        """
        pass
