"""
Реализация движка потока на networkx.maximum_flow (алгоритм preflow-push).
"""

import networkx as nx
import numpy as np

from flow_strategies.base_flow_strategy import BaseFlowStrategy
from flow_strategies.flow_network import FlowNetwork


class NetworkxFlowStrategy(BaseFlowStrategy):
    """
    Движок по умолчанию. Кратные дуги сети складываются в одну дугу networkx,
    найденный поток затем раскладывается обратно по исходным дугам.
    """

    def get_name(self) -> str:
        return "networkx"

    def max_flow(self, network: FlowNetwork) -> int:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(network.n_nodes))
        for tail, head, cap in zip(network.tails, network.heads, network.caps):
            if graph.has_edge(tail, head):
                graph[tail][head]["capacity"] += cap
            else:
                graph.add_edge(tail, head, capacity=cap)

        value, flow_dict = nx.maximum_flow(graph, network.source, network.sink)

        flow = np.zeros(network.n_arcs, dtype=np.int64)
        left = {}
        for e, (tail, head, cap) in enumerate(zip(network.tails, network.heads, network.caps)):
            key = (tail, head)
            if key not in left:
                left[key] = int(round(flow_dict[tail][head]))
            flow[e] = min(cap, left[key])
            left[key] -= flow[e]

        network.flow = flow
        self.flow_value = int(round(value))
        # preflow-push не ищет увеличивающие пути: в счётчик идёт величина потока
        self.augmentations = self.flow_value
        return self.flow_value
