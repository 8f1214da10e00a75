"""
Фабричный модуль для создания движков максимального потока.
Предоставляет простой интерфейс для получения нужного движка
без знания деталей их создания.
"""

from typing import Optional

from flow_strategies.flow_strategy import FlowStrategy
from flow_strategies.networkx_strategy import NetworkxFlowStrategy
from flow_strategies.dinic_strategy import DinicFlowStrategy
from utils.config import get_config


def create_strategy(engine: Optional[str] = None) -> FlowStrategy:
    """
    Создает и возвращает движок потока.

    Parameters
    ----------
    engine : str, optional
        Название движка ('networkx', 'dinic'); по умолчанию берётся из конфигурации

    Returns
    -------
    FlowStrategy
        Новый экземпляр движка

    Raises
    ------
    ValueError
        Если указан неизвестный движок
    """
    engine = (engine or get_config().flow_engine).lower()

    if engine == "networkx":
        return NetworkxFlowStrategy()
    elif engine == "dinic":
        return DinicFlowStrategy()
    else:
        raise ValueError(f"Неизвестный движок потока: {engine}")


def get_available_engines() -> list[str]:
    """
    Возвращает список доступных движков потока.

    Returns
    -------
    list[str]
        Список названий движков
    """
    return ["networkx", "dinic"]
