"""
Модуль для централизованного учёта статистики вызовов движков максимального потока.
Содержит функции для инициализации, обновления и получения суммарной статистики
по всем вычислениям потока за один запуск.
"""

import threading
from utils.logger import log_info

_lock = threading.Lock()
_stats = {}


def initialize_flow_stats():
    """
    Инициализирует статистику потока.
    Повторный вызов ничего не меняет.
    """
    with _lock:
        if not _stats:
            _reset_unlocked()
            log_info("Статистика потока инициализирована")


def _reset_unlocked():
    _stats["total_calls"] = 0
    _stats["total_augmentations"] = 0
    _stats["total_nodes"] = 0
    _stats["total_edges"] = 0
    _stats["total_flow"] = 0
    _stats["engines"] = {}


def update_flow_stats(flow_strategy, engine_name):
    """
    Обновляет общую статистику после каждого вычисления потока.

    Args:
        flow_strategy: Стратегия, выполнившая вычисление
        engine_name: Название движка

    Returns:
        dict: Статистика текущего вычисления
    """
    initialize_flow_stats()

    current = {
        "augmentations": flow_strategy.get_augmentations(),
        "nodes": flow_strategy.get_nodes(),
        "edges": flow_strategy.get_edges(),
        "flow_value": flow_strategy.get_flow_value(),
        "engine": engine_name,
    }

    with _lock:
        _stats["total_calls"] += 1
        _stats["total_augmentations"] += current["augmentations"]
        _stats["total_nodes"] += current["nodes"]
        _stats["total_edges"] += current["edges"]
        _stats["total_flow"] += current["flow_value"]
        _stats["engines"][engine_name] = _stats["engines"].get(engine_name, 0) + 1

    return current


def get_total_flow_stats():
    """
    Возвращает общую статистику вычислений потока.

    Returns:
        dict: Словарь с общей статистикой
    """
    initialize_flow_stats()
    with _lock:
        result = dict(_stats)
        result["engines"] = dict(_stats["engines"])
    return result


def reset_flow_stats():
    """
    Сбрасывает всю статистику потока.
    """
    with _lock:
        _reset_unlocked()
    log_info("Статистика потока сброшена")
