"""
Соединяющие дуги: n вершинно-непересекающихся дуг между множествами A и B
(дискретная теорема Менгера через максимальный поток) и n попарно σ-разделённых
дуг с поиском наибольшего σ.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from flow_strategies.strategy_factory import create_strategy
from geometry.arc_model import DiscreteArc
from geometry.graph_ops import shortest_path
from geometry.space_model import Ball, MetricSpace
from utils.config import get_config
from utils.error_handler import (
    ConstructionError,
    ErrorType,
    FlowCutError,
    InputError,
    safe_operation,
)
from utils.flow_stats import update_flow_stats
from utils.logger import log_debug, log_info, log_warning

Region = Union[None, Ball, np.ndarray]


@dataclass
class SeparatedArcs:
    """
    Результат поиска разделённых дуг.

    Attributes:
        arcs: Найденные дуги
        sigma: Достигнутое попарное разделение σ (проверено перебором)
        fallback: Разделённые дуги не найдены, возвращены просто непересекающиеся
        below_mesh: Измеренное σ меньше mesh_h (возможно только при fallback)
        restart: Номер успешного перезапуска жадного построения
        notes: Замечания поиска
    """

    arcs: List[DiscreteArc]
    sigma: float
    fallback: bool = False
    below_mesh: bool = False
    restart: Optional[int] = None
    notes: List[str] = field(default_factory=list)


def region_mask(space: MetricSpace, region: Region) -> np.ndarray:
    """Маска области: шар, готовая маска или всё пространство."""
    if region is None:
        return np.ones(space.n_points, dtype=bool)
    if isinstance(region, Ball):
        return region.mask(space)
    return np.asarray(region, dtype=bool)


def trim_between(path: Sequence[int], sources: set, sinks: set) -> List[int]:
    """Последняя точка A, затем первая после неё точка B: внутренность вне A ∪ B."""
    start = max(i for i, v in enumerate(path) if v in sources)
    stop = next(i for i in range(start, len(path)) if path[i] in sinks)
    return list(path[start : stop + 1])


# ------------------------------------------------------- непересекающиеся


def disjoint_arcs(
    space: MetricSpace,
    sources: Iterable[int],
    sinks: Iterable[int],
    n: int,
    region: Region = None,
    capacities: Optional[dict] = None,
    engine: Optional[str] = None,
) -> List[DiscreteArc]:
    """
    n вершинно-непересекающихся дуг из A в B внутри области.

    Args:
        space: Пространство
        sources: Множество A
        sinks: Множество B
        n: Требуемое число дуг
        region: Шар или маска области (по умолчанию всё пространство)
        capacities: Пропускные способности отдельных точек (по умолчанию 1)
        engine: Движок потока (по умолчанию из конфигурации)

    Returns:
        list[DiscreteArc]: Дуги, каждая с одним концом в A и другим в B

    Raises:
        FlowCutError: максимальный поток меньше n; несёт минимальный вершинный разрез
    """
    return safe_operation(
        _disjoint_arcs_impl,
        ErrorType.CONSTRUCTION_ERROR,
        show_cli_error=False,
        operation_name="Поиск непересекающихся дуг",
        reraise=True,
        space=space,
        sources=sources,
        sinks=sinks,
        n=n,
        region=region,
        capacities=capacities,
        engine=engine,
    )


def _disjoint_arcs_impl(
    space: MetricSpace,
    sources: Iterable[int],
    sinks: Iterable[int],
    n: int,
    region: Region = None,
    capacities: Optional[dict] = None,
    engine: Optional[str] = None,
) -> List[DiscreteArc]:
    mask = region_mask(space, region)
    sources = sorted({int(a) for a in sources})
    sinks = sorted({int(b) for b in sinks})
    if n < 1:
        raise InputError(f"Число дуг должно быть положительным: {n}")
    if not capacities and (len(sources) < n or len(sinks) < n):
        raise InputError(f"|A|={len(sources)}, |B|={len(sinks)} меньше n={n}")
    outside = [p for p in sources + sinks if not mask[p]]
    if outside:
        raise InputError(f"Точки {outside[:5]} лежат вне области")

    strategy = create_strategy(engine)
    result = strategy.disjoint_paths(space, sources, sinks, n, mask, capacities)
    update_flow_stats(strategy, strategy.get_name())
    if result.flow_value < n:
        raise FlowCutError(
            f"Найдено только {result.flow_value} непересекающихся дуг из {n}; "
            f"минимальный разрез {result.cut[:10]}",
            cut=result.cut,
            flow_value=result.flow_value,
        )
    paths = sorted(result.paths[:n], key=lambda p: (p[0], p[-1], len(p)))
    return [DiscreteArc(space, p) for p in paths]


# ---------------------------------------------------------- разделённые


def separated_arcs(
    space: MetricSpace,
    sources: Iterable[int],
    sinks: Iterable[int],
    n: int,
    region: Region,
    scale: float,
    seed: Optional[int] = None,
    engine: Optional[str] = None,
) -> SeparatedArcs:
    """
    n дуг из A в B, попарно удалённых не меньше чем на σ, с наибольшим найденным σ.

    Двоичный поиск по сетке σ = scale·ratio^(−k) до mesh_h; на каждом σ жадное
    построение (кратчайший путь, удаление его открытой σ-окрестности, повтор)
    с config.restarts перезапусками по случайным порядкам источников. Если ни
    одно σ > mesh_h не достигнуто, возвращаются непересекающиеся дуги с флагом
    fallback и измеренным σ.

    Raises:
        FlowCutError: не существует даже n непересекающихся дуг
    """
    return safe_operation(
        _separated_arcs_impl,
        ErrorType.CONSTRUCTION_ERROR,
        show_cli_error=False,
        operation_name="Поиск разделённых дуг",
        reraise=True,
        space=space,
        sources=sources,
        sinks=sinks,
        n=n,
        region=region,
        scale=scale,
        seed=seed,
        engine=engine,
    )


def _separated_arcs_impl(
    space: MetricSpace,
    sources: Iterable[int],
    sinks: Iterable[int],
    n: int,
    region: Region,
    scale: float,
    seed: Optional[int] = None,
    engine: Optional[str] = None,
) -> SeparatedArcs:
    config = get_config()
    seed = config.seed if seed is None else seed
    mask = region_mask(space, region)
    sources = sorted({int(a) for a in sources})
    sinks = sorted({int(b) for b in sinks})
    base = _disjoint_arcs_impl(space, sources, sinks, n, mask, engine=engine)

    if n == 1:
        return SeparatedArcs(base, float(scale), notes=["n = 1: условие разделения пусто"])

    h = space.mesh_h
    levels = []
    sigma = float(scale)
    while sigma > h + space.tol:
        levels.append(sigma)
        sigma /= config.grid_ratio
    if not levels:
        levels = [h]

    def attempt(level: int):
        return _greedy_with_restarts(
            space, sources, sinks, n, mask, levels[level], seed, config.restarts, config.threads
        )

    # наибольшее σ (наименьший номер уровня), на котором жадный поиск успешен
    found = None
    lo, hi = 0, len(levels) - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        outcome = attempt(mid)
        if outcome is not None:
            found = (mid, outcome)
            hi = mid - 1
        else:
            lo = mid + 1

    if found is None:
        achieved = _pairwise_separation(space, [a.points for a in base])
        log_warning(
            f"Разделённые дуги не найдены выше mesh_h: возвращены непересекающиеся, σ={achieved:.4g}"
        )
        notes = ["σ не найдено выше mesh_h: откат к disjoint_arcs"]
        below_mesh = achieved < h - space.tol
        if below_mesh:
            notes.append(f"σ={achieved:.4g} меньше mesh_h={h:.4g}: разделение не гарантировано")
        return SeparatedArcs(base, achieved, fallback=True, below_mesh=below_mesh, notes=notes)

    level, (restart, paths) = found
    arcs = [DiscreteArc(space, p) for p in paths]
    achieved = _pairwise_separation(space, paths)
    if achieved < levels[level] - space.tol:
        raise ConstructionError(
            f"Проверка разделения не пройдена: {achieved:.6g} < σ={levels[level]:.6g}"
        )
    log_info(f"Разделённые дуги: n={n}, σ={levels[level]:.4g} (перезапуск {restart})")
    return SeparatedArcs(arcs, float(levels[level]), restart=restart)


def _greedy_with_restarts(
    space: MetricSpace,
    sources: List[int],
    sinks: List[int],
    n: int,
    mask: np.ndarray,
    sigma: float,
    seed: int,
    restarts: int,
    threads: int,
):
    """Первый по номеру успешный перезапуск или None."""
    batch = max(1, threads)
    for first in range(0, restarts, batch):
        indices = list(range(first, min(restarts, first + batch)))
        if batch == 1:
            outcomes = [_greedy(space, sources, sinks, n, mask, sigma, seed, indices[0])]
        else:
            with ThreadPoolExecutor(max_workers=batch) as pool:
                outcomes = list(
                    pool.map(
                        lambda j: _greedy(space, sources, sinks, n, mask, sigma, seed, j), indices
                    )
                )
        for j, paths in zip(indices, outcomes):
            if paths is not None:
                return j, paths
    return None


def _greedy(
    space: MetricSpace,
    sources: List[int],
    sinks: List[int],
    n: int,
    mask: np.ndarray,
    sigma: float,
    seed: int,
    restart: int,
) -> Optional[List[List[int]]]:
    """
    Жадное построение: кратчайший путь A → B, удаление его открытой
    σ-окрестности, повтор n раз. Перезапуск 0 берёт все источники сразу,
    остальные перебирают источники в случайном порядке.
    """
    allowed = mask.copy()
    source_set, sink_set = set(sources), set(sinks)
    order = list(sources)
    if restart:
        np.random.default_rng(seed + restart).shuffle(order)
    paths: List[List[int]] = []
    for _ in range(n):
        path = None
        if restart == 0:
            path = shortest_path(space, order, sinks, allowed)
        else:
            for a in order:
                if allowed[a]:
                    path = shortest_path(space, [a], sinks, allowed)
                    if path is not None:
                        break
        if path is None:
            return None
        path = trim_between(path, source_set, sink_set)
        paths.append(path)
        allowed &= ~space.neighborhood_mask(path, sigma)
    log_debug(f"Жадное построение: σ={sigma:.4g}, перезапуск {restart} успешен")
    return paths


def _pairwise_separation(space: MetricSpace, paths: Sequence[Sequence[int]]) -> float:
    best = np.inf
    for i in range(len(paths)):
        for j in range(i + 1, len(paths)):
            best = min(best, space.set_distance(paths[i], paths[j]))
    return float(best)


def untangle_pair(
    space: MetricSpace, paths: Sequence[Sequence[int]], region: np.ndarray
) -> List[List[int]]:
    """Поочерёдно заменяет каждую из двух дуг кратчайшей в области, обходящей другую; концы сохраняются."""
    paths = [list(p) for p in paths]
    for _ in range(2):
        for k in (0, 1):
            mask = region.copy()
            mask[np.asarray(paths[1 - k], dtype=int)] = False
            mask[[paths[k][0], paths[k][-1]]] = True
            candidate = shortest_path(space, [paths[k][0]], [paths[k][-1]], mask)
            if candidate is not None:
                paths[k] = candidate
    return paths
