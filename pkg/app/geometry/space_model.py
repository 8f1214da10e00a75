"""
Конечные метрические пространства: представление, генераторы примеров и (де)сериализация.

Пространство хранит точную попарную метрику (плотной матрицей при n ≤ dense_limit,
иначе строками по запросу), шаг дискретизации mesh_h и «шаговый граф» - пары точек
на расстоянии не больше mesh_h. Все сравнения с порогами выполняются с относительным
допуском REL_TOL·mesh_h, поэтому результат не зависит от масштаба.
"""

import math
import threading
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components, dijkstra, minimum_spanning_tree
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from utils.config import get_config
from utils.error_handler import ErrorType, InputError, MetricAxiomError, safe_operation
from utils.logger import log_debug, log_info

PointId = int

REL_TOL = 1e-9
# Веса шагового графа квантуются в единицах mesh_h / WEIGHT_QUANTUM
WEIGHT_QUANTUM = 1e6
_ROW_CACHE_LIMIT = 4096

METRIC_KINDS = ("explicit", "graph", "euclidean")


class MetricSpace:
    """
    Конечное метрическое пространство с шагом дискретизации.

    Attributes:
        n_points: Число точек
        mesh_h: Шаг дискретизации (порог разрешения)
        metric: Вид метрики: "explicit", "graph" или "euclidean"
        coords: Координаты (n, 2) для отрисовки или None
        edges: Рёбра (m, 3) для графовой метрики или None
        meta: Описание генератора (вид, параметры, особые точки)
        tol: Абсолютный допуск сравнений, REL_TOL·mesh_h
        cache: Кэш производных величин (рабочие константы и т.п.)
    """

    def __init__(
        self,
        n_points: int,
        mesh_h: float,
        metric: str = "explicit",
        *,
        dist: Optional[np.ndarray] = None,
        coords: Optional[np.ndarray] = None,
        edges: Optional[np.ndarray] = None,
        meta: Optional[Dict[str, Any]] = None,
    ):
        if n_points < 1:
            raise InputError(f"Пространство должно содержать хотя бы одну точку: {n_points}")
        if not mesh_h > 0 or not math.isfinite(mesh_h):
            raise InputError(f"mesh_h должен быть положительным числом: {mesh_h}")
        if metric not in METRIC_KINDS:
            raise InputError(f"Неизвестный вид метрики: {metric}")

        self.n_points = int(n_points)
        self.mesh_h = float(mesh_h)
        self.metric = metric
        self.coords = None if coords is None else np.asarray(coords, dtype=float).reshape(-1, 2)
        self.edges = None if edges is None else np.asarray(edges, dtype=float).reshape(-1, 3)
        self.meta: Dict[str, Any] = dict(meta or {})
        self.tol = REL_TOL * self.mesh_h
        self.cache: Dict[str, Any] = {}

        if self.coords is not None and len(self.coords) != self.n_points:
            raise InputError(
                f"Число координат ({len(self.coords)}) не совпадает с n ({self.n_points})"
            )

        self._dist: Optional[np.ndarray] = None
        self._rows: Dict[int, np.ndarray] = {}
        self._rows_lock = threading.Lock()
        self._adjacency: Optional[sparse.csr_matrix] = None
        self._step_graph: Optional[sparse.csr_matrix] = None
        self._step_lengths: Optional[np.ndarray] = None
        self._diameter: Optional[float] = None

        self._materialize(dist)

    # ------------------------------------------------------------------ метрика

    def _materialize(self, dist: Optional[np.ndarray]) -> None:
        n = self.n_points
        dense = n <= get_config().dense_limit

        if self.metric == "explicit":
            if dist is None:
                raise InputError("Для метрики 'explicit' нужна матрица расстояний")
            matrix = np.asarray(dist, dtype=float)
            if matrix.size != n * n:
                raise InputError(f"Матрица расстояний должна содержать {n * n} чисел")
            self._dist = matrix.reshape(n, n).copy()
        elif self.metric == "euclidean":
            if self.coords is None:
                raise InputError("Для метрики 'euclidean' нужны координаты")
            if dense:
                self._dist = cdist(self.coords, self.coords)
        else:
            if self.edges is None:
                raise InputError("Для метрики 'graph' нужен список рёбер")
            self._adjacency = _edges_to_csr(self.edges, n)
            if dense:
                matrix = dijkstra(self._adjacency, directed=False)
                if np.isinf(matrix).any():
                    raise InputError("Граф рёбер несвязен: кратчайшие расстояния бесконечны")
                self._dist = np.minimum(matrix, matrix.T)

        if self._dist is not None:
            self._dist.setflags(write=False)
        log_debug(
            f"Пространство: n={n}, mesh_h={self.mesh_h:.6g}, metric={self.metric}, "
            f"dense={self._dist is not None}"
        )

    @property
    def is_dense(self) -> bool:
        return self._dist is not None

    @property
    def dense_matrix(self) -> Optional[np.ndarray]:
        """Плотная матрица расстояний (только чтение) или None."""
        return self._dist

    def row(self, a: PointId) -> np.ndarray:
        """Расстояния от точки a до всех точек."""
        if self._dist is not None:
            return self._dist[a]
        with self._rows_lock:
            cached = self._rows.get(a)
        if cached is not None:
            return cached
        if self.metric == "euclidean":
            diff = self.coords - self.coords[a]
            values = np.sqrt((diff * diff).sum(axis=1))
        else:
            values = dijkstra(self._adjacency, directed=False, indices=a)
            if np.isinf(values).any():
                raise InputError("Граф рёбер несвязен: кратчайшие расстояния бесконечны")
        values.setflags(write=False)
        with self._rows_lock:
            if len(self._rows) >= _ROW_CACHE_LIMIT:
                self._rows.pop(next(iter(self._rows)))
            self._rows[a] = values
        return values

    def dist(self, a: PointId, b: PointId) -> float:
        if self._dist is not None:
            return float(self._dist[a, b])
        return float(self.row(a)[b])

    def block(self, rows: Sequence[int], cols: Optional[Sequence[int]] = None) -> np.ndarray:
        """Подматрица расстояний rows × cols (cols=None - все точки)."""
        rows = np.asarray(rows, dtype=int)
        if self._dist is not None:
            if cols is None:
                return self._dist[rows]
            return self._dist[np.ix_(rows, np.asarray(cols, dtype=int))]
        stacked = np.vstack([self.row(int(a)) for a in rows]) if len(rows) else np.empty(
            (0, self.n_points)
        )
        if cols is None:
            return stacked
        return stacked[:, np.asarray(cols, dtype=int)]

    def dist_to_set(self, points: Iterable[int]) -> np.ndarray:
        """d(z, P) для всех z."""
        points = np.fromiter(points, dtype=int)
        if len(points) == 0:
            return np.full(self.n_points, np.inf)
        result = np.full(self.n_points, np.inf)
        for start in range(0, len(points), 512):
            chunk = self.block(points[start : start + 512])
            np.minimum(result, chunk.min(axis=0), out=result)
        return result

    def set_distance(self, first: Iterable[int], second: Iterable[int]) -> float:
        """d(P, Q) = min расстояние между множествами."""
        second = np.fromiter(second, dtype=int)
        if len(second) == 0:
            return math.inf
        values = self.dist_to_set(first)
        return float(values[second].min())

    def diameter(self) -> float:
        """Диаметр пространства (для разреженного режима - оценка двойным обходом)."""
        if self._diameter is None:
            if self._dist is not None:
                self._diameter = float(self._dist.max())
            else:
                a = 0
                best = 0.0
                for _ in range(4):
                    values = self.row(a)
                    b = int(np.argmax(values))
                    best = max(best, float(values[b]))
                    a = b
                self._diameter = best
        return self._diameter

    def set_diameter(self, points: Sequence[int]) -> float:
        points = np.asarray(points, dtype=int)
        if len(points) < 2:
            return 0.0
        return float(self.block(points, points).max())

    # ------------------------------------------------------------- сравнения

    def less(self, value: float, threshold: float) -> bool:
        """value < threshold с допуском (равенство с точностью tol - не меньше)."""
        return value < threshold - self.tol

    def at_most(self, value: float, threshold: float) -> bool:
        return value <= threshold + self.tol

    # ------------------------------------------------------------------ шары

    def ball_mask(self, x: PointId, r: float) -> np.ndarray:
        """Открытый шар B(x, r) = {y : d(x,y) < r}."""
        return self.row(x) < r - self.tol

    def closed_ball_mask(self, x: PointId, r: float) -> np.ndarray:
        return self.row(x) <= r + self.tol

    def annulus_mask(self, x: PointId, r: float, big_r: float) -> np.ndarray:
        """Замкнутый аннулус A(x, r, R) = B̄(x, R) \\ B(x, r)."""
        values = self.row(x)
        return (values >= r - self.tol) & (values <= big_r + self.tol)

    def neighborhood_mask(self, points: Iterable[int], r: float) -> np.ndarray:
        """Открытая r-окрестность множества."""
        return self.dist_to_set(points) < r - self.tol

    # ---------------------------------------------------------- шаговый граф

    @property
    def step_graph(self) -> sparse.csr_matrix:
        """Шаговый граф с квантованными весами (целые единицы mesh_h/10⁶)."""
        if self._step_graph is None:
            self._build_step_graph()
        return self._step_graph

    def neighbors(self, a: PointId) -> np.ndarray:
        graph = self.step_graph
        return graph.indices[graph.indptr[a] : graph.indptr[a + 1]]

    def min_separation(self) -> float:
        """Минимальное расстояние между различными точками."""
        if self.n_points < 2:
            return math.inf
        if self._step_lengths is None:
            self._build_step_graph()
        return float(self._step_lengths.min())

    def quantize(self, lengths: np.ndarray) -> np.ndarray:
        return np.maximum(1.0, np.rint(np.asarray(lengths) / self.mesh_h * WEIGHT_QUANTUM))

    def _build_step_graph(self) -> None:
        n = self.n_points
        limit = self.mesh_h + self.tol
        rows: List[np.ndarray] = []
        cols: List[np.ndarray] = []

        if self._dist is not None:
            for start in range(0, n, 2048):
                chunk = self._dist[start : start + 2048]
                r, c = np.nonzero(chunk <= limit)
                r = r + start
                keep = r != c
                rows.append(r[keep])
                cols.append(c[keep])
        elif self.metric == "euclidean":
            pairs = cKDTree(self.coords).query_pairs(limit, output_type="ndarray")
            rows.extend([pairs[:, 0], pairs[:, 1]])
            cols.extend([pairs[:, 1], pairs[:, 0]])
        else:
            # Без плотной матрицы шаговыми считаются только короткие рёбра
            short = self.edges[self.edges[:, 2] <= limit]
            a = short[:, 0].astype(int)
            b = short[:, 1].astype(int)
            rows.extend([a, b])
            cols.extend([b, a])

        r = np.concatenate(rows) if rows else np.empty(0, dtype=int)
        c = np.concatenate(cols) if cols else np.empty(0, dtype=int)
        if self._dist is not None:
            lengths = self._dist[r, c]
        elif self.metric == "euclidean":
            lengths = np.sqrt(((self.coords[r] - self.coords[c]) ** 2).sum(axis=1))
        else:
            lengths = np.concatenate([short[:, 2], short[:, 2]])

        self._step_lengths = lengths
        graph = sparse.csr_matrix((self.quantize(lengths), (r, c)), shape=(n, n))
        graph.sum_duplicates()
        graph.sort_indices()
        self._step_graph = graph
        log_debug(f"Шаговый граф: {graph.nnz // 2} рёбер")

    # ------------------------------------------------------------- прочее

    def scaled(self, factor: float) -> "MetricSpace":
        """Та же структура с расстояниями, умноженными на factor > 0."""
        if not factor > 0:
            raise InputError(f"Коэффициент масштаба должен быть положительным: {factor}")
        meta = dict(self.meta)
        meta["scale"] = meta.get("scale", 1.0) * factor
        coords = None if self.coords is None else self.coords * factor
        if self.metric == "explicit":
            return MetricSpace(
                self.n_points, self.mesh_h * factor, "explicit",
                dist=np.asarray(self._dist) * factor, coords=coords, meta=meta,
            )
        if self.metric == "euclidean":
            return MetricSpace(
                self.n_points, self.mesh_h * factor, "euclidean", coords=coords, meta=meta
            )
        edges = self.edges.copy()
        edges[:, 2] *= factor
        return MetricSpace(
            self.n_points, self.mesh_h * factor, "graph", edges=edges, coords=coords, meta=meta
        )

    def __repr__(self) -> str:
        kind = self.meta.get("generator", self.metric)
        return f"MetricSpace({kind}, n={self.n_points}, mesh_h={self.mesh_h:.6g})"


@dataclass(frozen=True)
class Ball:
    """Открытый шар B(center, r)."""

    center: PointId
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise InputError(f"Радиус шара должен быть положительным: {self.r}")

    def mask(self, space: MetricSpace) -> np.ndarray:
        return space.ball_mask(self.center, self.r)

    def contains(self, space: MetricSpace, y: PointId) -> bool:
        return space.less(space.dist(self.center, y), self.r)


@dataclass(frozen=True)
class Annulus:
    """Аннулус A(center, r, R) = B̄(center, R) \\ B(center, r)."""

    center: PointId
    r: float
    big_r: float

    def __post_init__(self):
        if not 0 < self.r <= self.big_r:
            raise InputError(f"Нужно 0 < r ≤ R: r={self.r}, R={self.big_r}")

    def mask(self, space: MetricSpace) -> np.ndarray:
        return space.annulus_mask(self.center, self.r, self.big_r)

    def contains(self, space: MetricSpace, y: PointId) -> bool:
        d = space.dist(self.center, y)
        return not space.less(d, self.r) and space.at_most(d, self.big_r)


# ------------------------------------------------------------------ проверки


def _edges_to_csr(edges: np.ndarray, n: int) -> sparse.csr_matrix:
    a = edges[:, 0].astype(int)
    b = edges[:, 1].astype(int)
    w = edges[:, 2]
    if len(edges) and (a.min() < 0 or b.min() < 0 or a.max() >= n or b.max() >= n):
        raise InputError("Ребро ссылается на несуществующую точку")
    if len(edges) and not (w > 0).all():
        raise InputError("Веса рёбер должны быть положительными")
    # Для кратных рёбер берётся минимальный вес
    order = np.lexsort((w, np.minimum(a, b), np.maximum(a, b)))
    lo = np.minimum(a, b)[order]
    hi = np.maximum(a, b)[order]
    w = w[order]
    first = np.ones(len(lo), dtype=bool)
    first[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
    lo, hi, w = lo[first], hi[first], w[first]
    return sparse.csr_matrix(
        (np.concatenate([w, w]), (np.concatenate([lo, hi]), np.concatenate([hi, lo]))),
        shape=(n, n),
    )


def verify_metric_axioms(space: MetricSpace, seed: int = 0) -> None:
    """
    Проверяет аксиомы метрики: нули ровно на диагонали, симметрию и неравенство
    треугольника (полным перебором при n ≤ exhaustive_metric_limit, иначе случайной
    выборкой троек).

    Raises:
        MetricAxiomError: со свидетелем (a, b) или (a, b, c), где d(a,c) > d(a,b)+d(b,c)
    """
    config = get_config()
    n = space.n_points
    tol = space.tol

    if space.is_dense:
        matrix = space.dense_matrix
        diagonal = np.nonzero(np.abs(np.diag(matrix)) > 0)[0]
        if len(diagonal):
            a = int(diagonal[0])
            raise MetricAxiomError(f"Ненулевое расстояние d({a},{a})", (a, a))
        off = matrix.copy()
        np.fill_diagonal(off, np.inf)
        zero = np.argwhere(~(off > 0))
        if len(zero):
            a, b = (int(v) for v in zero[0])
            raise MetricAxiomError(
                f"Расстояние d({a},{b}) = {matrix[a, b]} не положительно", (a, b)
            )
        asym = np.argwhere(np.triu(np.abs(matrix - matrix.T) > tol))
        if len(asym):
            a, b = (int(v) for v in asym[0])
            raise MetricAxiomError(
                f"Нарушена симметрия: d({a},{b}) = {matrix[a, b]}, d({b},{a}) = {matrix[b, a]}",
                (a, b),
            )

    if n <= config.exhaustive_metric_limit and space.is_dense:
        matrix = space.dense_matrix
        for b in range(n):
            bound = matrix[:, b][:, None] + matrix[b, :][None, :]
            bad = np.argwhere(matrix > bound + tol)
            if len(bad):
                a, c = (int(v) for v in bad[0])
                _raise_triangle(space, a, b, c)
        log_info(f"Аксиомы метрики проверены полным перебором (n={n})")
        return

    rng = np.random.default_rng(seed)
    samples = config.metric_samples
    if space.is_dense:
        matrix = space.dense_matrix
        a, b, c = rng.integers(0, n, size=(3, samples))
        bad = np.nonzero(matrix[a, c] > matrix[a, b] + matrix[b, c] + tol)[0]
        if len(bad):
            i = int(bad[0])
            _raise_triangle(space, int(a[i]), int(b[i]), int(c[i]))
    else:
        anchors = rng.choice(n, size=min(n, 64), replace=False)
        rows = space.block(anchors)
        per_pair = max(1, samples // (len(anchors) ** 2))
        for ia, a in enumerate(anchors):
            for ib, b in enumerate(anchors):
                c = rng.integers(0, n, size=per_pair)
                bad = np.nonzero(rows[ia, c] > rows[ia, b] + rows[ib, c] + tol)[0]
                if len(bad):
                    _raise_triangle(space, int(a), int(b), int(c[bad[0]]))
    log_info(f"Аксиомы метрики проверены выборкой ({samples} троек)")


def _raise_triangle(space: MetricSpace, a: int, b: int, c: int) -> None:
    raise MetricAxiomError(
        f"Нарушено неравенство треугольника: d({a},{c}) = {space.dist(a, c):.12g} > "
        f"d({a},{b}) + d({b},{c}) = {space.dist(a, b) + space.dist(b, c):.12g}",
        (a, b, c),
    )


def verify_step_graph(space: MetricSpace) -> None:
    """Шаговый граф связен и у каждой точки есть сосед на расстоянии ≤ mesh_h."""
    if space.n_points == 1:
        return
    graph = space.step_graph
    degrees = np.diff(graph.indptr)
    lonely = np.nonzero(degrees == 0)[0]
    if len(lonely):
        raise InputError(
            f"Точка {int(lonely[0])} не имеет соседей на расстоянии ≤ mesh_h={space.mesh_h:.6g}"
        )
    count, _ = connected_components(graph, directed=False)
    if count != 1:
        raise InputError(f"Шаговый граф несвязен: {count} компонент")


def _finish(space: MetricSpace) -> MetricSpace:
    verify_step_graph(space)
    verify_metric_axioms(space, seed=get_config().seed)
    return space


# ---------------------------------------------------------------- генераторы


def generate_grid_square(k: int) -> MetricSpace:
    """
    Решётка (k+1)² точек (i/k, j/k) единичного квадрата с евклидовой метрикой.

    Точка (i, j) имеет индекс i·(k+1) + j; mesh_h = √2/k.
    """
    return safe_operation(
        _generate_grid_square_impl,
        ErrorType.INPUT_ERROR,
        show_cli_error=False,
        operation_name="Генерация квадрата-решётки",
        reraise=True,
        k=k,
    )


def _generate_grid_square_impl(k: int) -> MetricSpace:
    if k < 2:
        raise InputError(f"Для квадрата-решётки нужно k ≥ 2: {k}")
    ii, jj = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
    coords = np.stack([ii.ravel(), jj.ravel()], axis=1) / k
    meta = {"generator": "grid", "k": int(k)}
    space = MetricSpace((k + 1) ** 2, math.sqrt(2) / k, "euclidean", coords=coords, meta=meta)
    return _finish(space)


def grid_index(k: int, i: int, j: int) -> PointId:
    """Индекс точки (i/k, j/k) квадрата-решётки."""
    return i * (k + 1) + j


def grid_corners(k: int) -> List[PointId]:
    """Углы (0,0), (0,1), (1,0), (1,1) квадрата-решётки."""
    return [0, k, k * (k + 1), (k + 1) ** 2 - 1]


def generate_sierpinski_carpet(level: int, metric: str = "intrinsic") -> MetricSpace:
    """
    Приближение ковра Серпинского уровня level.

    Клетка (a, b) решётки 3^level × 3^level уцелевает, если ни в одном троичном
    разряде обе координаты не равны 1. Точки - вершины уцелевших клеток; метрика -
    кратчайший путь по сторонам и диагоналям уцелевших клеток ("intrinsic") либо
    евклидова ("euclidean"). mesh_h равен стороне клетки.
    """
    return safe_operation(
        _generate_sierpinski_carpet_impl,
        ErrorType.INPUT_ERROR,
        show_cli_error=False,
        operation_name="Генерация ковра Серпинского",
        reraise=True,
        level=level,
        metric=metric,
    )


def carpet_cells(level: int) -> np.ndarray:
    """Маска уцелевших клеток ковра уровня level (m × m)."""
    m = 3**level
    a, b = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    alive = np.ones((m, m), dtype=bool)
    for _ in range(level):
        alive &= ~((a % 3 == 1) & (b % 3 == 1))
        a, b = a // 3, b // 3
    return alive


def _generate_sierpinski_carpet_impl(level: int, metric: str = "intrinsic") -> MetricSpace:
    if not 1 <= level <= 5:
        raise InputError(f"Уровень ковра должен быть от 1 до 5: {level}")
    if metric not in ("intrinsic", "euclidean"):
        raise InputError(f"Неизвестная метрика ковра: {metric}")

    m = 3**level
    alive = carpet_cells(level)
    used = np.zeros((m + 1, m + 1), dtype=bool)
    cells = np.argwhere(alive)
    for di in (0, 1):
        for dj in (0, 1):
            used[cells[:, 0] + di, cells[:, 1] + dj] = True
    index = -np.ones((m + 1, m + 1), dtype=int)
    vertices = np.argwhere(used)
    index[vertices[:, 0], vertices[:, 1]] = np.arange(len(vertices))
    coords = vertices / m
    meta = {"generator": "carpet", "level": int(level), "cells": int(alive.sum()), "metric": metric}

    if metric == "euclidean":
        space = MetricSpace(len(vertices), 1.0 / m, "euclidean", coords=coords, meta=meta)
        return _finish(space)

    i, j = cells[:, 0], cells[:, 1]
    side, diag = 1.0 / m, math.sqrt(2) / m
    pairs = [
        (index[i, j], index[i + 1, j], side),
        (index[i, j], index[i, j + 1], side),
        (index[i + 1, j], index[i + 1, j + 1], side),
        (index[i, j + 1], index[i + 1, j + 1], side),
        (index[i, j], index[i + 1, j + 1], diag),
        (index[i + 1, j], index[i, j + 1], diag),
    ]
    edges = np.concatenate(
        [np.stack([a, b, np.full(len(a), w)], axis=1) for a, b, w in pairs], axis=0
    )
    space = MetricSpace(len(vertices), side, "graph", edges=edges, coords=coords, meta=meta)
    return _finish(space)


def generate_circle(k: int) -> MetricSpace:
    """k равноотстоящих точек единичной окружности с хордовой метрикой."""
    return safe_operation(
        _generate_circle_impl,
        ErrorType.INPUT_ERROR,
        show_cli_error=False,
        operation_name="Генерация окружности",
        reraise=True,
        k=k,
    )


def _generate_circle_impl(k: int) -> MetricSpace:
    if k < 8:
        raise InputError(f"Для окружности нужно k ≥ 8: {k}")
    theta = 2 * np.pi * np.arange(k) / k
    coords = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    steps = np.sqrt(((coords - np.roll(coords, -1, axis=0)) ** 2).sum(axis=1))
    meta = {"generator": "circle", "k": int(k)}
    space = MetricSpace(k, float(steps.max()), "euclidean", coords=coords, meta=meta)
    return _finish(space)


def generate_glued_squares(k: int) -> MetricSpace:
    """
    Два квадрата-решётки, склеенные в одном углу: [0,1]² и [1,2]², общая точка (1,1).

    Метрика - кратчайший путь по 8-соседству внутри каждого квадрата, так что
    квадраты связаны только через точку склейки (meta["glue_point"]).
    """
    return safe_operation(
        _generate_glued_squares_impl,
        ErrorType.INPUT_ERROR,
        show_cli_error=False,
        operation_name="Генерация склеенных квадратов",
        reraise=True,
        k=k,
    )


def _octile_edges(index: np.ndarray, k: int) -> List[np.ndarray]:
    side, diag = 1.0 / k, math.sqrt(2) / k
    blocks = []
    for di, dj, w in ((1, 0, side), (0, 1, side), (1, 1, diag), (1, -1, diag)):
        i0, i1 = max(0, -di), k + 1 - max(0, di)
        j0, j1 = max(0, -dj), k + 1 - max(0, dj)
        a = index[i0:i1, j0:j1].ravel()
        b = index[i0 + di : i1 + di, j0 + dj : j1 + dj].ravel()
        blocks.append(np.stack([a, b, np.full(len(a), w)], axis=1))
    return blocks


def _generate_glued_squares_impl(k: int) -> MetricSpace:
    if k < 2:
        raise InputError(f"Для склеенных квадратов нужно k ≥ 2: {k}")
    first = np.arange((k + 1) ** 2).reshape(k + 1, k + 1)
    glue = int(first[k, k])
    second = np.empty((k + 1, k + 1), dtype=int)
    second[0, 0] = glue
    rest = (k + 1) ** 2 - 1
    second.ravel()[1:] = (k + 1) ** 2 + np.arange(rest)

    ii, jj = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
    grid = np.stack([ii.ravel(), jj.ravel()], axis=1) / k
    coords = np.concatenate([grid, 1.0 + grid[1:]], axis=0)
    edges = np.concatenate(_octile_edges(first, k) + _octile_edges(second, k), axis=0)
    meta = {"generator": "glued", "k": int(k), "glue_point": glue}
    space = MetricSpace(
        len(coords), math.sqrt(2) / k, "graph", edges=edges, coords=coords, meta=meta
    )
    return _finish(space)


def generate_cusp(k: int) -> MetricSpace:
    """
    Точки решётки шага 1/k в области {0 ≤ x ≤ 1, |y| ≤ x²} с евклидовой метрикой.

    Остриё (0,0) хранится в meta["tip"].
    """
    return safe_operation(
        _generate_cusp_impl,
        ErrorType.INPUT_ERROR,
        show_cli_error=False,
        operation_name="Генерация области с остриём",
        reraise=True,
        k=k,
    )


def _generate_cusp_impl(k: int) -> MetricSpace:
    if k < 2:
        raise InputError(f"Для области с остриём нужно k ≥ 2: {k}")
    points = [(i, j) for i in range(k + 1) for j in range(-k, k + 1) if abs(j) * k <= i * i]
    lattice = np.asarray(points, dtype=float)
    coords = lattice / k
    tip = points.index((0, 0))
    meta = {"generator": "cusp", "k": int(k), "tip": tip}
    space = MetricSpace(len(coords), math.sqrt(2) / k, "euclidean", coords=coords, meta=meta)
    return _finish(space)


def from_distance_matrix(
    matrix: np.ndarray,
    mesh_h: Optional[float] = None,
    coords: Optional[np.ndarray] = None,
) -> MetricSpace:
    """
    Явное пространство по матрице расстояний.

    Если mesh_h не задан, берётся наименьший шаг, при котором шаговый граф связен
    (максимальное ребро минимального остовного дерева).
    """
    matrix = np.asarray(matrix, dtype=float)
    if mesh_h is None:
        mesh_h = _bottleneck_mesh(matrix)
    space = MetricSpace(len(matrix), mesh_h, "explicit", dist=matrix, coords=coords)
    return _finish(space)


def from_graph_edges(
    n_points: int,
    edges: Sequence[Sequence[float]],
    mesh_h: Optional[float] = None,
    coords: Optional[np.ndarray] = None,
) -> MetricSpace:
    """Пространство с метрикой кратчайших путей графа."""
    edges = np.asarray(edges, dtype=float).reshape(-1, 3)
    if mesh_h is None:
        mesh_h = float(edges[:, 2].max()) if len(edges) else 1.0
    space = MetricSpace(n_points, mesh_h, "graph", edges=edges, coords=coords)
    return _finish(space)


def _bottleneck_mesh(matrix: np.ndarray) -> float:
    if len(matrix) < 2:
        return 1.0
    tree = minimum_spanning_tree(sparse.csr_matrix(matrix))
    return float(tree.data.max())


# ------------------------------------------------------------ сериализация


def save_space(space: MetricSpace) -> Dict[str, Any]:
    """Документ JSON-схемы пространства."""
    document: Dict[str, Any] = {
        "n": space.n_points,
        "mesh_h": space.mesh_h,
        "coords": None if space.coords is None else space.coords.tolist(),
        "metric": space.metric,
    }
    if space.metric == "explicit":
        document["dist"] = np.asarray(space.dense_matrix).ravel().tolist()
    elif space.metric == "graph":
        document["edges"] = [[int(a), int(b), float(w)] for a, b, w in space.edges]
    if space.meta:
        document["meta"] = dict(space.meta)
    return document


def load_space(document: Any) -> MetricSpace:
    """
    Разбирает документ пространства и проверяет аксиомы метрики.

    Raises:
        InputError: нарушение схемы
        MetricAxiomError: нарушение аксиом (со свидетелем)
    """
    return safe_operation(
        _load_space_impl,
        ErrorType.INPUT_ERROR,
        show_cli_error=False,
        operation_name="Загрузка пространства",
        reraise=True,
        document=document,
    )


def _load_space_impl(document: Any) -> MetricSpace:
    if not isinstance(document, dict):
        raise InputError("Документ пространства должен быть JSON-объектом")
    for key in ("n", "mesh_h", "metric"):
        if key not in document:
            raise InputError(f"В документе пространства нет поля '{key}'")

    n = document["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InputError(f"Поле 'n' должно быть положительным целым: {n!r}")
    mesh_h = document["mesh_h"]
    if not isinstance(mesh_h, (int, float)) or isinstance(mesh_h, bool):
        raise InputError(f"Поле 'mesh_h' должно быть числом: {mesh_h!r}")
    metric = document["metric"]
    if metric not in METRIC_KINDS:
        raise InputError(f"Поле 'metric' должно быть одним из {METRIC_KINDS}: {metric!r}")

    coords = document.get("coords")
    if coords is not None:
        if not isinstance(coords, list) or any(
            not isinstance(p, list) or len(p) != 2 for p in coords
        ):
            raise InputError("Поле 'coords' должно быть списком пар [x, y] или null")
        if len(coords) != n:
            raise InputError(f"Поле 'coords' должно содержать {n} точек")
        coords = np.asarray(coords, dtype=float)

    meta = document.get("meta") or {}
    if metric == "explicit":
        dist = document.get("dist")
        if not isinstance(dist, list) or len(dist) != n * n:
            raise InputError(f"Поле 'dist' должно быть списком из {n * n} чисел")
        space = MetricSpace(n, float(mesh_h), "explicit", dist=np.asarray(dist, dtype=float),
                            coords=coords, meta=meta)
    elif metric == "graph":
        edges = document.get("edges")
        if not isinstance(edges, list) or any(
            not isinstance(e, list) or len(e) != 3 for e in edges
        ):
            raise InputError("Поле 'edges' должно быть списком троек [a, b, w]")
        space = MetricSpace(n, float(mesh_h), "graph", edges=np.asarray(edges, dtype=float),
                            coords=coords, meta=meta)
    else:
        if coords is None:
            raise InputError("Для метрики 'euclidean' поле 'coords' обязательно")
        space = MetricSpace(n, float(mesh_h), "euclidean", coords=coords, meta=meta)

    # Аксиомы проверяются раньше шагового графа: свидетель нарушения важнее
    verify_metric_axioms(space, seed=get_config().seed)
    verify_step_graph(space)
    return space
