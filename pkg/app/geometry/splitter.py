"""
Расщепление квазидуги на две относительно разделённые квазидуги с общими
концами, сборка из них квазиокружности и итерация до n дуг между двумя точками.

Дуга A[a,b] размечается маркерами x_{±i} на расстояниях δ^i·d(a,b) от концов;
чётные куски A_{2i} расщепляются разделёнными путями внутри трубки, нечётные
куски сшивают соседние пары («расстёгивание»), крайние нечётные куски
подводят обе дуги к концам a, b. Все построения идут внутри конуса
{z : d(z,A) ≤ ε·d(z,{a,b})} и «воротника» у концов.
"""

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from geometry.arc_model import (
    ConstructionReport,
    DiscreteArc,
    arc_separation,
    check_follows,
    concatenate_to_circle,
    cone_epsilon,
    measure_circle_lambda,
    measure_lambda,
)
from geometry.connecting_arcs import _disjoint_arcs_impl, _separated_arcs_impl, untangle_pair
from geometry.graph_ops import loop_erase, shortest_path
from geometry.invariants import estimate_working_constants
from geometry.space_model import MetricSpace
from geometry.straightener import _straighten_impl
from utils.config import get_config
from utils.construction_trace import ConstructionTrace
from utils.error_handler import (
    ConstructionError,
    ErrorType,
    FlowCutError,
    InputError,
    QcfError,
    ResolutionError,
    safe_operation,
)
from utils.logger import log_info, log_warning

Pair = Tuple[List[int], List[int]]


def _floor_mult() -> float:
    """Порог разрешения в единицах mesh_h, ниже которого оценки ε и η не проверяются."""
    return get_config().mesh_floor_mult



# ---------------------------------------------------------------- каркас


@dataclass
class SplitScaffold:
    """
    Каркас расщепления дуги.

    Все радиусы хранятся в единицах длины пространства (масштаб d(a,b) уже учтён).

    Attributes:
        arc: Исходная λ₀-квазидуга
        lambda0: Константа квазидуги λ₀
        eps: ε ∈ (0, 1)
        unit: d(a, b)
        delta: δ = 1/(10λ₀)
        d1: D₁ = εδ/(3λ₀)
        d2: D₂ = D₁δ/(10λ₀L)
        depth: Глубина маркеров M (нечётная или 0)
        markers: Позиции маркеров x_i в дуге, i = ±1..±M
        notes: Замечания построения
    """

    arc: DiscreteArc
    lambda0: float
    eps: float
    unit: float
    delta: float
    d1: float
    d2: float
    depth: int
    markers: Dict[int, int]
    notes: List[str] = field(default_factory=list)

    @property
    def space(self) -> MetricSpace:
        return self.arc.space

    def pieces(self) -> List[int]:
        return list(range(-self.depth, self.depth + 1))

    def even_pieces(self) -> List[int]:
        return [i for i in self.pieces() if i % 2 == 0]

    def marker_position(self, i: int) -> int:
        """Позиция x_i; за пределами глубины маркерами служат концы a и b."""
        if i < -self.depth:
            return 0
        if i > self.depth:
            return len(self.arc) - 1
        return self.markers[i]

    def piece_bounds(self, i: int) -> Tuple[int, int]:
        """Позиции концов куска A_i."""
        if self.depth == 0:
            return 0, len(self.arc) - 1
        if i < 0:
            return self.marker_position(i - 1), self.marker_position(i)
        if i == 0:
            return self.marker_position(-1), self.marker_position(1)
        return self.marker_position(i), self.marker_position(i + 1)

    def piece_points(self, i: int) -> Tuple[int, ...]:
        start, end = self.piece_bounds(i)
        return self.arc.points[start : end + 1]

    def ball_radius(self, i: int) -> float:
        return self.d1 * self.delta ** abs(i) * self.unit

    def tube_radius(self, i: int) -> float:
        return self.d2 * self.delta ** abs(i) * self.unit

    def ball_mask(self, i: int, fraction: float = 1.0) -> np.ndarray:
        x = self.arc.points[self.marker_position(i)]
        return self.space.ball_mask(x, fraction * self.ball_radius(i))

    def tube_mask(self, i: int, fraction: float = 1.0) -> np.ndarray:
        return self.space.neighborhood_mask(self.piece_points(i), fraction * self.tube_radius(i))

    def working_tube(self, i: int) -> float:
        """Рабочий радиус трубки: ¼D₂δ^|i|, но не меньше 2·mesh_h."""
        return max(0.25 * self.tube_radius(i), 2 * self.space.mesh_h)

    def working_gate(self, i: int) -> float:
        """Рабочий радиус ворот у маркера: ¼D₁δ^|i|, но не меньше 2·mesh_h."""
        return max(0.25 * self.ball_radius(i), 2 * self.space.mesh_h)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda0": self.lambda0,
            "eps": self.eps,
            "unit": self.unit,
            "delta": self.delta,
            "D1": self.d1,
            "D2": self.d2,
            "depth": self.depth,
            "markers": {str(i): int(self.arc.points[p]) for i, p in sorted(self.markers.items())},
            "notes": list(self.notes),
        }


def build_scaffold(
    arc: DiscreteArc, lambda0: float, eps: float, L: Optional[float] = None
) -> SplitScaffold:
    """
    Строит каркас: маркеры, D₁, D₂, шары B_i и трубки V_i; проверяет
    взаимное расположение шаров и трубок перебором.

    Args:
        arc: λ₀-квазидуга с концами не ближе 8·mesh_h
        lambda0: Измеренная константа λ₀ ≥ 1
        eps: ε (приводится в интервал (0, 1))
        L: Константа связности (по умолчанию рабочая оценка пространства)

    Raises:
        ResolutionError: шаг дискретизации слишком груб для дуги
        ConstructionError: нарушены свойства каркаса (λ₀ занижена)
    """
    return safe_operation(
        _build_scaffold_impl,
        ErrorType.CONSTRUCTION_ERROR,
        show_cli_error=False,
        operation_name="Построение каркаса расщепления",
        reraise=True,
        arc=arc,
        lambda0=lambda0,
        eps=eps,
        L=L,
    )


def _build_scaffold_impl(
    arc: DiscreteArc, lambda0: float, eps: float, L: Optional[float] = None
) -> SplitScaffold:
    space = arc.space
    h, tol = space.mesh_h, space.tol
    notes: List[str] = []
    if lambda0 < 1:
        raise InputError(f"Константа квазидуги λ₀={lambda0:.6g} меньше 1")
    if eps <= 0:
        raise InputError(f"ε должно быть положительным: {eps}")
    if eps >= 1:
        notes.append(f"ε={eps:.4g} приведено к 0.99")
        eps = 0.99
    unit = space.dist(arc.start, arc.end)
    if unit < 8 * h - tol:
        raise ResolutionError(
            f"d(a,b)={unit:.6g} меньше 8·mesh_h: шаг дискретизации слишком груб", achieved=0
        )
    if L is None:
        L = estimate_working_constants(space).L

    delta = 1.0 / (10 * lambda0)
    d1 = eps * delta / (3 * lambda0)
    d2 = d1 * delta / (10 * lambda0 * L)

    from_a = space.row(arc.start)[arc.array]
    from_b = space.row(arc.end)[arc.array]
    markers: Dict[int, int] = {}
    depth = 0
    while True:
        threshold = delta ** (depth + 1) * unit
        if threshold < _floor_mult() * h - tol:
            break
        left = np.nonzero(from_a >= threshold - tol)[0]
        right = np.nonzero(from_b >= threshold - tol)[0]
        if not len(left) or not len(right):
            break
        pos_left, pos_right = int(left[0]), int(right[-1])
        inner_left = markers.get(-depth, len(arc)) if depth else len(arc)
        inner_right = markers.get(depth, -1) if depth else -1
        if depth and (pos_left >= inner_left or pos_right <= inner_right):
            break
        if not depth and pos_left >= pos_right:
            break
        depth += 1
        markers[-depth], markers[depth] = pos_left, pos_right

    natural = depth
    if depth and depth % 2 == 0:
        markers.pop(-depth)
        markers.pop(depth)
        depth -= 1
        notes.append(f"глубина маркеров {natural} уменьшена до нечётной {depth}")
    notes.append(
        f"маркеры ограничены масштабом {_floor_mult():g}·mesh_h: глубина {depth}; "
        f"оценки ε и η проверяются при d(z,{{a,b}}) ≥ {_floor_mult():g}·mesh_h"
    )

    scaffold = SplitScaffold(arc, lambda0, eps, unit, delta, d1, d2, depth, markers, notes)
    failures = verify_scaffold(scaffold)
    if failures:
        raise ConstructionError(
            "Каркас не прошёл проверку (λ₀ занижена, пересчитайте): " + "; ".join(failures[:5])
        )
    log_info(f"Каркас: δ={delta:.4g}, D₁={d1:.4g}, D₂={d2:.4g}, глубина {depth}")
    return scaffold


def verify_scaffold(scaffold: SplitScaffold) -> List[str]:
    """
    Перебором проверяет каркас: шары B_i попарно не пересекаются; трубка
    внутреннего куска не задевает дальние шары и трубки; соседние трубки
    пересекаются только внутри шара общего маркера.
    """
    failures: List[str] = []
    if scaffold.depth == 0:
        return failures
    markers = sorted(scaffold.markers)
    balls = {i: scaffold.ball_mask(i) for i in markers}
    tubes = {i: scaffold.tube_mask(i) for i in scaffold.pieces()}

    for i, j in combinations(markers, 2):
        if (balls[i] & balls[j]).any():
            failures.append(f"шары: B_{i} ∩ B_{j} ≠ ∅")

    for sign in (-1, 1):
        # sign = −1: i < 0, j < i; sign = +1 - зеркально
        outer = [k for k in markers if k * sign > 0]
        for i in outer:
            inner = i - sign
            for j in outer:
                if (j - i) * sign <= 0:
                    continue
                if (tubes[inner] & balls[j]).any():
                    failures.append(f"вложенность: V_{inner} ∩ B_{j} ≠ ∅")
                if (tubes[inner] & tubes[j]).any():
                    failures.append(f"вложенность: V_{inner} ∩ V_{j} ≠ ∅")
                if (balls[i] & tubes[j]).any():
                    failures.append(f"вложенность: B_{i} ∩ V_{j} ≠ ∅")
            neighbour = i + sign
            if neighbour in balls:
                overlap = tubes[i] & tubes[neighbour]
                if (overlap & ~balls[neighbour]).any():
                    failures.append(f"перекрытие: V_{i} ∩ V_{neighbour} ⊄ B_{neighbour}")
    return failures


# ----------------------------------------------------- расщепление кусков


@dataclass
class PieceSplit:
    """Пара дуг чётного куска и измерения расщепления."""

    index: int
    pair: Pair
    sigma: float
    fallback: bool
    lambda_local: float
    follows_iota: float = 0.0
    displacement: float = 0.0
    notes: List[str] = field(default_factory=list)


def split_even_subarc(
    scaffold: SplitScaffold,
    i: int,
    allowed: Optional[np.ndarray] = None,
    engine: Optional[str] = None,
    trace: Optional[ConstructionTrace] = None,
) -> PieceSplit:
    """
    Расщепляет чётный кусок A_i на две разделённые дуги внутри рабочей трубки.

    Дуги ищутся поиском разделённых путей между «воротами» у концов куска,
    затем каждая спрямляется на масштабе σ/2, если он не ниже разрешения.
    Обе дуги должны ½D₂δ^|i|-следовать A_i; порог поднимается до радиуса
    ворот плюс радиус трубки, когда они больше.

    Raises:
        ResolutionError: кусок короче 8 точек
        FlowCutError: в трубке нет двух непересекающихся путей
        ConstructionError: одна из дуг не следует куску
    """
    return safe_operation(
        _split_even_subarc_impl,
        ErrorType.CONSTRUCTION_ERROR,
        show_cli_error=False,
        operation_name=f"Расщепление куска A_{i}",
        reraise=True,
        scaffold=scaffold,
        i=i,
        allowed=allowed,
        engine=engine,
        trace=trace,
    )


def _split_even_subarc_impl(
    scaffold: SplitScaffold,
    i: int,
    allowed: Optional[np.ndarray] = None,
    engine: Optional[str] = None,
    trace: Optional[ConstructionTrace] = None,
) -> PieceSplit:
    space = scaffold.space
    trace = trace if trace is not None else ConstructionTrace()
    h, tol = space.mesh_h, space.tol
    if i % 2:
        raise InputError(f"Кусок A_{i} нечётный")
    piece = scaffold.piece_points(i)
    if len(piece) < 8:
        raise ResolutionError(f"Кусок A_{i} из {len(piece)} точек не разрешим", achieved=0)
    allowed = np.ones(space.n_points, dtype=bool) if allowed is None else allowed

    radius = scaffold.working_tube(i)
    tube = (space.dist_to_set(piece) <= radius + tol) & allowed
    span = space.dist(piece[0], piece[-1])
    gate = min(scaffold.working_gate(i), span / 3)
    sources = np.nonzero(tube & space.closed_ball_mask(piece[0], gate))[0]
    sinks = np.nonzero(tube & space.closed_ball_mask(piece[-1], gate))[0]
    if len(sources) < 2 or len(sinks) < 2:
        raise ResolutionError(f"Ворота куска A_{i} содержат меньше двух точек", achieved=0)

    found = _separated_arcs_impl(space, sources, sinks, 2, tube, 2 * radius, engine=engine)
    first, second = [list(arc.points) for arc in found.arcs]
    notes = list(found.notes)

    eps = found.sigma / 2
    if eps >= 8 * h - tol:
        blocked = np.nonzero(~tube)[0]
        first = _try_straighten(space, first, eps, set(second) | set(blocked), notes)
        second = _try_straighten(space, second, eps, set(first) | set(blocked), notes)
    else:
        notes.append(f"A_{i}: σ/2={eps:.4g} ниже 8·mesh_h, спрямление пропущено")

    iota = 0.5 * scaffold.tube_radius(i)
    floored = max(iota, _floor_mult() * h, gate + radius)
    if floored > iota + tol:
        notes.append(f"A_{i}: порог следования {iota:.4g} поднят до {floored:.4g}")
    reference = DiscreteArc(space, piece)
    displacement = 0.0
    for name, path in (("J", first), ("J'", second)):
        follows = check_follows(DiscreteArc(space, path), reference, floored)
        displacement = max(displacement, follows.displacement)
        if not follows.ok:
            trace.record(
                "split.follows", case=f"A_{i}", thresholds={"iota": floored},
                achieved={"arc": name, "displacement": follows.displacement},
                note=f"{name} не следует A_{i}: точка {follows.witness[2]}",
            )
            raise ConstructionError(
                f"Дуга {name} куска A_{i} не {floored:.4g}-следует ему: "
                f"смещение {follows.displacement:.4g}",
                trace.to_list(),
            )
    trace.record(
        "split.follows", case=f"A_{i}", thresholds={"iota": floored},
        achieved={"displacement": displacement},
    )

    local = max(
        measure_lambda(DiscreteArc(space, first)).lambda_measured if len(first) > 1 else 1.0,
        measure_lambda(DiscreteArc(space, second)).lambda_measured if len(second) > 1 else 1.0,
    )
    return PieceSplit(
        i, (first, second), found.sigma, found.fallback, local, floored, displacement, notes
    )


def _try_straighten(
    space: MetricSpace, points: List[int], eps: float, blocked: set, notes: List[str]
) -> List[int]:
    if len(points) < 2:
        return points
    try:
        straight, _ = _straighten_impl(DiscreteArc(space, points), eps, forbidden=blocked)
        return list(straight.points)
    except QcfError as error:
        notes.append(f"спрямление пропущено: {error}")
        return points


# ---------------------------------------------------------- расстёгивание


@dataclass
class JoinResult:
    """
    Сшивка двух пар дуг через нечётный кусок.

    Attributes:
        index: Номер нечётного куска
        arcs: Две сшивающие дуги (от левой пары к правой)
        left_pair: Левая пара после отбрасывания концов
        right_pair: Правая пара после отбрасывания концов и, при необходимости, обмена
        sigma: Разделение сшивающих дуг (None у концов a, b)
        swapped: Правая пара переставлена
        discarded: Число отброшенных точек у каждого конца
    """

    index: int
    arcs: Pair
    left_pair: Pair
    right_pair: Pair
    sigma: Optional[float]
    swapped: bool
    discarded: int
    fallback: bool = False


def unzip_join(
    scaffold: SplitScaffold,
    i: int,
    left_pair: Pair,
    right_pair: Pair,
    allowed: Optional[np.ndarray] = None,
    engine: Optional[str] = None,
) -> JoinResult:
    """
    Сшивает пару слева (концы у x_{i−1}) с парой справа двумя непересекающимися
    дугами в области ¼B ∪ ¼V_i ∪ ¼B; пробуются обе парности, при неудаче
    отбрасываются концы четырёх дуг (не дальше их середины).

    Пара из двух одноточечных дуг [a], [a] (или [b], [b]) означает сшивку с концом
    исходной дуги: тогда обе дуги выходят из общей точки.

    Raises:
        FlowCutError: ни одна парность не даёт непересекающихся сшивок
    """
    return safe_operation(
        _unzip_join_impl,
        ErrorType.CONSTRUCTION_ERROR,
        show_cli_error=False,
        operation_name=f"Сшивка через кусок A_{i}",
        reraise=True,
        scaffold=scaffold,
        i=i,
        left_pair=left_pair,
        right_pair=right_pair,
        allowed=allowed,
        engine=engine,
    )


def _unzip_join_impl(
    scaffold: SplitScaffold,
    i: int,
    left_pair: Pair,
    right_pair: Pair,
    allowed: Optional[np.ndarray] = None,
    engine: Optional[str] = None,
) -> JoinResult:
    space = scaffold.space
    tol = space.tol
    allowed = np.ones(space.n_points, dtype=bool) if allowed is None else allowed
    start, end = scaffold.piece_bounds(i)
    piece = scaffold.piece_points(i)
    left_marker, right_marker = scaffold.arc.points[start], scaffold.arc.points[end]
    region = space.dist_to_set(piece) <= scaffold.working_tube(i) + tol
    region |= space.closed_ball_mask(left_marker, scaffold.working_gate(i - 1))
    region |= space.closed_ball_mask(right_marker, scaffold.working_gate(i + 1))
    region &= allowed

    left_end = left_pair[0] == left_pair[1]
    right_end = right_pair[0] == right_pair[1]
    longest = max(len(p) for p in (*left_pair, *right_pair))
    last_error: Optional[FlowCutError] = None
    discard = 0
    while True:
        lp = tuple(_drop_tail(p, discard) for p in left_pair)
        rp = tuple(_drop_head(p, discard) for p in right_pair)
        tips_left = [lp[0][-1], lp[1][-1]]
        tips_right = [rp[0][0], rp[1][0]]
        open_region = region.copy()
        for p in (*lp, *rp):
            open_region[np.asarray(p, dtype=int)] = False
        open_region[np.asarray(tips_left + tips_right, dtype=int)] = True
        try:
            arcs, sigma, fallback = _join_paths(
                space, tips_left, tips_right, left_end, right_end, open_region,
                2 * scaffold.working_tube(i), engine,
            )
        except FlowCutError as error:
            last_error = error
            if discard >= longest // 2:
                break
            discard = max(1, 2 * discard)
            continue

        first, second = arcs
        swapped = False
        if not right_end and first[-1] != tips_right[0]:
            rp = (rp[1], rp[0])
            swapped = True
        return JoinResult(
            i, (first, second), (lp[0], lp[1]), (rp[0], rp[1]), sigma, swapped, discard, fallback
        )

    raise FlowCutError(
        f"Сшивка через A_{i} невозможна ни при одной парности",
        cut=last_error.cut if last_error else [],
        flow_value=last_error.flow_value if last_error else 0,
    )


def _drop_tail(points: List[int], count: int) -> List[int]:
    if len(points) <= 1:
        return list(points)
    keep = max(len(points) - count, (len(points) + 1) // 2)
    return list(points[:keep])


def _drop_head(points: List[int], count: int) -> List[int]:
    if len(points) <= 1:
        return list(points)
    keep = max(len(points) - count, (len(points) + 1) // 2)
    return list(points[len(points) - keep :])


def _join_paths(
    space: MetricSpace,
    tips_left: List[int],
    tips_right: List[int],
    left_end: bool,
    right_end: bool,
    region: np.ndarray,
    scale: float,
    engine: Optional[str],
) -> Tuple[Pair, Optional[float], bool]:
    """
    Две сшивающие дуги: первая начинается у tips_left[0].

    Returns:
        tuple: ((дуга, дуга), σ или None, признак отката)
    """
    if left_end or right_end:
        sources = [tips_left[0]] if left_end else tips_left
        sinks = [tips_right[0]] if right_end else tips_right
        capacities = {}
        if left_end:
            capacities[tips_left[0]] = 2
        if right_end:
            capacities[tips_right[0]] = 2
        arcs = _disjoint_arcs_impl(
            space, sources, sinks, 2, region, capacities=capacities, engine=engine
        )
        paths = untangle_pair(space, [list(a.points) for a in arcs], region)
        if not left_end:
            paths.sort(key=lambda p: p[0] != tips_left[0])
        elif not right_end:
            paths.sort(key=lambda p: p[-1] != tips_right[0])
        return (paths[0], paths[1]), None, False

    found = _separated_arcs_impl(space, tips_left, tips_right, 2, region, scale, engine=engine)
    paths = sorted((list(a.points) for a in found.arcs), key=lambda p: p[0] != tips_left[0])
    return (paths[0], paths[1]), found.sigma, found.fallback


# ------------------------------------------------------- полное расщепление


def split_quasi_arc(
    arc: DiscreteArc,
    lambda0: Optional[float] = None,
    eps: float = 0.3,
    forbidden: Optional[Iterable[int]] = None,
    engine: Optional[str] = None,
    trace: Optional[ConstructionTrace] = None,
) -> Tuple[DiscreteArc, DiscreteArc, ConstructionReport]:
    """
    Расщепляет квазидугу A[a,b] на две дуги J, J' с общими концами a, b.

    Для всех z ∈ (J ∪ J') ∖ {a,b} измеряются ε из d(z,A) ≤ ε·d(z,{a,b}) и
    η из max(d(z,J), d(z,J')) ≥ η·d(z,{a,b}); отчёт содержит также константы
    дуг, константу окружности J ∪ J' и проверку неравенства 6λ/η.

    Args:
        arc: Квазидуга
        lambda0: Константа λ₀ (по умолчанию измеряется)
        eps: ε ∈ (0, 1)
        forbidden: Точки, которые новые дуги обходят
        engine: Движок потока
        trace: Трасса построения

    Returns:
        tuple: (J, J', отчёт)
    """
    return safe_operation(
        _split_quasi_arc_impl,
        ErrorType.CONSTRUCTION_ERROR,
        show_cli_error=False,
        operation_name="Расщепление квазидуги",
        reraise=True,
        arc=arc,
        lambda0=lambda0,
        eps=eps,
        forbidden=forbidden,
        engine=engine,
        trace=trace,
    )


def _split_quasi_arc_impl(
    arc: DiscreteArc,
    lambda0: Optional[float] = None,
    eps: float = 0.3,
    forbidden: Optional[Iterable[int]] = None,
    engine: Optional[str] = None,
    trace: Optional[ConstructionTrace] = None,
) -> Tuple[DiscreteArc, DiscreteArc, ConstructionReport]:
    space = arc.space
    h, tol = space.mesh_h, space.tol
    trace = trace if trace is not None else ConstructionTrace()
    if lambda0 is None:
        lambda0 = measure_lambda(arc).lambda_measured
    scaffold = _build_scaffold_impl(arc, lambda0, eps)
    trace.record(
        "split.scaffold",
        scale=scaffold.unit,
        thresholds={"delta": scaffold.delta, "D1": scaffold.d1, "D2": scaffold.d2},
        achieved={"depth": scaffold.depth},
    )

    a, b = arc.start, arc.end
    blocked = np.zeros(space.n_points, dtype=bool)
    if forbidden is not None:
        blocked[np.asarray(sorted({int(p) for p in forbidden} - {a, b}), dtype=int)] = True
    to_arc = space.dist_to_set(arc.points)
    to_ends = np.minimum(space.row(a), space.row(b))
    cone = to_arc <= scaffold.eps * to_ends + tol

    ratio = get_config().grid_ratio
    collar = 2 * h
    last_error: Optional[QcfError] = None
    while collar <= scaffold.unit / 4 + tol:
        around_ends = space.closed_ball_mask(a, collar) | space.closed_ball_mask(b, collar)
        allowed = (cone | around_ends) & ~blocked
        allowed[[a, b]] = True
        try:
            first, second, labels, records = _split_pipeline(scaffold, allowed, engine, trace)
            break
        except (FlowCutError, ResolutionError) as error:
            last_error = error
            trace.record("split.collar", scale=collar, note=f"воротник {collar:.4g} мал: {error}")
            collar *= ratio
    else:
        raise ResolutionError(
            f"Расщепление не удалось ни при каком воротнике: {last_error}",
            trace.to_list(),
            achieved=0,
        )

    first_arc, second_arc = DiscreteArc(space, first), DiscreteArc(space, second)
    if set(first_arc.interior()) & set(second_arc.interior()) or first == second:
        raise ConstructionError("Дуги расщепления пересекаются", trace.to_list())

    report = _split_report(scaffold, first_arc, second_arc, labels, records, collar)
    report.notes.extend(trace.notes())
    trace.record(
        "split.result",
        scale=scaffold.unit,
        achieved={
            "lambda": report.lambda_measured,
            "eta": report.separation_eta,
            "eps": report.extras["eps_measured"],
        },
    )
    return first_arc, second_arc, report


def _split_pipeline(
    scaffold: SplitScaffold,
    allowed: np.ndarray,
    engine: Optional[str],
    trace: ConstructionTrace,
):
    """
    Собирает J и J' слева направо: сшивка у a, пары чётных кусков, сшивки
    нечётных кусков, сшивка у b; затем спрямляет стыки.

    Returns:
        tuple: (точки J, точки J', метки кусков для J и J', записи по масштабам)
    """
    space = scaffold.space
    a, b = scaffold.arc.start, scaffold.arc.end
    records: List[Dict[str, Any]] = []

    if scaffold.depth == 0:
        join = _unzip_join_impl(scaffold, 0, ([a], [a]), ([b], [b]), allowed, engine)
        first, second = join.arcs
        records.append({"i": 0, "sigma_split": None, "sigma_join": None, "lambda_local": None})
        trace.record("split.direct", note="маркеров нет: дуги соединяют концы напрямую")
        return first, second, ([0] * len(first), [0] * len(second)), records

    used = np.zeros(space.n_points, dtype=bool)
    pairs: Dict[int, Pair] = {}
    splits: Dict[int, PieceSplit] = {}
    for i in scaffold.even_pieces():
        split = _split_even_subarc_impl(scaffold, i, allowed & ~used, engine, trace)
        pairs[i], splits[i] = split.pair, split
        for p in split.pair:
            used[np.asarray(p, dtype=int)] = True
        trace.record(
            "split.even", case=f"A_{i}", scale=scaffold.working_tube(i),
            achieved={"sigma": split.sigma, "fallback": split.fallback},
        )

    first: List[int] = [a]
    second: List[int] = [a]
    first_labels: List[int] = [-scaffold.depth]
    second_labels: List[int] = [-scaffold.depth]
    joins: Dict[int, JoinResult] = {}
    for k in scaffold.pieces():
        if k % 2 == 0:
            continue
        left = (first, second)
        right = pairs[k + 1] if k < scaffold.depth else ([b], [b])
        free = allowed & ~used
        for p in (*left, *right):
            free[np.asarray(p, dtype=int)] = True
        join = _unzip_join_impl(scaffold, k, left, right, free, engine)
        joins[k] = join

        del first[len(join.left_pair[0]) :], first_labels[len(join.left_pair[0]) :]
        del second[len(join.left_pair[1]) :], second_labels[len(join.left_pair[1]) :]
        _extend(first, first_labels, join.arcs[0], k)
        _extend(second, second_labels, join.arcs[1], k)
        for path in join.arcs:
            used[np.asarray(path, dtype=int)] = True
        if k < scaffold.depth:
            pairs[k + 1] = join.right_pair
            _extend(first, first_labels, join.right_pair[0], k + 1)
            _extend(second, second_labels, join.right_pair[1], k + 1)
        trace.record(
            "split.join",
            case=f"A_{k}",
            scale=scaffold.working_tube(k),
            achieved={"sigma": join.sigma, "swapped": join.swapped, "discarded": join.discarded},
        )

    first, first_labels = _erase_labeled(first, first_labels)
    second, second_labels = _erase_labeled(second, second_labels)

    for k, join in joins.items():
        if join.sigma is None:
            continue
        first, first_labels = _straighten_junction(
            space, first, first_labels, second, k, join.sigma / 2, allowed, trace
        )
        second, second_labels = _straighten_junction(
            space, second, second_labels, first, k, join.sigma / 2, allowed, trace
        )

    for i in scaffold.pieces():
        split, join = splits.get(i), joins.get(i)
        records.append(
            {
                "i": i,
                "sigma_split": split.sigma if split else None,
                "sigma_join": join.sigma if join else None,
                "lambda_local": split.lambda_local if split else None,
            }
        )
    return first, second, (first_labels, second_labels), records


def _extend(points: List[int], labels: List[int], piece: Sequence[int], label: int) -> None:
    """Продолжает собранную дугу куском, который начинается в её последней точке."""
    points.extend(piece[1:])
    labels.extend([label] * (len(piece) - 1))


def _erase_labeled(points: List[int], labels: List[int]) -> Tuple[List[int], List[int]]:
    erased = loop_erase(points)
    position = {p: i for i, p in enumerate(points)}
    return erased, [labels[position[p]] for p in erased]


def _straighten_junction(
    space: MetricSpace,
    points: List[int],
    labels: List[int],
    other: List[int],
    k: int,
    eps: float,
    allowed: np.ndarray,
    trace: ConstructionTrace,
) -> Tuple[List[int], List[int]]:
    """Спрямляет J_{k−1} ∪ J̃_k ∪ J_{k+1} в трёхчастном режиме, не задевая other."""
    h = space.mesh_h
    if eps < 8 * h - space.tol:
        trace.record(
            "split.junction", case=f"A_{k}", scale=eps, note="стык не спрямлялся: ε ниже 8·mesh_h"
        )
        return points, labels
    lab = np.asarray(labels)
    window = np.nonzero((lab >= k - 1) & (lab <= k + 1))[0]
    middle = np.nonzero(lab == k)[0]
    if not len(window) or not len(middle):
        return points, labels
    lo, hi = int(window[0]), int(window[-1])
    cut1, cut2 = int(middle[0]) - 1 - lo, int(middle[-1]) + 1 - lo
    cut1, cut2 = max(cut1, 0), min(cut2, hi - lo)
    segment = points[lo : hi + 1]
    blocked = set(other) | set(points[:lo]) | set(points[hi + 1 :]) | set(np.nonzero(~allowed)[0])
    try:
        straight, _ = _straighten_impl(
            DiscreteArc(space, segment), eps, mode=(cut1, cut2), forbidden=blocked
        )
    except QcfError as error:
        trace.record(
            "split.junction", case=f"A_{k}", scale=eps, note=f"стык не спрямлялся: {error}"
        )
        return points, labels
    old = dict(zip(segment, labels[lo : hi + 1]))
    new_labels = [old.get(p, k) for p in straight.points]
    return (
        points[:lo] + list(straight.points) + points[hi + 1 :],
        labels[:lo] + new_labels + labels[hi + 1 :],
    )


def _split_report(
    scaffold: SplitScaffold,
    first: DiscreteArc,
    second: DiscreteArc,
    labels: Tuple[List[int], List[int]],
    records: List[Dict[str, Any]],
    collar: float,
) -> ConstructionReport:
    space = scaffold.space
    h = space.mesh_h
    arc = scaffold.arc
    ends = (arc.start, arc.end)
    floor = _floor_mult() * h

    eps_measured = max(
        cone_epsilon(first, arc, ends, floor), cone_epsilon(second, arc, ends, floor)
    )
    collar_eps = max(
        cone_epsilon(first, arc, ends, 0.0), cone_epsilon(second, arc, ends, 0.0)
    )
    eta = arc_separation(first, second, relative_to=ends, floor=floor)
    eta_full = min(arc_separation(first, second, relative_to=ends, floor=0.0), 1.0)

    lam = max(measure_lambda(first).lambda_measured, measure_lambda(second).lambda_measured)
    lam_full = max(
        measure_lambda(first, min_distance=0).lambda_measured,
        measure_lambda(second, min_distance=0).lambda_measured,
    )
    circle = concatenate_to_circle(first, second)
    circle_full = measure_circle_lambda(circle, min_distance=0).lambda_measured
    bound = 6 * lam_full / eta_full if eta_full > 0 else math.inf

    cases = _three_case_scan(scaffold, first, labels[0])
    cases_second = _three_case_scan(scaffold, second, labels[1])
    for name, values in cases_second.items():
        merged = cases[name]
        merged["pairs"] += values["pairs"]
        merged["violations"] += values["violations"]
        merged["max_ratio"] = max(merged["max_ratio"], values["max_ratio"])

    report = ConstructionReport(
        lambda_measured=lam,
        locality_eps="global",
        follows_iota="not-applicable",
        separation_eta=eta,
        notes=list(scaffold.notes),
        extras={
            "eps": scaffold.eps,
            "eps_measured": eps_measured,
            "eps_collar": collar_eps,
            "collar_radius": collar,
            "eta_full": eta_full,
            "lambda_full": lam_full,
            "circle_lambda_full": circle_full,
            "six_lambda_over_eta": bound,
            "six_lambda_ok": bool(circle_full <= bound + 1e-9),
            "lambda0": scaffold.lambda0,
            "depth": scaffold.depth,
            "scales": records,
            "three_cases": cases,
            "scaffold": scaffold.to_dict(),
        },
    )
    if eps_measured > scaffold.eps + 1e-9:
        report.notes.append(
            f"измеренное ε={eps_measured:.4g} превышает заданное {scaffold.eps:.4g}"
        )
    if collar > _floor_mult() * h:
        report.notes.append(
            f"воротник {collar:.4g} шире порога разрешения: ε у концов {collar_eps:.4g}"
        )
    if not report.extras["six_lambda_ok"]:
        log_warning(f"Неравенство 6λ/η нарушено: {circle_full:.4g} > {bound:.4g}")
    return report


def _three_case_scan(
    scaffold: SplitScaffold, arc: DiscreteArc, labels: List[int]
) -> Dict[str, Dict[str, Any]]:
    """
    Три случая оценки λ по номерам кусков i ≤ j точек пары: соседние куски,
    куски по разные стороны от A₀ (граница 4λ₀) и далёкие куски одной стороны
    (граница 4λ₀/D₂).
    """
    space = arc.space
    h, tol = space.mesh_h, space.tol
    lam0 = scaffold.lambda0
    cases = {
        "adjacent": {"bound": None, "pairs": 0, "max_ratio": 1.0, "violations": 0},
        "opposite": {"bound": 4 * lam0, "pairs": 0, "max_ratio": 1.0, "violations": 0},
        "skip": {"bound": 4 * lam0 / scaffold.d2, "pairs": 0, "max_ratio": 1.0, "violations": 0},
    }
    if len(arc) < 2:
        return cases
    lab = np.asarray(labels)
    dist = space.block(arc.points, arc.points)
    window = np.zeros(len(arc))
    for g in range(1, len(arc)):
        d = np.diagonal(dist, offset=g)
        window = np.maximum(np.maximum(window[:-1], window[1:]), d)
        ok = d >= h - tol
        if not ok.any():
            continue
        lo, hi = lab[:-g], lab[g:]
        ratio = np.where(ok, window / np.where(d > 0, d, 1.0), 0.0)
        adjacent = ok & (np.abs(hi - lo) <= 1)
        opposite = ok & ~adjacent & (lo < 0) & (hi > 0)
        skip = ok & ~adjacent & ~opposite
        for name, mask in (("adjacent", adjacent), ("opposite", opposite), ("skip", skip)):
            if not mask.any():
                continue
            case = cases[name]
            case["pairs"] += int(mask.sum())
            case["max_ratio"] = max(case["max_ratio"], float(ratio[mask].max()))
            if case["bound"] is not None:
                case["violations"] += int((ratio[mask] > case["bound"] + 1e-9).sum())
    return cases


# ------------------------------------------------------------- n дуг


def bogensatz(
    space: MetricSpace,
    x: int,
    y: int,
    n: int,
    engine: Optional[str] = None,
    trace: Optional[ConstructionTrace] = None,
) -> Tuple[List[DiscreteArc], ConstructionReport]:
    """
    n различных квазидуг из x в y, любые две из которых образуют квазиокружность.

    n округляется вверх до 2^m; на шаге m каждая дуга расщепляется с
    ε_m = η_{m−1}/4 (η₀ = 1), остальные дуги запрещены для новых.

    Raises:
        ResolutionError: глубина m недостижима; achieved - достижимая глубина
    """
    return safe_operation(
        _bogensatz_impl,
        ErrorType.CONSTRUCTION_ERROR,
        show_cli_error=False,
        operation_name=f"Построение {n} дуг",
        reraise=True,
        space=space,
        x=x,
        y=y,
        n=n,
        engine=engine,
        trace=trace,
    )


def _bogensatz_impl(
    space: MetricSpace,
    x: int,
    y: int,
    n: int,
    engine: Optional[str] = None,
    trace: Optional[ConstructionTrace] = None,
) -> Tuple[List[DiscreteArc], ConstructionReport]:
    h, tol = space.mesh_h, space.tol
    trace = trace if trace is not None else ConstructionTrace()
    if n < 1:
        raise InputError(f"Число дуг должно быть положительным: {n}")
    distance = space.dist(x, y)
    if distance < 16 * h - tol:
        raise InputError(f"d(x,y)={distance:.6g} меньше 16·mesh_h={16 * h:.6g}")
    depth = max(0, math.ceil(math.log2(n)))

    path = shortest_path(space, [x], [y])
    if path is None:
        raise ConstructionError(f"Точки {x} и {y} не соединены шаговым графом")
    base, _ = _straighten_impl(DiscreteArc(space, path), max(8 * h, distance / 8), trace=trace)
    arcs = [base]
    eta = 1.0
    trace.record("bogensatz.base", scale=distance, achieved={"eta": eta, "length": len(base)})

    for m in range(1, depth + 1):
        eps_m = eta / 4
        produced: List[DiscreteArc] = []
        for index, current in enumerate(arcs):
            others = {p for other in produced + arcs[index + 1 :] for p in other.points}
            try:
                first, second, _ = _split_quasi_arc_impl(
                    current, eps=eps_m, forbidden=others - {x, y}, engine=engine, trace=trace
                )
            except QcfError as error:
                trace.record(
                    "bogensatz.depth", case=f"m={m}", note=f"глубина недостижима: {error}"
                )
                raise ResolutionError(
                    f"Глубина m={m} недостижима на этом разрешении; достижимая глубина {m - 1} "
                    f"({2 ** (m - 1)} дуг)",
                    trace.to_list(),
                    achieved=m - 1,
                ) from error
            produced.extend([first, second])
        arcs = produced
        eta = min(
            1.0,
            min(
                arc_separation(p, q, relative_to=(x, y), floor=_floor_mult() * h)
                for p, q in combinations(arcs, 2)
            ),
        )
        trace.record(
            "bogensatz.depth", case=f"m={m}", thresholds={"eps": eps_m}, achieved={"eta": eta}
        )

    arcs = arcs[:n]
    report = _bogensatz_report(arcs, x, y, depth)
    report.notes.extend(trace.notes())
    log_info(
        f"Построено {len(arcs)} дуг: λ ≤ {report.lambda_measured:.4g}, η ≥ {report.separation_eta}"
    )
    return arcs, report


def _bogensatz_report(
    arcs: Sequence[DiscreteArc], x: int, y: int, depth: int
) -> ConstructionReport:
    space = arcs[0].space
    floor = _floor_mult() * space.mesh_h
    per_arc = [
        {
            "lambda": measure_lambda(arc).lambda_measured,
            "lambda_full": measure_lambda(arc, min_distance=0).lambda_measured,
            "length": len(arc),
        }
        for arc in arcs
    ]
    pairwise = []
    for i, j in combinations(range(len(arcs)), 2):
        eta = arc_separation(arcs[i], arcs[j], relative_to=(x, y), floor=floor)
        eta_full = min(arc_separation(arcs[i], arcs[j], relative_to=(x, y), floor=0.0), 1.0)
        circle = concatenate_to_circle(arcs[i], arcs[j])
        circle_full = measure_circle_lambda(circle, min_distance=0).lambda_measured
        lam_full = max(per_arc[i]["lambda_full"], per_arc[j]["lambda_full"])
        bound = 6 * lam_full / eta_full if eta_full > 0 else math.inf
        pairwise.append(
            {
                "i": i,
                "j": j,
                "eta": eta,
                "eta_full": eta_full,
                "circle_lambda": measure_circle_lambda(circle).lambda_measured,
                "circle_lambda_full": circle_full,
                "bound": bound,
                "ok": bool(circle_full <= bound + 1e-9),
            }
        )
    eta_min = min((p["eta"] for p in pairwise), default=1.0)
    return ConstructionReport(
        lambda_measured=max(p["lambda"] for p in per_arc),
        locality_eps="global",
        separation_eta=min(eta_min, 1.0),
        extras={"n": len(arcs), "depth": depth, "arcs": per_arc, "pairwise": pairwise},
    )
