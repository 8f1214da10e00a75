"""
Квазиокружности через заданные точки.

Движок соединяющих дуг (непересекающиеся и разделённые дуги) живёт в
geometry.connecting_arcs и переэкспортируется отсюда. Здесь строятся обход
окружностью шара по аннулусу, малая окружность через точку, слияние двух
окружностей связующими дугами и индукция по числу точек с двумя случаями:
без разрыва масштабов (случай 1) и с кластером точек у x₁ (случай 2).
"""

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from geometry.arc_model import (
    ConstructionReport,
    DiscreteArc,
    DiscreteCircle,
    concatenate_to_circle,
    measure_circle_lambda,
)
from geometry.connecting_arcs import (  # noqa: F401  (публичный интерфейс модуля)
    SeparatedArcs,
    _disjoint_arcs_impl,
    _separated_arcs_impl,
    disjoint_arcs,
    separated_arcs,
    untangle_pair,
)
from geometry.graph_ops import articulation_points, shortest_path
from geometry.invariants import (
    alc_triples_at,
    annular_linear_connectivity,
    estimate_working_constants,
)
from geometry.space_model import MetricSpace
from geometry.splitter import _bogensatz_impl
from geometry.straightener import _straighten_impl
from utils.config import get_config
from utils.construction_trace import ConstructionTrace
from utils.error_handler import (
    ConstructionError,
    DetourError,
    ErrorType,
    FlowCutError,
    InputError,
    QcfError,
    ResolutionError,
    safe_operation,
)
from utils.logger import log_info, log_warning

# Метки точек собранной окружности: часть β₁, часть β₂, связующие дуги
LABEL_FIRST, LABEL_SECOND, LABEL_LINK = 1, 2, 0


# ------------------------------------------------------------------ обход


def detour_circle(circle: DiscreteCircle, x: int, r_in: float, r_out: float) -> DiscreteCircle:
    """
    Обводит окружность вокруг шара B(x, r_in) по аннулусу A(x, r_in, r_out).

    Каждый заход окружности в B(x, r_in) заменяется кратчайшим путём по аннулусу
    между точками до и после захода; если соседние заходы не удаётся обойти
    по отдельности, вырезается весь кусок между ними (он не должен выходить за
    B(x, r_out)). Вне B(x, r_out) окружность не меняется.

    Raises:
        InputError: r_in < 4·mesh_h или r_out ≤ r_in
        DetourError: аннулус не соединяет точки входа и выхода
    """
    return safe_operation(
        _detour_circle_impl,
        ErrorType.CONSTRUCTION_ERROR,
        show_cli_error=False,
        operation_name="Обход шара по аннулусу",
        reraise=True,
        circle=circle,
        x=x,
        r_in=r_in,
        r_out=r_out,
    )


def _detour_circle_impl(
    circle: DiscreteCircle, x: int, r_in: float, r_out: float
) -> DiscreteCircle:
    space = circle.space
    tol = space.tol
    if r_in < 4 * space.mesh_h - tol:
        raise InputError(f"r_in={r_in:.6g} меньше 4·mesh_h")
    if r_out <= r_in:
        raise InputError(f"r_out={r_out:.6g} не больше r_in={r_in:.6g}")

    from_x = space.row(x)[circle.array]
    inside = from_x < r_in - tol
    if not inside.any():
        return circle
    if inside.all():
        raise DetourError(f"Окружность целиком лежит в B({x}, {r_in:.6g})")

    # начало цикла в самой дальней от x точке
    start = int(np.argmax(from_x))
    m = len(circle)
    seq = [circle.points[(start + t) % m] for t in range(m)] + [circle.points[start]]
    d = np.concatenate([np.roll(from_x, -start), [from_x[start]]])
    runs = _runs(d < r_in - tol)

    annulus = (space.row(x) >= r_in - tol) & (space.row(x) <= r_out + tol)
    pieces: List[List[int]] = []
    cursor = 0
    k = 0
    while k < len(runs):
        entry = runs[k][0] - 1
        path, last = None, k
        for j in range(k, len(runs)):
            exit_ = runs[j][1] + 1
            if j > k and (d[runs[k][1] + 1 : runs[j][0]] >= r_out - tol).any():
                break
            kept = set(seq[cursor : entry + 1]) | set(seq[exit_:])
            kept |= {p for piece in pieces for p in piece}
            region = annulus.copy()
            region[np.asarray(sorted(kept), dtype=int)] = False
            region[[seq[entry], seq[exit_]]] = True
            path = shortest_path(space, [seq[entry]], [seq[exit_]], region)
            if path is not None:
                last = j
                break
        if path is None:
            raise DetourError(
                f"Аннулус A({x}, {r_in:.6g}, {r_out:.6g}) не соединяет точки "
                f"{seq[entry]} и {seq[runs[k][1] + 1]}: annulus disconnected"
            )
        pieces.append(seq[cursor:entry] + path[:-1])
        cursor = runs[last][1] + 1
        k = last + 1
    pieces.append(seq[cursor:-1])

    points = [p for piece in pieces for p in piece]
    if len(set(points)) != len(points) or len(points) < 3:
        raise DetourError("Обход дал самопересекающуюся кривую")
    return DiscreteCircle(space, points)


def _runs(flags: np.ndarray) -> List[Tuple[int, int]]:
    """Максимальные отрезки [начало, конец] подряд идущих True."""
    runs, start = [], None
    for i, flag in enumerate(flags):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(flags) - 1))
    return runs


# --------------------------------------------------------- малая окружность


def small_circle(
    space: MetricSpace, x: int, radius: float, engine: Optional[str] = None
) -> DiscreteCircle:
    """
    Окружность через x внутри шара B(x, radius): две непересекающиеся дуги из x
    в точку y на расстоянии около radius/2 (пропускная способность 2 в x и y).

    Raises:
        ResolutionError: в шаре нет подходящей y или двух непересекающихся дуг
    """
    return safe_operation(
        _small_circle_impl,
        ErrorType.CONSTRUCTION_ERROR,
        show_cli_error=False,
        operation_name="Малая окружность",
        reraise=True,
        space=space,
        x=x,
        radius=radius,
        engine=engine,
    )


def _small_circle_impl(
    space: MetricSpace, x: int, radius: float, engine: Optional[str] = None
) -> DiscreteCircle:
    h, tol = space.mesh_h, space.tol
    ball = space.ball_mask(x, radius)
    from_x = space.row(x)
    members = np.nonzero(ball & (from_x >= min(2 * h, radius / 2) - tol))[0]
    if not len(members):
        raise ResolutionError(f"Шар B({x}, {radius:.6g}) слишком мал для окружности", achieved=0)
    order = members[np.lexsort((members, np.abs(from_x[members] - radius / 2)))]
    for y in order[:8]:
        y = int(y)
        try:
            arcs = _disjoint_arcs_impl(
                space, [x], [y], 2, ball, capacities={x: 2, y: 2}, engine=engine
            )
        except FlowCutError:
            continue
        first, second = untangle_pair(space, [a.points for a in arcs], ball)
        if len(first) + len(second) < 5:
            continue
        return concatenate_to_circle(DiscreteArc(space, first), DiscreteArc(space, second))
    raise ResolutionError(
        f"В шаре B({x}, {radius:.6g}) нет двух непересекающихся дуг из {x}", achieved=0
    )


# ----------------------------------------------------------------- слияние


@dataclass
class MergeResult:
    """
    Слияние двух окружностей.

    Attributes:
        circle: Собранная окружность
        labels: Метка каждой точки (1 - из первой окружности, 2 - из второй, 0 - связующая)
        sigma: Разделение связующих дуг
        gaps: Номера промежутков на обеих окружностях, в которых лежат концы дуг
        fallback: Разделённые дуги не найдены выше mesh_h
        rule: Как выбраны две дуги: "pigeonhole" (из 2n дуг) или "gap_pairs" (перебор промежутков)
        requested: Сколько связующих дуг запрошено
        found: Сколько найдено
        discarded: Сколько отброшено как ½σ-близкие к отмеченным точкам
    """

    circle: DiscreteCircle
    labels: List[int]
    sigma: float
    gaps: Tuple[int, int]
    fallback: bool = False
    rule: str = "gap_pairs"
    requested: int = 2
    found: int = 2
    discarded: int = 0


def merge_circles(
    first: DiscreteCircle,
    second: DiscreteCircle,
    marked_first: Sequence[int],
    marked_second: Sequence[int],
    region: Optional[np.ndarray] = None,
    scale: Optional[float] = None,
    engine: Optional[str] = None,
    count: int = 2,
    trace: Optional[ConstructionTrace] = None,
) -> MergeResult:
    """
    Сливает две непересекающиеся окружности в одну, содержащую все отмеченные точки.

    При count > 2 ищутся count разделённых связующих дуг; дуги, подходящие к
    отмеченным точкам ближе ½σ, отбрасываются, и из оставшихся берутся две с
    концами в одном промежутке на каждой окружности. Если так не вышло (или
    count = 2), перебираются пары промежутков с двумя дугами в каждой.
    Промежутки между концами выбранных дуг выбрасываются.

    Raises:
        ConstructionError: окружности пересекаются
        FlowCutError: ни для одной пары промежутков нет двух связующих дуг
    """
    return safe_operation(
        _merge_circles_impl,
        ErrorType.CONSTRUCTION_ERROR,
        show_cli_error=False,
        operation_name="Слияние окружностей",
        reraise=True,
        first=first,
        second=second,
        marked_first=marked_first,
        marked_second=marked_second,
        region=region,
        scale=scale,
        engine=engine,
        count=count,
        trace=trace,
    )


def _merge_circles_impl(
    first: DiscreteCircle,
    second: DiscreteCircle,
    marked_first: Sequence[int],
    marked_second: Sequence[int],
    region: Optional[np.ndarray] = None,
    scale: Optional[float] = None,
    engine: Optional[str] = None,
    count: int = 2,
    trace: Optional[ConstructionTrace] = None,
) -> MergeResult:
    space = first.space
    trace = trace if trace is not None else ConstructionTrace()
    common = first.point_set & second.point_set
    if common:
        raise ConstructionError(f"Окружности пересекаются в точке {min(common)}")
    if count < 2:
        raise InputError(f"Для слияния нужно не меньше двух связующих дуг: {count}")
    if region is None:
        region = np.ones(space.n_points, dtype=bool)
    region = np.asarray(region, dtype=bool)
    scale = scale if scale is not None else space.set_distance(first.points, second.points)

    if count > 2:
        merged = _pigeonhole_merge(
            first, second, marked_first, marked_second, count, region, scale, engine, trace
        )
        if merged is not None:
            return merged
        log_warning("Две связующие дуги в одном промежутке не найдены: перебор промежутков")

    gaps_first = _gaps(first, marked_first)
    gaps_second = _gaps(second, marked_second)
    candidates = sorted(
        ((i, j) for i in range(len(gaps_first)) for j in range(len(gaps_second))),
        key=lambda ij: (-len(gaps_first[ij[0]]) * len(gaps_second[ij[1]]), ij),
    )
    last_error: Optional[FlowCutError] = None
    for i, j in candidates:
        sources, sinks = gaps_first[i], gaps_second[j]
        if len(sources) < 2 or len(sinks) < 2:
            continue
        mask = _link_mask(first, second, sources, sinks, region)
        try:
            found = _separated_arcs_impl(space, sources, sinks, 2, mask, scale, engine=engine)
        except FlowCutError as error:
            last_error = error
            continue
        links = [list(arc.points) for arc in found.arcs]
        circle, labels = _assemble(first, second, links, marked_first, marked_second)
        trace.record(
            "circle.links",
            case="gap_pairs",
            scale=found.sigma,
            thresholds={"arcs": count},
            achieved={"arcs": 2, "gaps": [i, j]},
        )
        return MergeResult(circle, labels, found.sigma, (i, j), found.fallback, requested=count)

    raise FlowCutError(
        "Ни для одной пары промежутков нет двух связующих дуг",
        cut=last_error.cut if last_error else [],
        flow_value=last_error.flow_value if last_error else 0,
        trace=trace.to_list(),
    )


def _pigeonhole_merge(
    first: DiscreteCircle,
    second: DiscreteCircle,
    marked_first: Sequence[int],
    marked_second: Sequence[int],
    count: int,
    region: np.ndarray,
    scale: float,
    engine: Optional[str],
    trace: ConstructionTrace,
) -> Optional[MergeResult]:
    """
    count разделённых дуг между окружностями; ½σ-близкие к отмеченным точкам
    отбрасываются (каждая отмеченная точка отнимает не больше одной дуги), две из
    оставшихся с концами в одной паре промежутков идут в сборку.
    """
    space = first.space
    tol = space.tol
    on_first = [p for p in first.points if region[p]]
    on_second = [p for p in second.points if region[p]]
    mask = _link_mask(first, second, on_first, on_second, region)

    available = min(count, len(on_first), len(on_second))
    found = None
    while available >= 2 and found is None:
        try:
            found = _separated_arcs_impl(
                space, on_first, on_second, available, mask, scale, engine=engine
            )
        except FlowCutError as error:
            available = min(available - 1, error.flow_value)
    if found is None:
        trace.record(
            "circle.links",
            case="pigeonhole",
            scale=scale,
            thresholds={"arcs": count},
            achieved={"arcs": max(available, 0)},
            note="меньше двух связующих дуг между окружностями",
        )
        return None

    marked = sorted(set(marked_first) | set(marked_second))
    to_marked = space.dist_to_set(marked)
    half = found.sigma / 2
    survivors = [arc for arc in found.arcs if float(to_marked[arc.array].min()) >= half - tol]
    discarded = len(found.arcs) - len(survivors)

    gap_first = _gap_index(first, marked_first)
    gap_second = _gap_index(second, marked_second)
    groups: Dict[Tuple[int, int], List[List[int]]] = {}
    for arc in survivors:
        key = (gap_first.get(arc.points[0]), gap_second.get(arc.points[-1]))
        if key[0] is None or key[1] is None:
            continue
        groups.setdefault(key, []).append(list(arc.points))
    full = sorted(
        (key for key in groups if len(groups[key]) >= 2), key=lambda k: (-len(groups[k]), k)
    )

    note = None
    if available < count:
        note = f"запрошено {count} связующих дуг, поток дал {available}"
    trace.record(
        "circle.links",
        case="pigeonhole",
        scale=found.sigma,
        thresholds={"arcs": count, "half_sigma": half},
        achieved={"arcs": available, "discarded": discarded, "groups": len(groups)},
        note=note,
    )
    if not full:
        return None

    gaps = full[0]
    circle, labels = _assemble(first, second, groups[gaps][:2], marked_first, marked_second)
    return MergeResult(
        circle,
        labels,
        found.sigma,
        gaps,
        found.fallback,
        rule="pigeonhole",
        requested=count,
        found=available,
        discarded=discarded,
    )


def _link_mask(
    first: DiscreteCircle,
    second: DiscreteCircle,
    sources: Sequence[int],
    sinks: Sequence[int],
    region: np.ndarray,
) -> np.ndarray:
    """Область связующих дуг: region без обеих окружностей, кроме концов A и B."""
    mask = region.copy()
    mask[first.array] = False
    mask[second.array] = False
    for ends in (sources, sinks):
        if len(ends):
            mask[np.asarray(ends, dtype=int)] = True
    return mask


def _gaps(circle: DiscreteCircle, marked: Sequence[int]) -> List[List[int]]:
    """Промежутки между соседними отмеченными точками (без самих точек)."""
    m = len(circle)
    positions = sorted(circle.position[p] for p in set(marked))
    if not positions:
        return [list(circle.points)]
    gaps = []
    for k, p in enumerate(positions):
        q = positions[(k + 1) % len(positions)]
        span = (q - p) % m or m
        gaps.append([circle.points[(p + t) % m] for t in range(1, span)])
    return gaps


def _gap_index(circle: DiscreteCircle, marked: Sequence[int]) -> Dict[int, int]:
    return {p: k for k, gap in enumerate(_gaps(circle, marked)) for p in gap}


def _long_way(circle: DiscreteCircle, anchor: Optional[int], u: int, v: int) -> List[int]:
    """
    Путь по окружности из u в v, не проходящий по промежутку между ними
    (промежуток отсчитывается от отмеченной точки anchor).
    """
    m = len(circle)
    base = circle.position[anchor] if anchor is not None else circle.position[u]
    ou = (circle.position[u] - base) % m
    ov = (circle.position[v] - base) % m
    step = 1 if ou > ov else -1
    if anchor is None:
        # без отмеченных точек годится любой из двух путей; берётся более длинный
        step = 1 if (circle.position[v] - circle.position[u]) % m > m // 2 else -1
    out, pos = [u], circle.position[u]
    while out[-1] != v:
        pos = (pos + step) % m
        out.append(circle.points[pos])
    return out


def _assemble(
    first: DiscreteCircle,
    second: DiscreteCircle,
    links: List[List[int]],
    marked_first: Sequence[int],
    marked_second: Sequence[int],
) -> Tuple[DiscreteCircle, List[int]]:
    one, two = links
    anchor_first = marked_first[0] if marked_first else None
    anchor_second = marked_second[0] if marked_second else None
    kept_first = _long_way(first, anchor_first, one[0], two[0])
    kept_second = _long_way(second, anchor_second, two[-1], one[-1])
    points = kept_first + two[1:] + kept_second[1:] + one[::-1][1:-1]
    labels = (
        [LABEL_FIRST] * len(kept_first)
        + [LABEL_LINK] * (len(two) - 2)
        + [LABEL_SECOND] * len(kept_second)
        + [LABEL_LINK] * (len(one) - 2)
    )
    circle = DiscreteCircle(first.space, points)
    missing = (set(marked_first) | set(marked_second)) - circle.point_set
    if missing:
        raise ConstructionError(f"Слияние потеряло отмеченные точки {sorted(missing)}")
    return circle, labels


def _straighten_circle(
    circle: DiscreteCircle,
    labels: List[int],
    marked: Sequence[int],
    eps: float,
    trace: ConstructionTrace,
    stage: str,
    avoid: Iterable[int] = (),
) -> Tuple[DiscreteCircle, List[int]]:
    """
    Спрямляет куски окружности между соседними отмеченными точками с масштабом eps.

    Концы кусков остаются на месте, спрямлённый кусок не задевает остальные куски
    и точки avoid. При одной отмеченной точке окружность режется ещё и в
    диаметрально противоположной позиции. Кусок, который не удалось спрямить,
    остаётся как был (запись в трассе).
    """
    space = circle.space
    m = len(circle)
    positions = sorted({circle.position[p] for p in marked})
    if len(positions) == 1:
        positions = sorted(positions + [(positions[0] + m // 2) % m])
    pieces: List[Tuple[List[int], List[int]]] = []
    for k, p in enumerate(positions):
        q = positions[(k + 1) % len(positions)]
        span = (q - p) % m
        idx = [(p + t) % m for t in range(span + 1)]
        pieces.append(([circle.points[i] for i in idx], [labels[i] for i in idx]))

    avoid = {int(p) for p in avoid}
    straightened = skipped = 0
    for k, (segment, segment_labels) in enumerate(pieces):
        if len(segment) < 4 or space.dist(segment[0], segment[-1]) < 2 * eps:
            continue
        others = {p for j, (seg, _) in enumerate(pieces) if j != k for p in seg} | avoid
        others -= {segment[0], segment[-1]}
        try:
            straight, _ = _straighten_impl(DiscreteArc(space, segment), eps, forbidden=others)
        except QcfError as error:
            skipped += 1
            trace.record(
                "circle.straighten",
                case=f"{stage}.gap{k}",
                scale=eps,
                note=f"спрямление пропущено: {error}",
            )
            continue
        old = dict(zip(segment, segment_labels))
        points = list(straight.points)
        pieces[k] = (points, [old.get(p, LABEL_LINK) for p in points])
        straightened += 1

    trace.record(
        "circle.straighten",
        case=stage,
        scale=eps,
        achieved={"pieces": len(pieces), "straightened": straightened, "skipped": skipped},
    )
    points = [p for seg, _ in pieces for p in seg[:-1]]
    flat_labels = [lab for _, seg_labels in pieces for lab in seg_labels[:-1]]
    return DiscreteCircle(space, points), flat_labels


# ------------------------------------------------------- окружность через T


@dataclass
class _CircleBuild:
    """Промежуточный результат индукции: окружность, метки её точек и её λ."""

    circle: DiscreteCircle
    labels: List[int]
    case: str
    lam: float = 1.0


@dataclass(frozen=True)
class CaseChoice:
    """
    Выбор ветви индукции.

    Attributes:
        case: "case1" или "case2"
        m: Размер кластера у x₁ (только для случая 2)
        rule: Какое правило сработало: "strict" (s < δ^(n−1)), "gap_ratio"
            (разрыв масштабов не больше circle_gap_ratio) или "none"
    """

    case: str
    m: Optional[int]
    rule: str


def choose_case(far: Sequence[float], delta: float, gap_ratio: float) -> CaseChoice:
    """
    Ветвь индукции по расстояниям far[k] = d(x₁, x_{k+1}) (far[0] = 0).

    Строгое правило: если d(x₁,x₂)/d(x₁,x_n) < δ^(n−1), то найдётся m с
    d(x₁,x_m) ≤ δ·d(x₁,x_{m+1}). При рабочих δ = 1/(200L²λ₁³) оно на конечной
    решётке не срабатывает, поэтому запасным правилом служит разрыв масштабов
    с отношением circle_gap_ratio.
    """
    n = len(far)
    if n < 3:
        raise InputError(f"Выбор ветви нужен только для |T| ≥ 3, получено {n}")
    if far[1] / far[-1] < delta ** (n - 1):
        m = _scale_gap(far, delta)
        if m is not None:
            return CaseChoice("case2", m, "strict")
    m = _scale_gap(far, gap_ratio)
    if m is not None:
        return CaseChoice("case2", m, "gap_ratio")
    return CaseChoice("case1", None, "none")


@dataclass
class _CircleBuilder:
    space: MetricSpace
    L: float
    gap_ratio: float
    engine: Optional[str]
    trace: ConstructionTrace
    lambda1: float = 1.0
    memo: Dict[FrozenSet[int], _CircleBuild] = field(default_factory=dict)
    cases: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def floor(self) -> float:
        return get_config().mesh_floor_mult * self.space.mesh_h

    @property
    def straighten_floor(self) -> float:
        return max(8 * self.space.mesh_h, self.floor)

    @property
    def delta(self) -> float:
        return self.delta_for(self.lambda1)

    def delta_for(self, lam: float) -> float:
        return 1.0 / (200 * self.L**2 * lam**3)

    def floored(self, value: float, name: str, floor: Optional[float] = None) -> float:
        floor = self.floor if floor is None else floor
        if value < floor:
            self.trace.record(
                "circle.floor", case=name, scale=floor, note=f"порог {name} поднят до разрешения"
            )
            return floor
        return value

    def measured(self, *builds: _CircleBuild) -> float:
        """λ₁ узла: наибольшая измеренная λ окружностей через меньшие наборы."""
        lam = max([1.0] + [b.lam for b in builds])
        self.lambda1 = max(self.lambda1, lam)
        return lam

    def build(self, points: Sequence[int]) -> _CircleBuild:
        key = frozenset(points)
        if key not in self.memo:
            built = self._build(sorted(key))
            built.lam = measure_circle_lambda(built.circle).lambda_measured
            self.memo[key] = built
        return self.memo[key]

    def _build(self, points: List[int]) -> _CircleBuild:
        space = self.space
        if len(points) == 1:
            radius = min(2 * self.floor, space.diameter() / 2)
            circle = _small_circle_impl(space, points[0], radius, self.engine)
            self._record(points, "single", {"radius": radius})
            return _CircleBuild(circle, [LABEL_FIRST] * len(circle), "single")
        if len(points) == 2:
            arcs, _ = _bogensatz_impl(
                space, points[0], points[1], 2, engine=self.engine, trace=self.trace
            )
            circle = concatenate_to_circle(arcs[0], arcs[1])
            self._record(points, "pair", {"length": len(circle)})
            return _CircleBuild(circle, [LABEL_FIRST] * len(circle), "pair")

        ordered = _order(space, points)
        far = [space.dist(ordered[0], p) for p in ordered]
        alpha = self.build(ordered[1:])
        lam = self.measured(alpha)
        delta = self.delta_for(lam)
        choice = choose_case(far, delta, self.gap_ratio)
        self.trace.record(
            "circle.rule",
            case=choice.case,
            thresholds={"delta_pow": delta ** (len(points) - 1), "gap_ratio": self.gap_ratio},
            achieved={"s_rel": far[1] / far[-1], "m": choice.m or 0, "lambda1": lam},
            note=f"ветвь {choice.case} по правилу {choice.rule}",
        )
        if choice.case == "case2":
            return self._case_two(ordered, far, choice, lam)
        return self._case_one(ordered, far, alpha, lam, choice)

    def _case_one(
        self,
        ordered: List[int],
        far: List[float],
        alpha: _CircleBuild,
        lam: float,
        choice: CaseChoice,
    ) -> _CircleBuild:
        space = self.space
        x1, rest = ordered[0], ordered[1:]
        s = far[1]
        L = self.L
        r_in = self.floored(s / (10 * L**2 * lam), "r_in", 1.5 * self.floor)
        r_out = self.floored(s / (5 * lam), "r_out", 2 * r_in)
        if r_out >= s - space.tol:
            raise ResolutionError(
                f"s={s:.6g} слишком мало для обхода x₁ на этом разрешении", achieved=0
            )

        achieved: Dict[str, Any] = {}
        near = float(space.dist_to_set(alpha.circle.points)[x1])
        if near <= s / (10 * L * lam) + space.tol or near < r_in:
            detoured = _detour_circle_impl(alpha.circle, x1, r_in, r_out)
            self.trace.record(
                "circle.detour", case="case1", scale=r_in, thresholds={"r_out": r_out}
            )
            # β₁ держится вне B(x₁, s/20L²λ₁) = B(x₁, r_in/2)
            eps = self.floored(s / (100 * L**2 * lam), "eps_beta1", self.straighten_floor)
            ball = np.nonzero(space.ball_mask(x1, r_in / 2))[0]
            beta1, _ = _straighten_circle(
                detoured,
                [LABEL_FIRST] * len(detoured),
                rest,
                eps,
                self.trace,
                "case1.beta1",
                avoid=ball,
            )
            achieved["eps_beta1"] = eps
        else:
            beta1 = alpha.circle
        # B(x₁, s/40L²λ₁) = B(x₁, r_in/4); на разрешении не меньше 3·mesh_h
        radius = max(r_in / 4, min(r_in / 2, 3 * space.mesh_h))
        beta2 = _small_circle_impl(space, x1, radius, self.engine)
        region = space.closed_ball_mask(x1, max(4 * lam * L * far[-1], r_out + 4 * space.mesh_h))
        merged = _merge_circles_impl(
            beta1, beta2, rest, [x1], region, r_in / 2, self.engine, 2 * len(ordered), self.trace
        )
        circle, labels = self._finish(ordered, merged, "case1")
        self._record(
            ordered,
            "case1",
            {
                "rule": choice.rule,
                "lambda1": lam,
                "s": s,
                "r_in": r_in,
                "r_out": r_out,
                **achieved,
                **self._merge_summary(merged),
            },
        )
        return _CircleBuild(circle, labels, "case1")

    def _case_two(
        self, ordered: List[int], far: List[float], choice: CaseChoice, lam: float
    ) -> _CircleBuild:
        space = self.space
        h = space.mesh_h
        x1, m = ordered[0], choice.m
        cluster, outer = ordered[:m], ordered[m:]
        near, next_far = far[m - 1], far[m]

        inner = self.build(cluster)
        alpha = self.build([x1] + outer)
        lam = max(lam, self.measured(inner, alpha))
        beta2 = inner.circle
        reach = float(space.row(x1)[beta2.array].max())
        r_in = max(self.floored(4 * lam * near, "r_in"), reach + 2 * h)
        r_out = max(2 * r_in, r_in + 4 * h)
        if r_out >= next_far - h:
            r_out = (r_in + next_far) / 2
        if r_in >= next_far - 2 * h or r_out <= r_in:
            raise ConstructionError(
                f"Разрыв масштабов слишком узок: кластер достигает {reach:.6g}, "
                f"ближайшая внешняя точка на {next_far:.6g}",
                self.trace.to_list(),
            )

        detoured = _detour_circle_impl(alpha.circle, x1, r_in, r_out)
        self.trace.record("circle.detour", case="case2", scale=r_in, thresholds={"r_out": r_out})
        eps = self.floored(lam * near, "eps_beta1", self.straighten_floor)
        ball = np.nonzero(space.ball_mask(x1, r_in))[0]
        beta1, _ = _straighten_circle(
            detoured, [LABEL_FIRST] * len(detoured), outer, eps, self.trace, "case2.beta1", ball
        )
        missing = set(outer) - beta1.point_set
        if missing:
            raise ConstructionError(f"Обход потерял точки {sorted(missing)}", self.trace.to_list())

        radius = max(10 * lam**2 * self.L**2 * near, r_out + 4 * h)
        region = space.closed_ball_mask(x1, radius)
        merged = _merge_circles_impl(
            beta1,
            beta2,
            outer,
            cluster,
            region,
            r_in - reach,
            self.engine,
            2 * len(ordered),
            self.trace,
        )
        circle, labels = self._finish(ordered, merged, "case2")
        self._record(
            ordered,
            "case2",
            {
                "rule": choice.rule,
                "lambda1": lam,
                "m": m,
                "d_near": near,
                "d_next": next_far,
                "r_in": r_in,
                "r_out": r_out,
                "eps_beta1": eps,
                **self._merge_summary(merged),
            },
        )
        return _CircleBuild(circle, labels, "case2")

    def _finish(
        self, ordered: List[int], merged: MergeResult, case: str
    ) -> Tuple[DiscreteCircle, List[int]]:
        """Итоговое спрямление собранной окружности с масштабом ½σ связующих дуг."""
        eps = self.floored(merged.sigma / 2, "eps_final", self.straighten_floor)
        circle, labels = _straighten_circle(
            merged.circle, merged.labels, ordered, eps, self.trace, f"{case}.final"
        )
        missing = set(ordered) - circle.point_set
        if missing:
            raise ConstructionError(
                f"Спрямление потеряло точки {sorted(missing)}", self.trace.to_list()
            )
        return circle, labels

    @staticmethod
    def _merge_summary(merged: MergeResult) -> Dict[str, Any]:
        return {
            "sigma": merged.sigma,
            "links": merged.rule,
            "arcs_requested": merged.requested,
            "arcs_found": merged.found,
            "discarded": merged.discarded,
        }

    def _record(self, points: Sequence[int], case: str, achieved: Dict[str, Any]) -> None:
        self.cases.append({"points": sorted(int(p) for p in points), "case": case, **achieved})
        self.trace.record("circle.case", case=case, achieved={"size": len(points), **achieved})


def _order(space: MetricSpace, points: Sequence[int]) -> List[int]:
    """x₁, x₂ - ближайшая пара, остальные по возрастанию расстояния до x₁."""
    best = min(combinations(sorted(points), 2), key=lambda pq: (space.dist(*pq), pq))
    x1 = best[0]
    others = sorted((p for p in points if p != x1), key=lambda p: (space.dist(x1, p), p))
    return [x1] + others


def _scale_gap(far: Sequence[float], ratio: float) -> Optional[int]:
    """
    Размер кластера m ≥ 2 с d(x₁,x_m) ≤ ratio·d(x₁,x_{m+1}) (самый глубокий
    разрыв) или None.
    """
    best, where = ratio, None
    for m in range(2, len(far)):
        value = far[m - 1] / far[m]
        if value <= best:
            best, where = value, m
    return where


def circle_through_points(
    space: MetricSpace,
    points: Iterable[int],
    engine: Optional[str] = None,
    trace: Optional[ConstructionTrace] = None,
) -> Tuple[DiscreteCircle, ConstructionReport]:
    """
    Квазиокружность, проходящая через все точки T.

    Индукция по |T|: одна точка - малая окружность, две - пара дуг
    бугензатца; далее случай 1 (обход x₁, спрямление, слияние с малой
    окружностью вокруг x₁) или случай 2 (кластер у x₁ отделён разрывом
    масштабов: окружность кластера сливается с окружностью остальных точек).
    λ₁ каждого шага измеряется на окружностях через меньшие наборы; слияние
    идёт по 2n разделённым связующим дугам, итог спрямляется на масштабе ½σ.

    Args:
        space: Пространство
        points: Точки T (повторы отбрасываются)
        engine: Движок потока
        trace: Трасса построения

    Returns:
        tuple: (окружность, отчёт)

    Raises:
        InputError: точки T ближе 16·mesh_h друг к другу
        DetourError: аннулус вблизи T несвязен (annulus disconnected)
    """
    return safe_operation(
        _circle_through_points_impl,
        ErrorType.CONSTRUCTION_ERROR,
        show_cli_error=False,
        operation_name="Окружность через точки",
        reraise=True,
        space=space,
        points=points,
        engine=engine,
        trace=trace,
    )


def _circle_through_points_impl(
    space: MetricSpace,
    points: Iterable[int],
    engine: Optional[str] = None,
    trace: Optional[ConstructionTrace] = None,
) -> Tuple[DiscreteCircle, ConstructionReport]:
    trace = trace if trace is not None else ConstructionTrace()
    h, tol = space.mesh_h, space.tol
    marked = sorted({int(p) for p in points})
    if not marked:
        raise InputError("Множество T пусто")
    if marked[0] < 0 or marked[-1] >= space.n_points:
        raise InputError(f"Точки T вне пространства из {space.n_points} точек")
    for p, q in combinations(marked, 2):
        if space.dist(p, q) < 16 * h - tol:
            raise InputError(
                f"Точки {p} и {q} ближе 16·mesh_h: d={space.dist(p, q):.6g}, mesh_h={h:.6g}"
            )

    _check_annuli(space, marked, trace)
    constants = estimate_working_constants(space)
    builder = _CircleBuilder(space, constants.L, get_config().circle_gap_ratio, engine, trace)
    built = builder.build(marked)

    circle, labels = built.circle, built.labels
    missing = set(marked) - circle.point_set
    if missing:
        raise ConstructionError(f"Окружность не содержит точки {sorted(missing)}", trace.to_list())

    report = _circle_report(circle, labels, marked, builder)
    report.notes.extend(trace.notes())
    log_info(
        f"Окружность через {len(marked)} точек: {len(circle)} точек, "
        f"λ={report.lambda_measured:.4g}, λ₁={builder.lambda1:.4g}, случай {built.case}"
    )
    return circle, report


def _check_annuli(space: MetricSpace, marked: List[int], trace: ConstructionTrace) -> None:
    """Предпроверка ALC на масштабах между наименьшим и наибольшим расстоянием в T."""
    h = space.mesh_h
    if len(marked) >= 2:
        dists = [space.dist(p, q) for p, q in combinations(marked, 2)]
        low, high = max(4 * h, min(dists) / 2), max(dists)
    else:
        low, high = 4 * h, 16 * h
    radii = []
    r = low
    while r <= high / 2 + space.tol or not radii:
        radii.append(r)
        r *= 2
    reach = np.min(space.block(marked, range(space.n_points)), axis=0)
    cuts = [c for c in articulation_points(space) if reach[c] <= high + space.tol]
    centers = list(marked) + cuts
    estimate = annular_linear_connectivity(
        space, alc_triples_at(space, centers, radii, get_config().seed)
    )
    trace.record(
        "circle.alc",
        scale=low,
        thresholds={"r_max": radii[-1]},
        achieved={"L_alc": estimate.value, "failures": len(estimate.failures)},
    )
    if estimate.failures:
        failure = estimate.failures[0]
        log_warning(f"Аннулус несвязен: p={failure['p']}, r={failure['r']:.6g}")
        raise DetourError(
            f"Аннулус A({failure['p']}, {failure['r']:.6g}, {2 * failure['r']:.6g}) несвязен "
            "(annulus disconnected): квазиокружность через T не строится",
            trace.to_list(),
        )


def _circle_report(
    circle: DiscreteCircle, labels: List[int], marked: List[int], builder: _CircleBuilder
) -> ConstructionReport:
    space = circle.space
    lam = measure_circle_lambda(circle)
    lam_full = measure_circle_lambda(circle, min_distance=0).lambda_measured
    diam_circle = space.set_diameter(circle.points)
    diam_marked = space.set_diameter(marked) if len(marked) > 1 else 0.0
    ratio = diam_circle / diam_marked if diam_marked > 0 else math.inf
    cases = _case_scan(circle, labels, 2 * builder.lambda1)
    return ConstructionReport(
        lambda_measured=lam.lambda_measured,
        locality_eps="global",
        extras={
            "lambda_full": lam_full,
            "witness_pair": lam.extras.get("witness_pair"),
            "diam_circle": diam_circle,
            "diam_T": diam_marked,
            "diam_ratio": ratio,
            "diam_bound_ok": bool(
                diam_marked == 0 or diam_circle <= lam.lambda_measured * diam_marked + space.tol
            ),
            "L": builder.L,
            "lambda1": builder.lambda1,
            "delta": builder.delta,
            "gap_ratio": builder.gap_ratio,
            "cases": builder.cases,
            "verification_cases": cases,
            "size": len(marked),
        },
    )


def _case_scan(
    circle: DiscreteCircle, labels: List[int], bound: float
) -> Dict[str, Dict[str, Any]]:
    """
    Отношение min(diam двух дуг)/d для пар z, z' с d ≥ mesh_h по трём классам:
    (i) обе точки на β₁, (ii) обе на β₂, (iii) остальные пары.
    """
    space = circle.space
    m = len(circle)
    idx = np.arange(m)
    dist = space.block(circle.points, circle.points)
    windows = np.zeros((m, m))
    for g in range(1, m):
        windows[g] = np.maximum(
            np.maximum(windows[g - 1], np.roll(windows[g - 1], -1)), dist[idx, (idx + g) % m]
        )
    lab = np.asarray(labels)
    result = {
        name: {"bound": bound, "pairs": 0, "max_ratio": 1.0, "violations": 0}
        for name in ("i", "ii", "iii")
    }
    for g in range(1, m // 2 + 1):
        other = (idx + g) % m
        d = dist[idx, other]
        ok = d >= space.mesh_h - space.tol
        if g * 2 == m:
            ok &= idx < other
        if not ok.any():
            continue
        shorter = np.minimum(windows[g], windows[m - g][other])
        ratio = shorter / np.where(d > 0, d, 1.0)
        first = (lab == LABEL_FIRST) & (lab[other] == LABEL_FIRST)
        second = (lab == LABEL_SECOND) & (lab[other] == LABEL_SECOND)
        for name, mask in (("i", first), ("ii", second), ("iii", ~first & ~second)):
            mask = mask & ok
            if not mask.any():
                continue
            entry = result[name]
            entry["pairs"] += int(mask.sum())
            entry["max_ratio"] = max(entry["max_ratio"], float(ratio[mask].max()))
            entry["violations"] += int((ratio[mask] > bound + 1e-9).sum())
    return result
