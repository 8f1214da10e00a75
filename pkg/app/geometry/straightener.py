"""
Спрямление дуг.

Строит максимальные r-сети, семейства множеств V_x вокруг точек сети, склейку
дуги на одном масштабе (жадная цепочка по V-множествам вдоль средней части) и
многомасштабное спрямление, дающее αε-локальную λ'-квазидугу, которая
αε-следует исходной дуге.

На дискретном пространстве масштаб r = ι/20L ограничен снизу шагом mesh_h;
срабатывание этого порога попадает в отчёт и трассу.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from geometry.arc_model import (
    ConstructionReport,
    DiscreteArc,
    check_follows,
    hausdorff_to,
    measure_lambda,
)
from geometry.graph_ops import ShortestPathTree, loop_erase_labeled, shortest_path
from geometry.invariants import estimate_working_constants
from geometry.space_model import MetricSpace
from utils.config import get_config
from utils.construction_trace import ConstructionTrace
from utils.error_handler import (
    ChainStallError,
    ConstructionError,
    ErrorType,
    InputError,
    ResolutionError,
    safe_operation,
)
from utils.logger import log_debug, log_info, log_warning

Mode = Union[str, Tuple[int, int]]

# Раунды добавления мостиков между близкими непересекающимися V-множествами
_BRIDGE_ROUNDS = 8


def _points_of(arc: Union[DiscreteArc, Sequence[int]]) -> Tuple[int, ...]:
    return tuple(int(p) for p in getattr(arc, "points", arc))


def _forbidden_mask(space: MetricSpace, forbidden: Optional[Iterable[int]]) -> np.ndarray:
    mask = np.zeros(space.n_points, dtype=bool)
    if forbidden is not None:
        mask[np.asarray(sorted({int(p) for p in forbidden}), dtype=int)] = True
    return mask


# ------------------------------------------------------------------- сети


def maximal_separated_net(
    space: MetricSpace,
    r: float,
    anchors: Iterable[int],
    region: Optional[np.ndarray] = None,
) -> List[int]:
    """
    Максимальная r-разделённая сеть, содержащая якоря.

    Точки добавляются жадно в порядке индексов, поэтому результат детерминирован.

    Args:
        space: Пространство
        r: Радиус разделённости (не меньше mesh_h)
        anchors: Обязательные точки сети, попарно не ближе r
        region: Маска точек-кандидатов (по умолчанию всё пространство)

    Returns:
        list[int]: Отсортированные точки сети
    """
    return safe_operation(
        _maximal_separated_net_impl,
        ErrorType.INPUT_ERROR,
        show_cli_error=False,
        operation_name="Построение r-сети",
        reraise=True,
        space=space,
        r=r,
        anchors=anchors,
        region=region,
    )


def _maximal_separated_net_impl(
    space: MetricSpace,
    r: float,
    anchors: Iterable[int],
    region: Optional[np.ndarray] = None,
) -> List[int]:
    if r < space.mesh_h - space.tol:
        raise InputError(f"Радиус сети r={r:.6g} меньше mesh_h={space.mesh_h:.6g}")
    anchors = sorted({int(a) for a in anchors})
    for a, b in combinations(anchors, 2):
        if space.less(space.dist(a, b), r):
            raise InputError(f"Якоря сети {a} и {b} ближе r={r:.6g}")

    threshold = r - space.tol
    nearest = space.dist_to_set(anchors) if anchors else np.full(space.n_points, np.inf)
    net = list(anchors)
    candidates = np.arange(space.n_points) if region is None else np.nonzero(region)[0]
    for z in candidates:
        if nearest[z] >= threshold:
            net.append(int(z))
            nearest = np.minimum(nearest, space.row(int(z)))
    return sorted(net)


# ------------------------------------------------------------ V-семейство


@dataclass
class NetFamily:
    """
    Семейство множеств V_x над точками r-сети.

    Attributes:
        r: Радиус сети
        net: Точки сети
        members: V_x как отсортированные массивы точек
        pieces: Разложение V_x на дуги (пути шагового графа)
        delta: Достигнутая константа разделённости δ
        delta_vacuous: δr меньше минимального расстояния между точками, свойство (3)
            выполняется автоматически
        notes: Замечания построения
    """

    r: float
    net: List[int]
    members: Dict[int, np.ndarray]
    pieces: Dict[int, List[List[int]]]
    delta: float
    delta_vacuous: bool = False
    notes: List[str] = field(default_factory=list)

    @cached_property
    def sets(self) -> Dict[int, FrozenSet[int]]:
        return {x: frozenset(int(p) for p in v) for x, v in self.members.items()}

    @cached_property
    def owners(self) -> Dict[int, List[int]]:
        """Обратный индекс: точка -> точки сети x с этой точкой в V_x."""
        index: Dict[int, List[int]] = {}
        for x in self.net:
            for p in self.members[x]:
                index.setdefault(int(p), []).append(x)
        return index

    def meets(self, x: int, y: int) -> bool:
        return not self.sets[x].isdisjoint(self.sets[y])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "r": self.r,
            "net": list(self.net),
            "delta": self.delta,
            "delta_vacuous": self.delta_vacuous,
            "sizes": {str(x): int(len(v)) for x, v in self.members.items()},
            "notes": list(self.notes),
        }


def build_v_family(
    space: MetricSpace,
    net: Sequence[int],
    r: float,
    L: float,
    side_arcs: Optional[Sequence[Union[DiscreteArc, Sequence[int]]]] = None,
    forbidden: Optional[Iterable[int]] = None,
) -> NetFamily:
    """
    Строит семейство V_x со свойствами (1)–(4) и проверяет их перебором.

    (1) d(x,y) ≤ 2r ⇒ y ∈ V_x; (2) diam V_x ≤ 5Lr; (3) непересекающиеся V_x, V_y
    дальше δr; (4) B(x,r) ∩ (A₁ ∪ A₃) ⊂ V_x. Границы (2) и (1) расширены на
    несколько mesh_h: дуги в V_x идут по шагам сетки.

    Raises:
        ResolutionError: свойство (2) недостижимо при данной оценке L
        ConstructionError: проверка свойств не пройдена
    """
    return safe_operation(
        _build_v_family_impl,
        ErrorType.CONSTRUCTION_ERROR,
        show_cli_error=False,
        operation_name="Построение семейства V_x",
        reraise=True,
        space=space,
        net=net,
        r=r,
        L=L,
        side_arcs=side_arcs,
        forbidden=forbidden,
    )


def _build_v_family_impl(
    space: MetricSpace,
    net: Sequence[int],
    r: float,
    L: float,
    side_arcs: Optional[Sequence[Union[DiscreteArc, Sequence[int]]]] = None,
    forbidden: Optional[Iterable[int]] = None,
) -> NetFamily:
    h, tol = space.mesh_h, space.tol
    if r < h - tol:
        raise InputError(f"Радиус сети r={r:.6g} меньше mesh_h={h:.6g}")
    if L < 1:
        raise InputError(f"Константа связности L={L:.6g} меньше 1")
    net = sorted({int(x) for x in net})
    sides = [_points_of(a) for a in (side_arcs or ()) if len(_points_of(a))]
    allowed = ~_forbidden_mask(space, forbidden)
    notes: List[str] = []

    reach = 2 * L * r + 2 * h
    link = 2 * r + h
    diameter_bound = 5 * L * r + 4 * h
    net_arr = np.asarray(net, dtype=int)

    members: Dict[int, np.ndarray] = {}
    pieces: Dict[int, List[List[int]]] = {}
    for x in net:
        row = space.row(x)
        region = (row <= reach + tol) & allowed
        tree = ShortestPathTree(space, x, region)
        parts: List[List[int]] = [[x]]

        for y in net_arr[row[net_arr] <= link + tol]:
            if int(y) != x:
                parts.append(_connect(space, tree, x, [int(y)], allowed, notes))

        inner = row < 2 * r - tol
        for side in sides:
            for run in _runs_inside(side, inner):
                parts.append(list(run))
                parts.append(_connect(space, tree, x, run, allowed, notes))

        pieces[x] = parts
        members[x] = np.unique(np.concatenate([np.asarray(p, dtype=int) for p in parts]))

    for x in net:
        if space.set_diameter(members[x]) > diameter_bound + tol:
            raise ResolutionError(
                f"diam V_{x} превышает 5Lr при L={L:.4g}, r={r:.4g}: оценка L занижена "
                "или масштаб ниже разрешения"
            )

    ratio = get_config().grid_ratio
    min_sep = space.min_separation()
    delta = 1.0 / (4 * L)
    while True:
        gap = delta * r
        if gap < min_sep - tol:
            family = NetFamily(r, net, dict(members), {x: list(p) for x, p in pieces.items()},
                               delta, delta_vacuous=True, notes=notes)
            family.notes.append(
                f"δr={gap:.4g} меньше минимального расстояния {min_sep:.4g}: свойство (3) "
                "выполняется автоматически"
            )
            break
        grown, grown_pieces, left = _bridge(space, net, members, pieces, gap, diameter_bound, allowed)
        if not left:
            family = NetFamily(r, net, grown, grown_pieces, delta, notes=notes)
            break
        log_debug(f"δ={delta:.4g}: {len(left)} пар V-множеств ближе δr, уменьшаем δ")
        delta /= ratio

    failures = verify_v_family(space, family, L, sides)
    if failures:
        raise ConstructionError(
            "Семейство V_x не прошло проверку свойств: " + "; ".join(failures[:5])
        )
    log_debug(
        f"Семейство V_x: |сеть|={len(net)}, r={r:.4g}, δ={family.delta:.4g}"
        f"{' (вакуумно)' if family.delta_vacuous else ''}"
    )
    return family


def _connect(
    space: MetricSpace,
    tree: ShortestPathTree,
    x: int,
    targets: Sequence[int],
    allowed: np.ndarray,
    notes: List[str],
) -> List[int]:
    """Путь от x к ближайшей из целей внутри шара; вне шара - с пометкой."""
    target = tree.nearest(targets)
    if target is not None:
        return tree.path_to(target)
    path = shortest_path(space, [x], targets, allowed)
    if path is None:
        raise ResolutionError(f"Точку {x} нельзя соединить с {list(targets)[:3]} вне запрета")
    notes.append(f"путь из V_{x} вышел из шара B(x, 2Lr): оценка L занижена")
    return path


def _runs_inside(points: Tuple[int, ...], inside: np.ndarray) -> List[Tuple[int, ...]]:
    """Максимальные отрезки последовательности, целиком лежащие в маске."""
    runs, current = [], []
    for p in points:
        if inside[p]:
            current.append(p)
        elif current:
            runs.append(tuple(current))
            current = []
    if current:
        runs.append(tuple(current))
    return runs


def _close_disjoint_pairs(
    space: MetricSpace, net: Sequence[int], members: Dict[int, np.ndarray], gap: float
) -> List[Tuple[int, int]]:
    tol = space.tol
    sets = {x: frozenset(int(p) for p in members[x]) for x in net}
    radius = {x: float(space.row(x)[members[x]].max()) for x in net}
    widest = max(radius.values(), default=0.0)
    net_arr = np.asarray(net, dtype=int)
    pairs = []
    for x in net:
        row = space.row(x)
        near = net_arr[row[net_arr] <= radius[x] + widest + gap + tol]
        for y in near:
            y = int(y)
            if y <= x or row[y] > radius[x] + radius[y] + gap + tol:
                continue
            if not sets[x].isdisjoint(sets[y]):
                continue
            if space.block(members[x], members[y]).min() <= gap + tol:
                pairs.append((x, y))
    return pairs


def _bridge(
    space: MetricSpace,
    net: Sequence[int],
    members: Dict[int, np.ndarray],
    pieces: Dict[int, List[List[int]]],
    gap: float,
    diameter_bound: float,
    allowed: np.ndarray,
):
    """
    Соединяет мостиками непересекающиеся V-множества на расстоянии ≤ gap,
    пока это не нарушает границу диаметра.

    Returns:
        tuple: (новые members, новые pieces, оставшиеся близкие пары)
    """
    members = dict(members)
    pieces = {x: list(p) for x, p in pieces.items()}
    left: List[Tuple[int, int]] = []
    for _ in range(_BRIDGE_ROUNDS):
        left = _close_disjoint_pairs(space, net, members, gap)
        if not left:
            return members, pieces, left
        changed = False
        for x, y in left:
            if np.intersect1d(members[x], members[y]).size:
                continue
            path = shortest_path(space, members[x], members[y], allowed)
            if path is None:
                continue
            for owner in (x, y):
                grown = np.union1d(members[owner], path)
                if space.set_diameter(grown) <= diameter_bound + space.tol:
                    members[owner] = grown
                    pieces[owner].append(path)
                    changed = True
                    break
        if not changed:
            break
    left = _close_disjoint_pairs(space, net, members, gap)
    return members, pieces, left


def verify_v_family(
    space: MetricSpace,
    family: NetFamily,
    L: float,
    side_arcs: Optional[Sequence[Union[DiscreteArc, Sequence[int]]]] = None,
) -> List[str]:
    """
    Перебором проверяет свойства (1)–(4) семейства.

    Returns:
        list[str]: Описания нарушений (пустой список, если всё выполнено)
    """
    h, tol, r = space.mesh_h, space.tol, family.r
    failures: List[str] = []
    net_arr = np.asarray(family.net, dtype=int)
    side_points = np.asarray(
        sorted({p for a in (side_arcs or ()) for p in _points_of(a)}), dtype=int
    )
    for x in family.net:
        row = space.row(x)
        own = family.sets[x]
        for y in net_arr[row[net_arr] <= 2 * r + tol]:
            if int(y) not in own:
                failures.append(f"(1): точка сети {int(y)} не лежит в V_{x}")
        if space.set_diameter(family.members[x]) > 5 * L * r + 4 * h + tol:
            failures.append(f"(2): diam V_{x} > 5Lr")
        if len(side_points):
            for p in side_points[row[side_points] < r - tol]:
                if int(p) not in own:
                    failures.append(f"(4): точка боковой дуги {int(p)} из B({x}, r) не лежит в V_{x}")
    if not family.delta_vacuous:
        for x, y in _close_disjoint_pairs(space, family.net, family.members, family.delta * r):
            failures.append(f"(3): V_{x} и V_{y} не пересекаются, но ближе δr")
    return failures


# ------------------------------------------------------- трёхчастная дуга


@dataclass(frozen=True)
class ThreePieceArc:
    """
    Дуга A = A₁ ∪ A₂ ∪ A₃ с разрезами в позициях first_cut (a₁) и second_cut (a₂).

    Attributes:
        arc: Дуга
        first_cut: Позиция a₁
        second_cut: Позиция a₂
        eps: Масштаб ε; при check_hypothesis требуется d(A₁, A₃) ≥ 2ε
        check_hypothesis: Проверять ли гипотезу о расстоянии (в режиме всей
            дуги A₁ = {a₀}, A₃ = {a₃} она не требуется)
    """

    arc: DiscreteArc
    first_cut: int
    second_cut: int
    eps: float
    check_hypothesis: bool = True

    def __post_init__(self):
        n = len(self.arc)
        if not 0 <= self.first_cut <= self.second_cut < n:
            raise InputError(
                f"Некорректные разрезы ({self.first_cut}, {self.second_cut}) дуги длины {n}"
            )
        if self.eps <= 0:
            raise InputError(f"Масштаб eps должен быть положительным: {self.eps}")
        if self.check_hypothesis:
            space = self.arc.space
            gap = space.set_distance(self.head, self.tail)
            if space.less(gap, 2 * self.eps):
                raise InputError(
                    f"d(A₁, A₃)={gap:.6g} меньше 2·eps={2 * self.eps:.6g}"
                )

    @classmethod
    def whole(cls, arc: DiscreteArc, eps: float) -> "ThreePieceArc":
        """Вырожденный случай A₁ = {a₀}, A₃ = {a₃}: спрямляется вся дуга."""
        return cls(arc, 0, len(arc) - 1, eps, check_hypothesis=False)

    @property
    def head(self) -> Tuple[int, ...]:
        return self.arc.points[: self.first_cut + 1]

    @property
    def middle(self) -> Tuple[int, ...]:
        return self.arc.points[self.first_cut : self.second_cut + 1]

    @property
    def tail(self) -> Tuple[int, ...]:
        return self.arc.points[self.second_cut :]

    @cached_property
    def distance_to_middle(self) -> np.ndarray:
        """d(A_i, A₂) для каждой позиции дуги."""
        return self.arc.space.dist_to_set(self.middle)[self.arc.array]

    def initial_component_end(self) -> int:
        """Последняя позиция начальной компоненты A ∖ N(A₂, 2ε) или −1, если она пуста."""
        far = self.distance_to_middle >= 2 * self.eps - self.arc.space.tol
        if not far[0]:
            return -1
        close = np.nonzero(~far)[0]
        return int(close[0]) - 1 if len(close) else len(self.arc) - 1

    def final_component_start(self) -> int:
        """Первая позиция конечной компоненты A ∖ N(A₂, 2ε) или len(A), если она пуста."""
        far = self.distance_to_middle >= 2 * self.eps - self.arc.space.tol
        if not far[-1]:
            return len(self.arc)
        close = np.nonzero(~far)[0]
        return int(close[-1]) + 1 if len(close) else 0

    def side_lambdas(self) -> Tuple[float, float]:
        """Измеренные ε-локальные константы квазидуг A₁ и A₃."""
        values = []
        for points in (self.head, self.tail):
            if len(points) < 2:
                values.append(1.0)
            else:
                arc = DiscreteArc(self.arc.space, points)
                values.append(measure_lambda(arc, locality=self.eps).lambda_measured)
        return values[0], values[1]


# ------------------------------------------------- склейка на одном масштабе


def single_scale_join(
    three_piece: ThreePieceArc,
    iota: float,
    L: Optional[float] = None,
    forbidden: Optional[Iterable[int]] = None,
    trace: Optional[ConstructionTrace] = None,
) -> Tuple[DiscreteArc, ConstructionReport]:
    """
    Склеивает A₁ и A₃ через окрестность A₂ цепочкой V-множеств на масштабе ι.

    Args:
        three_piece: Трёхчастная дуга
        iota: Масштаб следования, 0 < ι < ε
        L: Константа связности (по умолчанию рабочая оценка пространства)
        forbidden: Точки, которые новая дуга не должна посещать
        trace: Трасса для записи этапов

    Returns:
        tuple: (дуга J, отчёт с r, δ, s, S, смещением и оценкой диаметров подуг по случаям)
    """
    return safe_operation(
        _single_scale_join_impl,
        ErrorType.CONSTRUCTION_ERROR,
        show_cli_error=False,
        operation_name="Склейка дуги на одном масштабе",
        reraise=True,
        three_piece=three_piece,
        iota=iota,
        L=L,
        forbidden=forbidden,
        trace=trace,
    )


def _single_scale_join_impl(
    three_piece: ThreePieceArc,
    iota: float,
    L: Optional[float] = None,
    forbidden: Optional[Iterable[int]] = None,
    trace: Optional[ConstructionTrace] = None,
) -> Tuple[DiscreteArc, ConstructionReport]:
    arc = three_piece.arc
    space = arc.space
    h, tol = space.mesh_h, space.tol
    trace = trace if trace is not None else ConstructionTrace()
    if not 0 < iota < three_piece.eps + tol:
        raise InputError(f"Масштаб ι={iota:.6g} вне (0, eps={three_piece.eps:.6g})")
    if L is None:
        L = estimate_working_constants(space).L
    i1, i2 = three_piece.first_cut, three_piece.second_cut
    lam_head, lam_tail = three_piece.side_lambdas()

    if i1 == i2:
        report = ConstructionReport(
            lambda_measured=measure_lambda(arc, locality=iota).lambda_measured,
            locality_eps=iota,
            follows_iota=iota,
            notes=["средняя часть пуста: J = A"],
            extras={"r": None, "delta": None, "chain_length": 0, "floored": False,
                    "q_first": i1, "q_last": i2, "coarse_displacement": 0.0,
                    "follows_displacement": 0.0, "follows_ok": True},
        )
        trace.record("straighten.join", case="trivial", scale=iota, note="A₂ пуста")
        return arc, report

    raw_r = iota / (20 * L)
    r = max(raw_r, h)
    floored = raw_r < h
    blocked_base = _forbidden_mask(space, forbidden)

    to_middle = space.dist_to_set(three_piece.middle)
    region = (to_middle <= 11 * L * r + 5 * h + tol) & ~blocked_base
    anchors = [arc.start]
    if not space.less(space.dist(arc.start, arc.end), r):
        anchors.append(arc.end)
    net = _maximal_separated_net_impl(space, r, anchors, region)
    family = _build_v_family_impl(
        space, net, r, L, side_arcs=(three_piece.head, three_piece.tail), forbidden=forbidden
    )
    delta = family.delta
    s = delta * r / iota
    big_s = (11 * L * L * r + 8 * h) / iota
    trace.record(
        "straighten.family",
        case="floored" if floored else None,
        scale=r,
        thresholds={"iota": iota, "L": L, "raw_r": raw_r},
        achieved={"net": len(net), "delta": delta, "delta_vacuous": family.delta_vacuous},
        note="r ограничен снизу mesh_h" if floored else None,
    )

    centers = _ball_centers(space, three_piece.middle, family.net)
    chain, q_first, q_last = _greedy_chain(three_piece, family, centers, trace)
    points, labels = _assemble(arc, family, chain, q_first, q_last, blocked_base, L, r, trace)
    joined = DiscreteArc(space, points)

    head_end = three_piece.initial_component_end()
    tail_start = three_piece.final_component_start()
    _check_components(arc, joined, head_end, tail_start, trace)

    follows = check_follows(joined, arc, iota)
    coarse = hausdorff_to(joined, arc)
    floor = get_config().mesh_floor_mult * h
    star = _star_scan(
        joined, labels, s * iota, big_s * iota, L, r, delta, max(lam_head, lam_tail), floor
    )

    report = ConstructionReport(
        lambda_measured=measure_lambda(joined, locality=iota).lambda_measured,
        locality_eps=iota,
        follows_iota=iota,
        notes=list(family.notes),
        extras={
            "r": r,
            "floored": floored,
            "delta": delta,
            "delta_vacuous": family.delta_vacuous,
            "s": s,
            "S": big_s,
            "L": L,
            "net_size": len(net),
            "centers": len(centers),
            "chain_length": len(chain),
            "q_first": q_first,
            "q_last": joined.position[arc.points[q_last]],
            "coarse_displacement": coarse,
            "follows_displacement": follows.displacement,
            "follows_ok": follows.ok,
            "lambda_sides": [lam_head, lam_tail],
            "star": star,
        },
    )
    if floored:
        report.notes.append(f"r = ι/20L = {raw_r:.4g} ниже mesh_h: взят r = mesh_h")
    if not follows.ok:
        trace.record(
            "straighten.follows",
            case="floored" if floored else "failed",
            scale=iota,
            achieved={"displacement": follows.displacement, "witness": follows.witness[2]},
            note=f"смещение {follows.displacement:.4g} превышает ι={iota:.4g}",
        )
        if not floored:
            raise ConstructionError(
                f"Дуга не ι-следует входу: смещение {follows.displacement:.4g} > ι={iota:.4g}",
                trace.to_list(),
            )
        report.notes.append(
            f"смещение {follows.displacement:.4g} превышает ι на этом масштабе разрешения"
        )
    if star["vacuous"]:
        report.notes.append("оценка диаметров подуг вакуумна: нет пар с mesh_h ≤ d < sι")
    if star["violations"]:
        trace.record(
            "straighten.star",
            case="failed",
            scale=iota,
            thresholds={"s_iota": s * iota, "S_iota": big_s * iota, "floor": floor},
            achieved={"violations": star["violations"], "pairs": star["pairs"]},
        )
        raise ConstructionError(
            f"оценка диаметров подуг нарушена на {star['violations']} парах при ι={iota:.4g}",
            trace.to_list(),
        )
    if star["violations_below_floor"]:
        log_warning(
            f"оценка диаметров подуг нарушена на {star['violations_below_floor']} парах "
            f"ниже порога разрешения при ι={iota:.4g}"
        )
        report.notes.append(
            f"ниже порога разрешения оценка нарушена на {star['violations_below_floor']} парах"
        )
    trace.record(
        "straighten.join",
        case="floored" if floored else "scale",
        scale=iota,
        thresholds={"s": s, "S": big_s},
        achieved={"chain": len(chain), "displacement": follows.displacement,
                  "star_pairs": star["pairs"], "star_violations": star["violations"]},
    )
    return joined, report


def _ball_centers(space: MetricSpace, middle: Sequence[int], net: Sequence[int]) -> List[int]:
    """Центры шаров B(z, r), покрывающих A₂, в порядке обхода A₂."""
    net_arr = np.asarray(net, dtype=int)
    nearest = net_arr[np.argmin(space.block(middle, net_arr), axis=1)]
    centers: List[int] = []
    for z in nearest:
        if not centers or centers[-1] != int(z):
            centers.append(int(z))
    return centers


def _greedy_chain(
    three_piece: ThreePieceArc,
    family: NetFamily,
    centers: List[int],
    trace: ConstructionTrace,
) -> Tuple[List[int], int, int]:
    """
    Жадная цепочка w₀, w₁, ..., w_n.

    Returns:
        tuple: (цепочка, позиция q₀ в A₁, позиция q_{n+1} в A₃)
    """
    arc = three_piece.arc
    i1, i2 = three_piece.first_cut, three_piece.second_cut
    sets, owners = family.sets, family.owners

    center_hits: Dict[int, int] = {}
    for j, z in enumerate(centers):
        for p in family.members[z]:
            center_hits[int(p)] = j

    def reach_index(w: int) -> int:
        return max((center_hits.get(int(p), -1) for p in family.members[w]), default=-1)

    union = set(center_hits)
    meeting = {w for p in union for w in owners.get(p, ())}

    q_first, w0 = None, None
    for pos in range(max(three_piece.initial_component_end(), 0), i1 + 1):
        candidates = [w for w in owners.get(arc.points[pos], ()) if w in meeting]
        if candidates:
            q_first = pos
            w0 = max(candidates, key=lambda w: (reach_index(w), -w))
            break
    if q_first is None:
        trace.record("straighten.chain", case="stall", note="q₀ не найдена в A₁")
        raise ChainStallError("Ни одна точка A₁ не лежит в V-множестве, задевающем A₂",
                              trace.to_list())

    last_allowed = min(three_piece.final_component_start(), len(arc) - 1)
    tail_positions = {arc.points[pos]: pos for pos in range(i2, last_allowed + 1)}

    def tail_hit(w: int) -> int:
        return max((tail_positions.get(int(p), -1) for p in family.members[w]), default=-1)

    chain = [w0]
    visited = {w0}
    k = reach_index(w0)
    while tail_hit(chain[-1]) < 0:
        nxt = centers[k] if k >= 0 else None
        if nxt is None or nxt in visited:
            trace.record("straighten.chain", case="stall", achieved={"links": len(chain), "k": k})
            raise ChainStallError(
                f"Жадная цепочка застряла после {len(chain)} звеньев (k={k} из {len(centers)})",
                trace.to_list(),
            )
        chain.append(nxt)
        visited.add(nxt)
        k_next = reach_index(nxt)
        if k_next <= k and tail_hit(nxt) < 0:
            trace.record("straighten.chain", case="stall", achieved={"links": len(chain), "k": k})
            raise ChainStallError(
                f"Жадная цепочка не продвигается: k={k} после {len(chain)} звеньев",
                trace.to_list(),
            )
        k = k_next

    last = chain[-1]
    finals = [last] + [
        x for x in family.net if x != last and family.meets(x, last) and tail_hit(x) >= 0
    ]
    best = max(finals, key=lambda x: (tail_hit(x), -x))
    if best != last:
        chain.append(best)
    trace.record(
        "straighten.chain",
        achieved={"links": len(chain), "q_first": q_first, "q_last": tail_hit(best)},
    )
    return chain, q_first, tail_hit(best)


def _assemble(
    arc: DiscreteArc,
    family: NetFamily,
    chain: List[int],
    q_first: int,
    q_last: int,
    blocked_base: np.ndarray,
    L: float,
    r: float,
    trace: ConstructionTrace,
) -> Tuple[List[int], List[int]]:
    """
    Собирает J₋₁ ∪ J₀ ∪ ... ∪ J_{n+1} и стирает петли.

    Returns:
        tuple: (точки дуги, номер куска каждой точки; −1 для A₁, len(chain) для A₃)
    """
    space = arc.space
    blocked = blocked_base.copy()
    blocked[arc.array[:q_first]] = True
    blocked[arc.array[q_last + 1 :]] = True
    q_end = arc.points[q_last]

    walk: List[Tuple[int, int]] = [(p, -1) for p in arc.points[: q_first + 1]]
    current = arc.points[q_first]
    for i, w in enumerate(chain):
        own = np.zeros(space.n_points, dtype=bool)
        own[family.members[w]] = True
        if i + 1 < len(chain):
            nxt = family.sets[chain[i + 1]]
            targets = [p for p in family.sets[w] & nxt if not blocked[p]]
            wider_targets = [p for p in nxt if not blocked[p]]
            wider = own.copy()
            wider[family.members[chain[i + 1]]] = True
        else:
            targets = wider_targets = [q_end]
            wider = own
        path = _piece_path(space, current, targets, own & ~blocked)
        if path is None:
            path = _piece_path(space, current, wider_targets, wider & ~blocked)
        if path is None:
            ball = space.closed_ball_mask(w, 4 * L * r + 4 * space.mesh_h) & ~blocked
            path = _piece_path(space, current, wider_targets, ball)
            if path is not None:
                trace.record("straighten.piece", case="fallback", note=f"J_{i} вышла из V_{w}")
        if path is None:
            raise ChainStallError(f"Кусок J_{i} внутри V_{w} не строится", trace.to_list())
        walk.extend((p, i) for p in path[1:])
        current = path[-1]

    walk.extend((p, len(chain)) for p in arc.points[q_last + 1 :])
    erased = loop_erase_labeled(walk)
    return [p for p, _ in erased], [label for _, label in erased]


def _piece_path(
    space: MetricSpace, start: int, targets: Sequence[int], inside: np.ndarray
) -> Optional[List[int]]:
    if not targets:
        return None
    inside = inside.copy()
    inside[start] = True
    return shortest_path(space, [start], targets, inside)


def _check_components(
    arc: DiscreteArc,
    joined: DiscreteArc,
    head_end: int,
    tail_start: int,
    trace: ConstructionTrace,
) -> None:
    """Начальная и конечная компоненты A ∖ N(A₂, 2ε) должны сохраниться поточечно."""
    head = arc.points[: head_end + 1]
    tail = arc.points[tail_start:]
    ok = joined.points[: len(head)] == head
    if tail:
        ok = ok and joined.points[-len(tail) :] == tail
    if not ok:
        trace.record("straighten.components", case="lost")
        raise ConstructionError(
            "Склейка потеряла начальную или конечную компоненту дуги", trace.to_list()
        )


def _classify(a: int, b: int, side_last: int) -> str:
    sides = (-1, side_last)
    if a in sides and b in sides:
        return "iii" if a == b else "iv"
    if a in sides or b in sides:
        return "ii"
    return "i" if abs(a - b) <= 1 else "iv"


def _star_scan(
    joined: DiscreteArc,
    labels: List[int],
    s_iota: float,
    big_s_iota: float,
    L: float,
    r: float,
    delta: float,
    lam_side: float,
    floor: float,
) -> Dict[str, Any]:
    """
    Перебор пар (x, y) дуги с mesh_h ≤ d(x,y) < sι: проверка diam J[x,y] < Sι
    (нарушения на парах с d(x,y) < floor учитываются отдельно)
    и границ по случаям (i) соседние куски цепи, (ii) цепь и боковая дуга,
    (iii) одна боковая дуга, (iv) остальные.
    """
    space = joined.space
    h, tol = space.mesh_h, space.tol
    bounds = {
        "i": 10 * L * r + 4 * h,
        "ii": 11 * L * L * r + 8 * h,
        "iii": max(L, lam_side) * delta * r + 2 * h,
        "iv": 11 * L * L * r + 8 * h,
    }
    cases = {
        name: {"bound": bound, "pairs": 0, "max_diameter": 0.0, "violations": 0}
        for name, bound in bounds.items()
    }
    lab = np.asarray(labels)
    side_last = int(lab.max())
    dist = space.block(joined.points, joined.points)
    m = len(joined)
    window = np.zeros(m)
    pairs = violations = below_floor = 0
    for g in range(1, m):
        d = np.diagonal(dist, offset=g)
        window = np.maximum(np.maximum(window[:-1], window[1:]), d)
        ok = (d >= h - tol) & (d < s_iota - tol)
        for i in np.nonzero(ok)[0]:
            pairs += 1
            width = float(window[i])
            if width >= big_s_iota - tol:
                if d[i] >= floor - tol:
                    violations += 1
                else:
                    below_floor += 1
            case = cases[_classify(int(lab[i]), int(lab[i + g]), side_last)]
            case["pairs"] += 1
            case["max_diameter"] = max(case["max_diameter"], width)
            if width > case["bound"] + tol:
                case["violations"] += 1
    return {
        "vacuous": pairs == 0,
        "pairs": pairs,
        "violations": violations,
        "violations_below_floor": below_floor,
        "cases": cases,
    }


# ------------------------------------------------- многомасштабное спрямление


def straighten(
    arc: DiscreteArc,
    eps: float,
    mode: Mode = "whole-arc",
    forbidden: Optional[Iterable[int]] = None,
    L: Optional[float] = None,
    trace: Optional[ConstructionTrace] = None,
) -> Tuple[DiscreteArc, ConstructionReport]:
    """
    Спрямляет дугу: результат - αε-локальная λ'-квазидуга, αε-следующая A.

    Args:
        arc: Исходная дуга
        eps: Масштаб ε (не меньше 8·mesh_h)
        mode: "whole-arc" или пара позиций разрезов (a₁, a₂)
        forbidden: Точки, которые новая дуга не должна посещать
        L: Константа связности (по умолчанию рабочая оценка пространства)
        trace: Трасса для записи этапов

    Returns:
        tuple: (дуга J, отчёт с α, λ', смещением и проходами по масштабам)
    """
    return safe_operation(
        _straighten_impl,
        ErrorType.CONSTRUCTION_ERROR,
        show_cli_error=False,
        operation_name="Спрямление дуги",
        reraise=True,
        arc=arc,
        eps=eps,
        mode=mode,
        forbidden=forbidden,
        L=L,
        trace=trace,
    )


def _straighten_impl(
    arc: DiscreteArc,
    eps: float,
    mode: Mode = "whole-arc",
    forbidden: Optional[Iterable[int]] = None,
    L: Optional[float] = None,
    trace: Optional[ConstructionTrace] = None,
) -> Tuple[DiscreteArc, ConstructionReport]:
    space = arc.space
    h, tol = space.mesh_h, space.tol
    trace = trace if trace is not None else ConstructionTrace()
    if eps < 8 * h - tol:
        raise InputError(f"eps={eps:.6g} меньше 8·mesh_h={8 * h:.6g}")
    if len(arc) < 2:
        raise InputError("Спрямлять можно дугу хотя бы из 2 точек")
    if mode == "whole-arc":
        original = ThreePieceArc.whole(arc, eps)
    else:
        i1, i2 = mode
        original = ThreePieceArc(arc, int(i1), int(i2), eps)
    if L is None:
        L = estimate_working_constants(space).L

    current, joined = original, arc
    passes: List[Dict[str, Any]] = []
    iota = eps / 2
    while iota >= 4 * h - tol:
        joined, step = _single_scale_join_impl(current, iota, L, forbidden, trace)
        passes.append(
            {
                "iota": iota,
                "r": step.extras.get("r"),
                "delta": step.extras.get("delta"),
                "chain_length": step.extras.get("chain_length"),
                "displacement": step.extras.get("follows_displacement"),
                "star_vacuous": step.extras.get("star", {}).get("vacuous", True),
                "star_violations": step.extras.get("star", {}).get("violations", 0),
            }
        )
        current = ThreePieceArc(
            joined,
            int(step.extras["q_first"]),
            int(step.extras["q_last"]),
            eps,
            check_hypothesis=False,
        )
        if step.extras.get("floored"):
            break
        iota /= 2

    floor = get_config().mesh_floor_mult * h
    # каждый проход ι_k-следует предыдущему, поэтому J следует A с суммой ι_k
    bound = sum(max(p["iota"], floor) for p in passes) if passes else floor
    displacement = check_follows(joined, arc, math.inf).displacement
    scale = max(displacement, floor)
    produced = measure_lambda(joined, locality=scale).lambda_measured
    baseline = measure_lambda(arc, locality=scale).lambda_measured

    notes: List[str] = []
    returned_input = joined != arc and baseline <= produced
    if returned_input:
        notes.append(
            f"вход не хуже выхода (λ {baseline:.4g} ≤ {produced:.4g}): возвращается исходная дуга"
        )
        joined, scale, displacement = arc, floor, 0.0
        produced = measure_lambda(arc, locality=scale).lambda_measured

    certificate = check_follows(joined, arc, bound)
    if not certificate.ok:
        trace.record(
            "straighten.certify",
            case="failed",
            thresholds={"bound": bound},
            achieved={"displacement": certificate.displacement},
        )
        raise ConstructionError(
            f"Следование не подтверждено: смещение {certificate.displacement:.4g} > "
            f"αε={bound:.4g}",
            trace.to_list(),
        )
    if mode != "whole-arc":
        _check_components(
            arc, joined, original.initial_component_end(), original.final_component_start(), trace
        )

    report = ConstructionReport(
        lambda_measured=produced,
        locality_eps=scale,
        follows_iota=bound,
        notes=notes + trace.notes(),
        extras={
            "alpha": scale / eps,
            "alpha_bound": bound / eps,
            "eps": eps,
            "mode": mode if mode == "whole-arc" else list(mode),
            "L": L,
            "baseline_lambda": baseline,
            "displacement": displacement,
            "returned_input": returned_input,
            "passes": passes,
        },
    )
    trace.record(
        "straighten.result",
        case="input" if returned_input else "joined",
        scale=scale,
        thresholds={"eps": eps, "bound": bound},
        achieved={"alpha": scale / eps, "lambda": produced, "baseline": baseline},
    )
    log_info(
        f"Спрямление: λ'={produced:.4g} (вход {baseline:.4g}) на масштабе αε={scale:.4g}, "
        f"проходов {len(passes)}"
    )
    return joined, report
