"""
Дискретные дуги и окружности: алгебра подуг, измерение константы квазидуги,
проверка ι-следования и относительной разделённости, склейка в окружность.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from geometry.space_model import MetricSpace
from utils.error_handler import ArcOverlapError, InputError

Scalar = Union[float, str]


@dataclass(frozen=True, eq=False)
class DiscreteArc:
    """
    Упорядоченная инъективная последовательность точек с шагом ≤ mesh_h.

    Attributes:
        space: Пространство, которому принадлежат точки
        points: Индексы точек в порядке обхода
    """

    space: MetricSpace
    points: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(int(p) for p in self.points))
        _validate_sequence(self.space, self.points, cyclic=False)

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiscreteArc):
            return NotImplemented
        return self.space is other.space and self.points == other.points

    def __hash__(self) -> int:
        return hash((id(self.space), self.points))

    @property
    def start(self) -> int:
        return self.points[0]

    @property
    def end(self) -> int:
        return self.points[-1]

    @cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=int)

    @cached_property
    def position(self) -> Dict[int, int]:
        """Позиция каждой точки в дуге."""
        return {p: i for i, p in enumerate(self.points)}

    @cached_property
    def point_set(self) -> frozenset:
        return frozenset(self.points)

    def interior(self) -> Tuple[int, ...]:
        return self.points[1:-1]

    def reversed(self) -> "DiscreteArc":
        return DiscreteArc(self.space, self.points[::-1])

    def to_dict(self, space_ref: Optional[str] = None) -> Dict[str, Any]:
        return {"space_ref": space_ref, "points": list(self.points), "cyclic": False}


@dataclass(frozen=True, eq=False)
class DiscreteCircle:
    """Циклическая инъективная последовательность (≥ 3 точек), включая шаг замыкания."""

    space: MetricSpace
    points: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(int(p) for p in self.points))
        if len(self.points) < 3:
            raise InputError(f"Окружность должна содержать не меньше 3 точек: {len(self.points)}")
        _validate_sequence(self.space, self.points, cyclic=True)

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiscreteCircle):
            return NotImplemented
        return self.space is other.space and self.points == other.points

    def __hash__(self) -> int:
        return hash((id(self.space), self.points, "cyclic"))

    @cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=int)

    @cached_property
    def position(self) -> Dict[int, int]:
        return {p: i for i, p in enumerate(self.points)}

    @cached_property
    def point_set(self) -> frozenset:
        return frozenset(self.points)

    def rotated(self, start: int) -> "DiscreteCircle":
        """Та же окружность, начинающаяся с точки start."""
        i = self.position[start]
        return DiscreteCircle(self.space, self.points[i:] + self.points[:i])

    def to_dict(self, space_ref: Optional[str] = None) -> Dict[str, Any]:
        return {"space_ref": space_ref, "points": list(self.points), "cyclic": True}


def _validate_sequence(space: MetricSpace, points: Tuple[int, ...], cyclic: bool) -> None:
    if not points:
        raise InputError("Дуга должна содержать хотя бы одну точку")
    arr = np.asarray(points, dtype=int)
    if arr.min() < 0 or arr.max() >= space.n_points:
        raise InputError("Дуга ссылается на несуществующую точку")
    if len(set(points)) != len(points):
        seen = set()
        for p in points:
            if p in seen:
                raise InputError(f"Дуга не инъективна: точка {p} встречается дважды")
            seen.add(p)
    if len(points) < 2:
        return
    nxt = np.roll(arr, -1) if cyclic else arr[1:]
    cur = arr if cyclic else arr[:-1]
    for a, b in zip(cur, nxt):
        step = space.dist(int(a), int(b))
        if step > space.mesh_h + space.tol:
            raise InputError(
                f"Шаг {int(a)}→{int(b)} длины {step:.6g} превышает mesh_h={space.mesh_h:.6g}"
            )


@dataclass
class ConstructionReport:
    """
    Измеренные константы построения.

    Attributes:
        lambda_measured: Константа квазидуги/квазиокружности (≥ 1)
        locality_eps: Масштаб локальности или "global"
        follows_iota: Расстояние следования ι или "not-applicable"
        separation_eta: Относительная разделённость η или "not-applicable"
        notes: Замечания (срабатывание порогов разрешения, откаты и т.п.)
        extras: Дополнительные измерения конкретной конструкции
    """

    lambda_measured: float = 1.0
    locality_eps: Scalar = "global"
    follows_iota: Scalar = "not-applicable"
    separation_eta: Scalar = "not-applicable"
    notes: List[str] = field(default_factory=list)
    extras: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        result = {
            "lambda_measured": to_plain(self.lambda_measured),
            "locality_eps": to_plain(self.locality_eps),
            "follows_iota": to_plain(self.follows_iota),
            "separation_eta": to_plain(self.separation_eta),
            "notes": list(self.notes),
        }
        for key, value in self.extras.items():
            result[key] = to_plain(value)
        return result


def to_plain(value: Any) -> Any:
    """Приведение numpy-типов и бесконечностей к JSON-совместимому виду."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    return value


# ------------------------------------------------------------------ подуги


def subarc(arc: DiscreteArc, i: int, j: int) -> DiscreteArc:
    """Замкнутая, возможно тривиальная, подуга между позициями i и j."""
    n = len(arc)
    if not (0 <= i < n and 0 <= j < n):
        raise InputError(f"Индексы подуги вне диапазона: ({i}, {j}) при длине {n}")
    lo, hi = min(i, j), max(i, j)
    if lo == 0 and hi == n - 1:
        return arc
    return DiscreteArc(arc.space, arc.points[lo : hi + 1])


def diam(arc: Union[DiscreteArc, DiscreteCircle]) -> float:
    """Максимум попарных расстояний точек дуги."""
    return arc.space.set_diameter(arc.points)


def arc_length(arc: Union[DiscreteArc, DiscreteCircle]) -> float:
    """Сумма длин шагов (для окружности - с шагом замыкания)."""
    seq = arc.array
    if len(seq) < 2:
        return 0.0
    space = arc.space
    nxt = np.roll(seq, -1) if isinstance(arc, DiscreteCircle) else seq[1:]
    cur = seq if isinstance(arc, DiscreteCircle) else seq[:-1]
    return float(sum(space.dist(int(a), int(b)) for a, b in zip(cur, nxt)))


def hausdorff_to(arc_b: DiscreteArc, arc_a: DiscreteArc) -> float:
    """Одностороннее расстояние Хаусдорфа max_{z∈B} d(z, A)."""
    return float(arc_b.space.dist_to_set(arc_a.points)[arc_b.array].max())


def measure_lambda(
    arc: DiscreteArc,
    locality: Scalar = "global",
    kind: str = "diameter",
    min_distance: Optional[float] = None,
) -> ConstructionReport:
    """
    Константа квазидуги: max по парам (i, j) с mesh_h ≤ d(p_i,p_j) (и d ≤ locality)
    отношения diam(A[i,j]) / d(p_i,p_j).

    Args:
        arc: Дуга (не менее 2 точек)
        locality: Масштаб локальности или "global"
        kind: "diameter" - диаметр подуги, "length" - длина подуги
        min_distance: Порог разрешения (по умолчанию mesh_h; 0 - все пары)

    Returns:
        ConstructionReport: λ, пара-свидетель и число допустимых пар в extras
    """
    if len(arc) < 2:
        raise InputError("Для измерения λ нужна дуга хотя бы из 2 точек")
    if kind not in ("diameter", "length"):
        raise InputError(f"Неизвестный вид измерения λ: {kind}")

    space = arc.space
    floor = space.mesh_h if min_distance is None else float(min_distance)
    dist = space.block(arc.points, arc.points)
    m = len(arc)
    if kind == "length":
        steps = np.diagonal(dist, offset=1)
        prefix = np.concatenate([[0.0], np.cumsum(steps)])

    best, witness, admissible = 1.0, None, 0
    prev = np.zeros(m)
    for g in range(1, m):
        diag = np.diagonal(dist, offset=g)
        if kind == "diameter":
            prev = np.maximum(np.maximum(prev[:-1], prev[1:]), diag)
            numerator = prev
        else:
            numerator = prefix[g:] - prefix[:-g]
        ok = diag >= floor - space.tol
        if floor <= 0:
            ok &= diag > 0
        if locality != "global":
            ok &= diag <= float(locality) + space.tol
        if not ok.any():
            continue
        admissible += int(ok.sum())
        ratios = np.where(ok, numerator / np.where(diag > 0, diag, 1.0), -np.inf)
        i = int(np.argmax(ratios))
        if ratios[i] > best:
            best, witness = float(ratios[i]), (i, i + g)

    report = ConstructionReport(lambda_measured=max(1.0, best), locality_eps=locality)
    report.extras = {"kind": kind, "pairs": admissible, "witness_pair": witness}
    if admissible == 0:
        report.notes.append("нет допустимых пар выше порога разрешения: λ = 1")
    return report


def measure_circle_lambda(
    circle: DiscreteCircle,
    kind: str = "diameter",
    min_distance: Optional[float] = None,
) -> ConstructionReport:
    """
    Константа квазиокружности: max по парам с d ≥ mesh_h отношения
    min(diam(дуга по часовой), diam(дуга против часовой)) / d.
    """
    if len(circle) < 3:
        raise InputError("Окружность должна содержать не меньше 3 точек")
    if kind not in ("diameter", "length"):
        raise InputError(f"Неизвестный вид измерения λ: {kind}")

    space = circle.space
    floor = space.mesh_h if min_distance is None else float(min_distance)
    dist = space.block(circle.points, circle.points)
    m = len(circle)
    idx = np.arange(m)

    # windows[g][i] - величина циклического окна i..i+g (g+1 точек)
    windows = np.zeros((m, m))
    if kind == "diameter":
        for g in range(1, m):
            windows[g] = np.maximum(
                np.maximum(windows[g - 1], np.roll(windows[g - 1], -1)),
                dist[idx, (idx + g) % m],
            )
    else:
        steps = dist[idx, (idx + 1) % m]
        prefix = np.concatenate([[0.0], np.cumsum(np.concatenate([steps, steps]))])
        for g in range(1, m):
            windows[g] = prefix[idx + g] - prefix[idx]

    best, witness, admissible = 1.0, None, 0
    for g in range(1, m):
        d = dist[idx, (idx + g) % m]
        ok = d >= floor - space.tol
        if floor <= 0:
            ok &= d > 0
        if not ok.any():
            continue
        admissible += int(ok.sum())
        shorter = np.minimum(windows[g], windows[m - g][(idx + g) % m])
        ratios = np.where(ok, shorter / np.where(d > 0, d, 1.0), -np.inf)
        i = int(np.argmax(ratios))
        if ratios[i] > best:
            best, witness = float(ratios[i]), (i, (i + g) % m)

    report = ConstructionReport(lambda_measured=max(1.0, best))
    # каждая пара учтена дважды (g и m-g)
    report.extras = {"kind": kind, "pairs": admissible // 2, "witness_pair": witness}
    if admissible == 0:
        report.notes.append("нет допустимых пар выше порога разрешения: λ = 1")
    return report


# ------------------------------------------------------------- следование


@dataclass
class FollowsResult:
    """
    Результат проверки ι-следования.

    Attributes:
        ok: B ι-следует A
        displacement: Минимальное по монотонным p максимальное смещение
        mapping: Оптимальное монотонное соответствие (индексы B → индексы A)
        witness: (x, y, точка) при неудаче
    """

    ok: bool
    displacement: float
    mapping: List[int]
    witness: Optional[Tuple[int, int, int]] = None

    def __bool__(self) -> bool:
        return self.ok


def monotone_correspondence(arc_b: DiscreteArc, arc_a: DiscreteArc) -> Tuple[float, List[int]]:
    """
    Монотонное соответствие p: индексы B → индексы A с p(0)=0, p(конец)=конец,
    минимизирующее max_x d(B_x, A_{p(x)}) (узкое место, динамика по решётке индексов).
    """
    space = arc_b.space
    cost = space.block(arc_b.points, arc_a.points)
    nb, na = cost.shape
    table = np.empty((nb, na))
    table[0] = np.inf
    table[0, 0] = cost[0, 0]
    for i in range(1, nb):
        table[i] = np.maximum(cost[i], np.minimum.accumulate(table[i - 1]))

    mapping = [na - 1]
    for i in range(nb - 1, 0, -1):
        prev = table[i - 1, : mapping[-1] + 1]
        # берём самый правый минимум, чтобы соответствие было «ленивым»
        j = int(len(prev) - 1 - np.argmin(prev[::-1]))
        mapping.append(j)
    mapping.reverse()
    return float(table[-1, -1]), mapping


def check_follows(arc_b: DiscreteArc, arc_a: DiscreteArc, iota: float) -> FollowsResult:
    """
    Проверяет, что B ι-следует A: для всех x ≤ y в B каждая точка B[x,y] лежит
    в ι-окрестности A[p(x), p(y)] для монотонного p.

    Для монотонного p условие равносильно тому, что каждая точка B_x лежит в
    ι-окрестности A_{p(x)}; поэтому достаточно оптимального по смещению p.
    """
    if len(arc_b) == 0 or len(arc_a) == 0:
        raise InputError("Обе дуги должны быть непустыми")
    space = arc_b.space
    displacement, mapping = monotone_correspondence(arc_b, arc_a)
    if displacement <= iota + space.tol:
        return FollowsResult(True, displacement, mapping)

    offsets = [space.dist(b, arc_a.points[j]) for b, j in zip(arc_b.points, mapping)]
    x = int(np.argmax(offsets))
    return FollowsResult(False, displacement, mapping, witness=(x, x, arc_b.points[x]))


# ---------------------------------------------------------- разделённость


def arc_separation(
    arc: DiscreteArc,
    other: DiscreteArc,
    relative_to: Union[str, Tuple[int, int]] = "absolute",
    floor: float = 0.0,
) -> float:
    """
    Разделённость двух дуг.

    "absolute": min расстояние между точками дуг. Относительная (a, b):
    min по z ∈ (J ∪ J') \\ {a, b} величины d(z, другая дуга) / d(z, {a, b});
    учитываются только z с d(z, {a,b}) ≥ floor (inf, если таких нет).

    Raises:
        InputError: одна из дуг состоит только из концов a, b
    """
    space = arc.space
    if relative_to == "absolute":
        return space.set_distance(arc.points, other.points)

    a, b = (int(v) for v in relative_to)
    to_ends = np.minimum(space.row(a), space.row(b))
    candidates = []
    for own, foreign in ((arc, other), (other, arc)):
        interior = np.asarray([z for z in own.points if z != a and z != b], dtype=int)
        if not len(interior):
            raise InputError("Дуга состоит только из концевых точек: η не определена")
        candidates.append((interior, foreign))

    best = math.inf
    for interior, foreign in candidates:
        scale = to_ends[interior]
        keep = scale >= max(floor, 0.0) - space.tol
        keep &= scale > 0
        if not keep.any():
            continue
        gaps = space.dist_to_set(foreign.points)[interior[keep]]
        best = min(best, float((gaps / scale[keep]).min()))
    return best


def separation_witness(
    arc: DiscreteArc, other: DiscreteArc, relative_to: Tuple[int, int], floor: float = 0.0
) -> Optional[int]:
    """Точка, на которой достигается относительная разделённость."""
    space = arc.space
    a, b = relative_to
    to_ends = np.minimum(space.row(a), space.row(b))
    best, where = math.inf, None
    for own, foreign in ((arc, other), (other, arc)):
        gaps = space.dist_to_set(foreign.points)
        for z in own.points:
            if z in (a, b) or to_ends[z] < floor - space.tol or to_ends[z] <= 0:
                continue
            value = gaps[z] / to_ends[z]
            if value < best:
                best, where = value, z
    return where


def cone_epsilon(arc: DiscreteArc, base: DiscreteArc, ends: Tuple[int, int], floor: float) -> float:
    """max по z ∈ J \\ {a,b} с d(z,{a,b}) ≥ floor величины d(z, A) / d(z, {a,b})."""
    space = arc.space
    a, b = ends
    to_ends = np.minimum(space.row(a), space.row(b))
    gaps = space.dist_to_set(base.points)
    values = [
        gaps[z] / to_ends[z]
        for z in arc.points
        if z not in (a, b) and to_ends[z] >= floor - space.tol and to_ends[z] > 0
    ]
    return float(max(values)) if values else 0.0


# ---------------------------------------------------------------- склейка


def concatenate_to_circle(arc: DiscreteArc, other: DiscreteArc) -> DiscreteCircle:
    """
    Окружность J, затем развёрнутая внутренность J'.

    Raises:
        InputError: концы не совпадают или внутренности пересекаются (с точкой-свидетелем)
    """
    if arc.space is not other.space:
        raise InputError("Дуги принадлежат разным пространствам")
    if (other.start, other.end) == (arc.start, arc.end):
        second = other
    elif (other.start, other.end) == (arc.end, arc.start):
        second = other.reversed()
    else:
        raise InputError(
            f"Концы дуг не совпадают: ({arc.start}, {arc.end}) и ({other.start}, {other.end})"
        )
    if arc.start == arc.end:
        raise InputError("Концы дуги совпадают: окружность не определена")

    inner = set(arc.interior())
    for z in second.interior():
        if z in inner:
            raise ArcOverlapError(f"Внутренности дуг пересекаются в точке {z}", z)
    return DiscreteCircle(arc.space, arc.points + tuple(reversed(second.interior())))


def cut_circle(circle: DiscreteCircle, i: int, j: int) -> Tuple[DiscreteArc, DiscreteArc]:
    """
    Разрезает окружность в позициях i ≠ j на две дуги из C_i в C_j:
    первая идёт вперёд по циклу, вторая - назад.
    """
    m = len(circle)
    if not (0 <= i < m and 0 <= j < m) or i == j:
        raise InputError(f"Некорректные позиции разреза ({i}, {j}) для окружности длины {m}")
    pts = circle.points
    forward = [pts[(i + t) % m] for t in range((j - i) % m + 1)]
    backward = [pts[(i - t) % m] for t in range((i - j) % m + 1)]
    return DiscreteArc(circle.space, forward), DiscreteArc(circle.space, backward)


def circle_arc(circle: DiscreteCircle, start: int, stop: int) -> DiscreteArc:
    """Дуга окружности из точки start вперёд до точки stop (включительно)."""
    m = len(circle)
    i, j = circle.position[start], circle.position[stop]
    return DiscreteArc(circle.space, [circle.points[(i + t) % m] for t in range((j - i) % m + 1)])


def arcs_from_points(space: MetricSpace, sequences: Sequence[Sequence[int]]) -> List[DiscreteArc]:
    return [DiscreteArc(space, seq) for seq in sequences]
