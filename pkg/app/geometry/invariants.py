"""
Оценка гипотез о пространстве: константа удвоения N, линейная связность L
и кольцевая (аннулярная) линейная связность L.

Оценки - выборочные: точные значения требуют перебора, а построениям нужны
лишь рабочие константы. Поиск по масштабам идёт по геометрической сетке с шагом
config.grid_ratio.
"""

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from geometry.graph_ops import articulation_points, component_labels, shortest_path
from geometry.space_model import MetricSpace
from utils.config import get_config
from utils.error_handler import ConstructionError, ErrorType, InputError, safe_operation
from utils.logger import log_info, log_warning

Pair = Tuple[int, int]
AlcTriple = Tuple[int, float, int, int]


@dataclass
class DoublingEstimate:
    """Результат оценки константы удвоения."""

    greedy: int
    exact: Optional[int]
    worst: Optional[Tuple[int, float]]
    samples: int
    notes: List[str] = field(default_factory=list)


@dataclass
class ConnectivityEstimate:
    """Результат оценки LC или ALC: константа, свидетели и отказы."""

    value: float
    witnesses: List[Dict[str, Any]]
    failures: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


@dataclass
class WorkingConstants:
    """Рабочие константы пространства для построений."""

    L: float
    N: int
    L_lc: float
    L_alc: float
    alc_ok: bool
    alc_failures: List[Dict[str, Any]]
    seed: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "L": self.L,
            "N": self.N,
            "L_lc": self.L_lc,
            "L_alc": self.L_alc,
            "alc_ok": self.alc_ok,
            "seed": self.seed,
        }


# ------------------------------------------------------------- удвоение


def doubling_constant(
    space: MetricSpace,
    radii: Sequence[float],
    centers: Optional[Sequence[int]] = None,
    seed: int = 0,
) -> DoublingEstimate:
    """
    Оценка константы удвоения: max по (x, r) размера жадного покрытия B(x, r)
    шарами радиуса r/2 с центрами в точках пространства.

    Жадное правило: каждый раз берётся центр, покрывающий больше всего ещё не
    покрытых точек (при равенстве - с меньшим индексом). При n ≤ exact_cover_limit
    дополнительно ищется точное минимальное покрытие перебором.
    """
    config = get_config()
    radii = [float(r) for r in radii]
    if not radii:
        raise InputError("Множество радиусов пусто")
    low = [r for r in radii if r < 2 * space.mesh_h - space.tol]
    if low:
        raise InputError(f"Радиусы должны быть не меньше 2·mesh_h: {low}")
    if centers is None:
        rng = np.random.default_rng(seed)
        count = min(space.n_points, config.invariant_samples)
        centers = sorted(int(c) for c in rng.choice(space.n_points, size=count, replace=False))

    greedy_max, exact_max, worst = 1, 1, None
    exact_possible = space.n_points <= config.exact_cover_limit
    notes: List[str] = []
    for x in centers:
        row = space.row(int(x))
        for r in radii:
            ball = np.nonzero(row < r - space.tol)[0]
            candidates = np.nonzero(row < 1.5 * r)[0]
            cover = space.block(candidates, ball) < r / 2 - space.tol
            chosen = _greedy_cover(cover)
            covered = cover[chosen].any(axis=0)
            if not covered.all():
                raise ConstructionError(
                    f"Жадное покрытие B({x}, {r:.6g}) не покрывает все точки шара"
                )
            if len(chosen) > greedy_max:
                greedy_max, worst = len(chosen), (int(x), r)
            if exact_possible and len(chosen) > 1:
                exact = _exact_cover(cover, len(chosen), config.exact_cover_budget)
                if exact is None:
                    exact_possible = False
                    notes.append("точное покрытие прервано по бюджету перебора")
                else:
                    exact_max = max(exact_max, exact)

    result = DoublingEstimate(
        greedy=greedy_max,
        exact=exact_max if exact_possible else None,
        worst=worst,
        samples=len(centers) * len(radii),
        notes=notes,
    )
    log_info(f"Константа удвоения: жадная {result.greedy}, точная {result.exact}")
    return result


def _greedy_cover(cover: np.ndarray) -> List[int]:
    uncovered = np.ones(cover.shape[1], dtype=bool)
    chosen: List[int] = []
    while uncovered.any():
        gains = (cover & uncovered).sum(axis=1)
        best = int(np.argmax(gains))
        chosen.append(best)
        uncovered &= ~cover[best]
    return chosen


def _exact_cover(cover: np.ndarray, upper: int, budget: int) -> Optional[int]:
    """Минимальное покрытие перебором размеров 1..upper-1 (None при исчерпании бюджета)."""
    width = cover.shape[1]
    full = (1 << width) - 1
    masks = sorted(
        {sum(1 << int(j) for j in np.nonzero(row)[0]) for row in cover}, reverse=True
    )
    spent = 0
    for size in range(1, upper):
        for combo in combinations(masks, size):
            spent += 1
            if spent > budget:
                return None
            acc = 0
            for mask in combo:
                acc |= mask
            if acc == full:
                return size
    return upper


# ------------------------------------------------------------- выборки


def sample_pairs(space: MetricSpace, count: int, seed: int = 0) -> List[Pair]:
    """Детерминированная выборка пар на расстоянии ≥ mesh_h."""
    if space.n_points < 2:
        return []
    rng = np.random.default_rng(seed)
    pairs: List[Pair] = []
    attempts = 0
    while len(pairs) < count and attempts < 50 * count:
        attempts += 1
        x, y = (int(v) for v in rng.integers(0, space.n_points, size=2))
        if x != y and not space.less(space.dist(x, y), space.mesh_h):
            pairs.append((x, y))
    return pairs


def sample_alc_triples(
    space: MetricSpace,
    count: int,
    seed: int = 0,
    centers: Optional[Sequence[int]] = None,
) -> List[AlcTriple]:
    """
    Выборка (p, r, x, y) с x, y ∈ A(p, r, 2r) и r ≥ 4·mesh_h.

    Центры: заданные, иначе случайные точки и точки сочленения шагового графа.
    Если аннулус A(p, r, 2r) несвязен, x и y берутся из разных компонент.
    """
    rng = np.random.default_rng(seed)
    floor = 4 * space.mesh_h
    top = space.diameter() / 2
    if top < floor:
        return []
    radii = [floor * 2**j for j in range(int(math.floor(math.log2(top / floor))) + 1)]

    if centers is None:
        pool = [int(c) for c in rng.choice(space.n_points, size=min(count, space.n_points),
                                           replace=False)]
        cuts = articulation_points(space)
        pool = cuts[: max(1, count // 2)] + [c for c in pool if c not in set(cuts)]
    else:
        pool = [int(c) for c in centers]

    triples: List[AlcTriple] = []
    for p in pool:
        if len(triples) >= count and centers is None:
            break
        r = radii[int(rng.integers(0, len(radii)))]
        triple = _annulus_pair(space, p, r, rng)
        if triple is not None:
            triples.append(triple)
    return triples


def _annulus_pair(space: MetricSpace, p: int, r: float, rng) -> Optional[AlcTriple]:
    mask = space.annulus_mask(p, r, 2 * r)
    members = np.nonzero(mask)[0]
    if len(members) < 2:
        return None
    labels = component_labels(space, mask)
    groups = sorted({int(labels[v]) for v in members})
    if len(groups) > 1:
        first = members[labels[members] == groups[0]]
        second = members[labels[members] == groups[1]]
        x = int(first[int(rng.integers(0, len(first)))])
        y = int(second[int(rng.integers(0, len(second)))])
    else:
        x, y = (int(v) for v in rng.choice(members, size=2, replace=False))
    return (int(p), float(r), x, y)


def alc_triples_at(
    space: MetricSpace, centers: Sequence[int], radii: Sequence[float], seed: int = 0
) -> List[AlcTriple]:
    """Тройки (p, r, x, y) для всех заданных центров и радиусов r ≥ 4·mesh_h."""
    rng = np.random.default_rng(seed)
    floor = 4 * space.mesh_h
    triples: List[AlcTriple] = []
    for p in centers:
        for r in radii:
            if space.less(r, floor):
                continue
            triple = _annulus_pair(space, int(p), float(r), rng)
            if triple is not None:
                triples.append(triple)
    return triples


# ---------------------------------------------------- линейная связность


def _grid_search(predicate, top: int) -> Optional[int]:
    """Наименьшее k ∈ [0, top] с predicate(k) (predicate монотонен) или None."""
    if not predicate(top):
        return None
    lo, hi = 0, top
    while lo < hi:
        mid = (lo + hi) // 2
        if predicate(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def linear_connectivity(space: MetricSpace, pairs: Sequence[Pair]) -> ConnectivityEstimate:
    """
    Оценка L линейной связности.

    Для пары (x, y) ищется наименьшее D = d·ratio^k, при котором x и y связаны в
    {z : max(d(z,x), d(z,y)) ≤ D}; свидетель - кратчайший путь в этой области,
    его вклад max(1, (diam(w) − 2·mesh_h) / d(x,y)).
    """
    ratio = get_config().grid_ratio
    h = space.mesh_h
    diameter = space.diameter()
    best = 1.0
    witnesses: List[Dict[str, Any]] = []
    for x, y in pairs:
        d = space.dist(x, y)
        if space.less(d, h):
            raise InputError(f"Пара ({x}, {y}) ближе mesh_h")
        top = max(0, int(math.ceil(math.log(max(diameter / d, 1.0)) / math.log(ratio)))) + 1
        reach = np.maximum(space.row(x), space.row(y))

        def region(k: int) -> np.ndarray:
            return reach <= d * ratio**k + space.tol

        k = _grid_search(lambda k: _connected(space, x, y, region(k)), top)
        if k is None:
            raise ConstructionError(f"Точки {x} и {y} не связаны в шаговом графе")
        path = shortest_path(space, [x], [y], region(k))
        width = space.set_diameter(path)
        contribution = max(1.0, (width - 2 * h) / d)
        best = max(best, contribution)
        witnesses.append(
            {
                "x": int(x),
                "y": int(y),
                "d": d,
                "D_min": d * ratio**k,
                "raw_ratio": ratio**k,
                "diam": width,
                "contribution": contribution,
                "path": path,
            }
        )
    return ConnectivityEstimate(value=best, witnesses=witnesses)


def _connected(space: MetricSpace, x: int, y: int, mask: np.ndarray) -> bool:
    if not (mask[x] and mask[y]):
        return False
    labels = component_labels(space, mask)
    return bool(labels[x] == labels[y])


def annular_linear_connectivity(
    space: MetricSpace, triples: Sequence[AlcTriple]
) -> ConnectivityEstimate:
    """
    Оценка L кольцевой линейной связности.

    Для (p, r, x, y) ищется наименьшее L' = ratio^k, при котором x и y связаны в
    A(p, r/L', 2L'r). Если связи нет даже при L' = diam/r - отказ «локальная точка
    разреза на масштабе r вблизи p».
    """
    ratio = get_config().grid_ratio
    diameter = space.diameter()
    best = 1.0
    witnesses: List[Dict[str, Any]] = []
    failures: List[Dict[str, Any]] = []
    for p, r, x, y in triples:
        if space.less(r, 4 * space.mesh_h):
            raise InputError(f"Радиус {r:.6g} меньше 4·mesh_h: аннулус неразрешим")
        mask = space.annulus_mask(p, r, 2 * r)
        if not mask.any():
            raise InputError(f"Аннулус A({p}, {r:.6g}, {2 * r:.6g}) пуст")
        if not (mask[x] and mask[y]):
            raise InputError(f"Точки {x}, {y} не лежат в A({p}, r, 2r)")

        top = max(0, int(math.ceil(math.log(max(diameter / r, 1.0)) / math.log(ratio))))

        def region(k: int) -> np.ndarray:
            factor = ratio**k
            return space.annulus_mask(p, r / factor, 2 * factor * r)

        k = _grid_search(lambda k: _connected(space, x, y, region(k)), top)
        if k is None:
            failures.append({"p": int(p), "r": float(r), "x": int(x), "y": int(y)})
            log_warning(f"Локальная точка разреза на масштабе r={r:.6g} вблизи p={p}")
            continue
        factor = ratio**k
        path = shortest_path(space, [x], [y], region(k))
        best = max(best, factor)
        witnesses.append(
            {
                "p": int(p),
                "r": float(r),
                "x": int(x),
                "y": int(y),
                "L": factor,
                "inner": r / factor,
                "outer": 2 * factor * r,
                "path": path,
            }
        )
    return ConnectivityEstimate(value=best, witnesses=witnesses, failures=failures)


# --------------------------------------------------------- рабочие константы


def default_radii(space: MetricSpace) -> List[float]:
    """Радиусы 2·mesh_h·4^j до диаметра пространства."""
    radii, r = [], 2 * space.mesh_h
    while r <= max(space.diameter(), 2 * space.mesh_h):
        radii.append(r)
        r *= 4
    return radii


def estimate_working_constants(space: MetricSpace, seed: Optional[int] = None) -> WorkingConstants:
    """
    Рабочие константы (L, N) пространства; результат кэшируется в space.cache.

    L = max(L_lc, L_alc). Отказы ALC не прерывают оценку, а возвращаются в
    alc_failures; решать, допустим ли отказ, должно построение.
    """
    seed = get_config().seed if seed is None else seed
    key = ("working_constants", seed)
    if key not in space.cache:
        space.cache[key] = safe_operation(
            _estimate_working_constants_impl,
            ErrorType.CONSTRUCTION_ERROR,
            show_cli_error=False,
            operation_name="Оценка рабочих констант",
            reraise=True,
            space=space,
            seed=seed,
        )
    return space.cache[key]


def _estimate_working_constants_impl(space: MetricSpace, seed: int) -> WorkingConstants:
    samples = get_config().invariant_samples
    if space.n_points < 2:
        return WorkingConstants(1.0, 1, 1.0, 1.0, True, [], seed)
    lc = linear_connectivity(space, sample_pairs(space, samples, seed))
    alc = annular_linear_connectivity(space, sample_alc_triples(space, samples, seed))
    doubling = doubling_constant(space, default_radii(space), seed=seed)
    constants = WorkingConstants(
        L=max(lc.value, alc.value),
        N=doubling.greedy,
        L_lc=lc.value,
        L_alc=alc.value,
        alc_ok=alc.ok,
        alc_failures=alc.failures,
        seed=seed,
    )
    log_info(
        f"Рабочие константы: L={constants.L:.4g} (LC {lc.value:.4g}, ALC {alc.value:.4g}), "
        f"N={constants.N}, ALC {'выполнена' if alc.ok else 'нарушена'}"
    )
    return constants


def invariants_report(space: MetricSpace, samples: int, seed: int) -> Dict[str, Any]:
    """Отчёт команды invariants: {N, L_lc, L_alc, witnesses, samples, seed, ...}."""
    lc = linear_connectivity(space, sample_pairs(space, samples, seed))
    alc = annular_linear_connectivity(space, sample_alc_triples(space, samples, seed))
    doubling = doubling_constant(space, default_radii(space), seed=seed)
    ratio = lc.value / alc.value if alc.value > 0 else math.inf
    witnesses = [
        {"kind": "lc", **{k: v for k, v in w.items() if k != "path"}, "length": len(w["path"])}
        for w in lc.witnesses
    ] + [
        {"kind": "alc", **{k: v for k, v in w.items() if k != "path"}, "length": len(w["path"])}
        for w in alc.witnesses
    ]
    return {
        "N": doubling.greedy,
        "N_exact": doubling.exact,
        "L_lc": lc.value,
        "L_alc": alc.value,
        "alc_ok": alc.ok,
        "alc_failures": alc.failures,
        "lc_over_alc": ratio,
        "lc_within_8_alc": bool(lc.value <= 8 * alc.value),
        "witnesses": witnesses,
        "samples": samples,
        "seed": seed,
        "notes": doubling.notes,
    }
