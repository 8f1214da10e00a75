"""
Повторная проверка артефактов построения.

Каждая команда построения прогоняет свой результат через verify_artifact перед
выходом; команда verify делает то же для сохранённого файла. Все величины
пересчитываются заново сканерами arc_model, значения из отчёта не используются.
"""

import math
from itertools import combinations
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

from geometry.arc_model import (
    DiscreteArc,
    DiscreteCircle,
    arc_separation,
    check_follows,
    concatenate_to_circle,
    cone_epsilon,
    measure_circle_lambda,
    measure_lambda,
    to_plain,
)
from geometry.space_model import MetricSpace, save_space
from utils.config import get_config
from utils.error_handler import InputError, QcfError
from utils.file_handler import document_digest
from utils.logger import log_info, log_warning

Curve = Union[DiscreteArc, DiscreteCircle]
SLACK = 1e-9


def space_reference(space: MetricSpace) -> str:
    """Ссылка space_ref: короткий хэш документа пространства."""
    cached = space.cache.get("space_ref")
    if cached is None:
        cached = document_digest(save_space(space))
        space.cache["space_ref"] = cached
    return cached


def _check(
    checks: List[Dict[str, Any]],
    name: str,
    ok: bool,
    value: Any = None,
    bound: Any = None,
) -> bool:
    entry: Dict[str, Any] = {"name": name, "ok": bool(ok)}
    if value is not None:
        entry["value"] = to_plain(value)
    if bound is not None:
        entry["bound"] = to_plain(bound)
    checks.append(entry)
    return bool(ok)


def _curve(space: MetricSpace, document: Dict[str, Any]) -> Curve:
    points = document.get("points")
    if not isinstance(points, list) or not all(isinstance(p, int) for p in points):
        raise InputError("Дуга должна содержать список целых 'points'")
    if document.get("cyclic"):
        return DiscreteCircle(space, points)
    return DiscreteArc(space, points)


def _floor(space: MetricSpace) -> float:
    return get_config().mesh_floor_mult * space.mesh_h


# ------------------------------------------------------------- по видам


def _verify_straighten(
    space: MetricSpace, artifact: Dict[str, Any], curves: List[Curve], checks: List[Dict]
) -> None:
    source = _curve(space, artifact["input"])
    result = curves[0]
    _check(
        checks,
        "endpoints",
        (result.start, result.end) == (source.start, source.end),
        value=[result.start, result.end],
        bound=[source.start, source.end],
    )
    iota = artifact["report"].get("follows_iota")
    if not isinstance(iota, (int, float)):
        _check(checks, "follows", False, value="follows_iota отсутствует")
        return
    follows = check_follows(result, source, float(iota))
    _check(checks, "follows", follows.ok, value=follows.displacement, bound=float(iota))
    locality = artifact["report"].get("locality_eps")
    if isinstance(locality, (int, float)):
        lam = measure_lambda(result, locality=float(locality)).lambda_measured
        _check(checks, "lambda_finite", math.isfinite(lam), value=lam)


def _verify_pair(
    checks: List[Dict],
    first: DiscreteArc,
    second: DiscreteArc,
    ends: Sequence[int],
    prefix: str = "",
) -> None:
    a, b = ends
    for label, arc in (("first", first), ("second", second)):
        _check(
            checks,
            f"{prefix}{label}_endpoints",
            {arc.start, arc.end} == {a, b},
            value=[arc.start, arc.end],
            bound=[a, b],
        )
    shared = set(first.interior()) & set(second.interior())
    if not _check(
        checks,
        f"{prefix}disjoint_interiors",
        not shared and first.points != second.points,
        value=sorted(shared)[:5],
    ):
        return
    floor = _floor(first.space)
    eta = arc_separation(first, second, relative_to=(a, b), floor=floor)
    _check(checks, f"{prefix}eta_positive", eta > 0, value=eta, bound=0.0)

    eta_full = min(arc_separation(first, second, relative_to=(a, b), floor=0.0), 1.0)
    lam_full = max(
        measure_lambda(first, min_distance=0).lambda_measured,
        measure_lambda(second, min_distance=0).lambda_measured,
    )
    circle = concatenate_to_circle(first, second)
    circle_full = measure_circle_lambda(circle, min_distance=0).lambda_measured
    bound = 6 * lam_full / eta_full if eta_full > 0 else math.inf
    _check(
        checks,
        f"{prefix}six_lambda_over_eta",
        math.isfinite(circle_full) and circle_full <= bound + SLACK,
        value=circle_full,
        bound=bound,
    )


def _verify_split(
    space: MetricSpace, artifact: Dict[str, Any], curves: List[Curve], checks: List[Dict]
) -> None:
    source = _curve(space, artifact["input"])
    if not _check(checks, "arc_count", len(curves) == 2, value=len(curves), bound=2):
        return
    first, second = curves
    ends = (source.start, source.end)
    eps = float(artifact["report"]["eps"])
    floor = _floor(space)
    measured = max(
        cone_epsilon(first, source, ends, floor), cone_epsilon(second, source, ends, floor)
    )
    _check(checks, "cone_eps", measured <= eps + SLACK, value=measured, bound=eps)
    _verify_pair(checks, first, second, ends)


def _verify_bogensatz(
    space: MetricSpace, artifact: Dict[str, Any], curves: List[Curve], checks: List[Dict]
) -> None:
    x, y = artifact["marked"]
    expected = artifact["report"].get("n", len(curves))
    _check(checks, "arc_count", len(curves) == expected, value=len(curves), bound=expected)
    for i, j in combinations(range(len(curves)), 2):
        _verify_pair(checks, curves[i], curves[j], (x, y), prefix=f"pair{i}{j}_")


def _verify_circle(
    space: MetricSpace, artifact: Dict[str, Any], curves: List[Curve], checks: List[Dict]
) -> None:
    marked = [int(p) for p in artifact["marked"]]
    if not _check(
        checks,
        "is_circle",
        len(curves) == 1 and isinstance(curves[0], DiscreteCircle),
        value=len(curves),
    ):
        return
    circle = curves[0]
    missing = sorted(set(marked) - circle.point_set)
    _check(checks, "contains_T", not missing, value=missing)
    lam = measure_circle_lambda(circle).lambda_measured
    _check(checks, "lambda_finite", math.isfinite(lam), value=lam)
    if len(marked) >= 2:
        diam_circle = space.set_diameter(circle.points)
        diam_marked = space.set_diameter(marked)
        _check(
            checks,
            "diam_bound",
            diam_circle <= lam * diam_marked + space.tol,
            value=diam_circle,
            bound=lam * diam_marked,
        )


_VERIFIERS: Dict[str, Callable[..., None]] = {
    "straighten": _verify_straighten,
    "split": _verify_split,
    "bogensatz": _verify_bogensatz,
    "circle": _verify_circle,
}


def verify_artifact(
    space: MetricSpace, artifact: Dict[str, Any], space_ref: Optional[str] = None
) -> Dict[str, Any]:
    """
    Пересчитывает все проверки артефакта.

    Args:
        space: Пространство артефакта
        artifact: Документ {space_ref, kind, arcs, marked, report, ...}
        space_ref: Ожидаемая ссылка (по умолчанию вычисляется из пространства)

    Returns:
        dict: {ok, checks, failures}

    Raises:
        InputError: неизвестный вид артефакта или нарушена схема
    """
    kind = artifact.get("kind")
    if kind not in _VERIFIERS:
        raise InputError(f"Неизвестный вид артефакта: {kind!r}")
    for key in ("arcs", "report", "marked"):
        if key not in artifact:
            raise InputError(f"В артефакте нет поля '{key}'")

    checks: List[Dict[str, Any]] = []
    expected = space_ref or space_reference(space)
    _check(
        checks,
        "space_ref",
        artifact.get("space_ref") == expected,
        value=artifact.get("space_ref"),
        bound=expected,
    )

    curves: List[Curve] = []
    for index, document in enumerate(artifact["arcs"]):
        try:
            curves.append(_curve(space, document))
            _check(checks, f"simple_{index}", True)
        except QcfError as error:
            _check(checks, f"simple_{index}", False, value=str(error))
    if len(curves) == len(artifact["arcs"]) and curves:
        _VERIFIERS[kind](space, artifact, curves, checks)

    failures = [entry["name"] for entry in checks if not entry["ok"]]
    if failures:
        log_warning(f"Проверка артефакта {kind} не пройдена: {failures}")
    else:
        log_info(f"Проверка артефакта {kind}: {len(checks)} проверок пройдено")
    return {"ok": not failures, "checks": checks, "failures": failures}
