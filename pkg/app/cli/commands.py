"""
Команды qcf. Каждая команда получает разобранные аргументы и возвращает код выхода.

Команды построения собирают артефакт {space_ref, kind, arcs, marked, report,
trace, verification, flow_stats}, перепроверяют его и возвращают 2, если
проверка не пройдена; артефакт при этом всё равно записывается.
"""

import argparse
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

from cli.parser import parse_path_ends
from cli.verification import space_reference, verify_artifact
from geometry.arc_model import ConstructionReport, DiscreteArc, DiscreteCircle, to_plain
from geometry.circler import circle_through_points
from geometry.graph_ops import shortest_path
from geometry.invariants import invariants_report
from geometry.space_model import (
    MetricSpace,
    generate_circle,
    generate_cusp,
    generate_glued_squares,
    generate_grid_square,
    generate_sierpinski_carpet,
    load_space,
    save_space,
)
from geometry.splitter import bogensatz, split_quasi_arc
from geometry.straightener import straighten
from rendering.svg_renderer import curves_from_documents, render_svg
from utils.config import get_config
from utils.construction_trace import ConstructionTrace
from utils.error_handler import InputError
from utils.file_handler import (
    dumps_document,
    read_json_document,
    save_json_document,
    save_text_document,
)
from utils.flow_stats import get_total_flow_stats
from utils.logger import log_info

EXIT_OK = 0
EXIT_VERIFICATION = 2

Curve = Union[DiscreteArc, DiscreteCircle]


# ------------------------------------------------------------ ввод/вывод


def load_space_file(path: str) -> MetricSpace:
    return load_space(read_json_document(path))


def emit(document: Any, output: Optional[str]) -> None:
    """Записывает документ в файл -o или в stdout."""
    if output:
        save_json_document(document, output, directory=os.curdir)
    else:
        sys.stdout.write(dumps_document(document))


def read_arc(space: MetricSpace, args: argparse.Namespace) -> DiscreteArc:
    """Дуга из --path x,y (кратчайший путь) или из файла --arc."""
    if args.path:
        x, y = parse_path_ends(args.path)
        _check_point(space, x)
        _check_point(space, y)
        path = shortest_path(space, [x], [y])
        if path is None:
            raise InputError(f"Точки {x} и {y} не соединены шаговым графом")
        return DiscreteArc(space, path)

    document = read_json_document(args.arc)
    if isinstance(document, dict) and "arcs" in document:
        arcs = document["arcs"]
        if not 0 <= args.index < len(arcs):
            raise InputError(f"В артефакте {len(arcs)} дуг, запрошена {args.index}")
        document = arcs[args.index]
    if not isinstance(document, dict) or "points" not in document:
        raise InputError("Файл дуги должен содержать поле 'points'")
    if document.get("cyclic"):
        raise InputError("Ожидалась дуга, получена окружность")
    return DiscreteArc(space, document["points"])


def _check_point(space: MetricSpace, p: int) -> None:
    if not 0 <= p < space.n_points:
        raise InputError(f"Точка {p} вне пространства из {space.n_points} точек")


def build_artifact(
    space: MetricSpace,
    kind: str,
    curves: Sequence[Curve],
    marked: Sequence[int],
    report: ConstructionReport,
    trace: ConstructionTrace,
    **extra: Any,
) -> Dict[str, Any]:
    """Артефакт построения без проверки и статистики."""
    space_ref = space_reference(space)
    artifact: Dict[str, Any] = {
        "space_ref": space_ref,
        "kind": kind,
        "arcs": [curve.to_dict(space_ref) for curve in curves],
        "marked": [int(p) for p in marked],
        "report": report.to_dict(),
        "trace": to_plain(trace.to_list()),
    }
    artifact.update(to_plain(extra))
    return artifact


def finish(space: MetricSpace, artifact: Dict[str, Any], output: Optional[str]) -> int:
    """Перепроверяет артефакт, прикладывает статистику потока и выводит его."""
    verification = verify_artifact(space, artifact)
    artifact["verification"] = verification
    artifact["flow_stats"] = get_total_flow_stats()
    emit(artifact, output)
    if not verification["ok"]:
        sys.stderr.write(f"Проверка не пройдена: {', '.join(verification['failures'])}\n")
        return EXIT_VERIFICATION
    return EXIT_OK


# ---------------------------------------------------------------- команды


_GENERATORS: Dict[str, Callable[[argparse.Namespace], MetricSpace]] = {
    "grid": lambda args: generate_grid_square(args.k),
    "carpet": lambda args: generate_sierpinski_carpet(args.level, args.metric),
    "circle": lambda args: generate_circle(args.k),
    "glued": lambda args: generate_glued_squares(args.k),
    "cusp": lambda args: generate_cusp(args.k),
}


def cmd_generate(args: argparse.Namespace) -> int:
    space = _GENERATORS[args.kind](args)
    emit(save_space(space), args.output)
    log_info(f"Сгенерировано пространство {args.kind}: n={space.n_points}")
    return EXIT_OK


def cmd_invariants(args: argparse.Namespace) -> int:
    space = load_space_file(args.space)
    config = get_config()
    samples = config.invariant_samples if args.samples is None else args.samples
    if samples < 1:
        raise InputError(f"Число выборок должно быть положительным: {samples}")
    report = invariants_report(space, samples, config.seed)
    report["space_ref"] = space_reference(space)
    emit(to_plain(report), args.output)
    return EXIT_OK


def cmd_straighten(args: argparse.Namespace) -> int:
    space = load_space_file(args.space)
    arc = read_arc(space, args)
    trace = ConstructionTrace()
    result, report = straighten(arc, args.eps, mode=args.mode, trace=trace)
    artifact = build_artifact(
        space,
        "straighten",
        [result],
        [arc.start, arc.end],
        report,
        trace,
        input=arc.to_dict(space_reference(space)),
    )
    return finish(space, artifact, args.output)


def cmd_split(args: argparse.Namespace) -> int:
    space = load_space_file(args.space)
    arc = read_arc(space, args)
    trace = ConstructionTrace()
    first, second, report = split_quasi_arc(arc, lambda0=args.lambda0, eps=args.eps, trace=trace)
    artifact = build_artifact(
        space,
        "split",
        [first, second],
        [arc.start, arc.end],
        report,
        trace,
        input=arc.to_dict(space_reference(space)),
    )
    return finish(space, artifact, args.output)


def cmd_bogensatz(args: argparse.Namespace) -> int:
    space = load_space_file(args.space)
    _check_point(space, args.x)
    _check_point(space, args.y)
    trace = ConstructionTrace()
    arcs, report = bogensatz(space, args.x, args.y, args.n, trace=trace)
    artifact = build_artifact(space, "bogensatz", arcs, [args.x, args.y], report, trace)
    return finish(space, artifact, args.output)


def cmd_circle(args: argparse.Namespace) -> int:
    space = load_space_file(args.space)
    for p in args.points:
        _check_point(space, p)
    trace = ConstructionTrace()
    circle, report = circle_through_points(space, args.points, trace=trace)
    marked = sorted(set(args.points))
    artifact = build_artifact(space, "circle", [circle], marked, report, trace)
    return finish(space, artifact, args.output)


def cmd_render(args: argparse.Namespace) -> int:
    space = load_space_file(args.space)
    documents: List[Dict[str, Any]] = []
    marked: List[int] = list(args.mark or [])
    for path in args.artifacts:
        document = read_json_document(path)
        if isinstance(document, dict) and "arcs" in document:
            documents.extend(document["arcs"])
            if args.mark is None:
                marked.extend(int(p) for p in document.get("marked", []))
        elif isinstance(document, dict) and "points" in document:
            documents.append(document)
        else:
            raise InputError(f"Файл {path} не содержит дуг")
    curves = curves_from_documents(space, documents)
    text = render_svg(space, curves, marked=sorted(set(marked)))
    save_text_document(text, args.output, directory=os.curdir)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    space = load_space_file(args.space)
    if args.artifact is None:
        # аксиомы метрики и шаговый граф уже проверены при загрузке
        emit({"ok": True, "checks": [{"name": "metric_axioms", "ok": True}]}, args.output)
        return EXIT_OK
    artifact = read_json_document(args.artifact)
    if not isinstance(artifact, dict):
        raise InputError("Артефакт должен быть JSON-объектом")
    verification = verify_artifact(space, artifact)
    emit(verification, args.output)
    if not verification["ok"]:
        sys.stderr.write(f"Проверка не пройдена: {', '.join(verification['failures'])}\n")
        return EXIT_VERIFICATION
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "generate": cmd_generate,
    "invariants": cmd_invariants,
    "straighten": cmd_straighten,
    "split": cmd_split,
    "bogensatz": cmd_bogensatz,
    "circle": cmd_circle,
    "render": cmd_render,
    "verify": cmd_verify,
}


def run_command(args: argparse.Namespace) -> int:
    """Выполняет подкоманду; исключения построения пробрасываются вызывающему."""
    handler = COMMANDS.get(args.command)
    if handler is None:
        raise InputError(f"Неизвестная команда: {args.command}")
    return handler(args)
