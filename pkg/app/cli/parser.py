"""Разбор аргументов командной строки qcf."""

import argparse
from typing import List, Optional, Tuple

from flow_strategies.strategy_factory import get_available_engines
from utils.error_handler import InputError

GENERATOR_KINDS = ("grid", "carpet", "circle", "glued", "cusp")


class QcfArgumentParser(argparse.ArgumentParser):
    """Ошибки разбора становятся InputError (код выхода 4), а не SystemExit(2)."""

    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def parse_points(text: str) -> List[int]:
    """'0,64,4224' → [0, 64, 4224]."""
    try:
        points = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise InputError(f"Ожидался список целых через запятую: {text!r}") from e
    if not points:
        raise InputError("Список точек пуст")
    return points


def parse_mode(text: str):
    """'whole-arc' или пара позиций разрезов 'i1,i2'."""
    if text == "whole-arc":
        return text
    cuts = parse_points(text)
    if len(cuts) != 2:
        raise InputError(f"Режим должен быть 'whole-arc' или 'i1,i2': {text!r}")
    return tuple(cuts)


def parse_path_ends(text: str) -> Tuple[int, int]:
    ends = parse_points(text)
    if len(ends) != 2:
        raise InputError(f"--path ожидает две точки 'x,y': {text!r}")
    return ends[0], ends[1]


def _add_arc_source(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--arc", help="JSON дуги или артефакт с дугами")
    source.add_argument("--path", help="кратчайший путь шагового графа между x,y")
    parser.add_argument("--index", type=int, default=0, help="номер дуги в артефакте")


def build_parser() -> argparse.ArgumentParser:
    """Парсер со всеми подкомандами и глобальными флагами."""
    parser = QcfArgumentParser(
        prog="qcf",
        description="Квазидуги и квазиокружности в конечных метрических пространствах",
    )
    parser.add_argument("--seed", type=int, default=None, help="зерно (по умолчанию 0)")
    parser.add_argument(
        "--mesh-floor-mult",
        type=float,
        default=None,
        help="множитель порога разрешения в единицах mesh_h (по умолчанию 4)",
    )
    parser.add_argument(
        "--engine", choices=get_available_engines(), default=None, help="движок потока"
    )
    commands = parser.add_subparsers(dest="command", parser_class=QcfArgumentParser)
    commands.required = True

    generate = commands.add_parser("generate", help="сгенерировать пространство")
    generate.add_argument("kind", choices=GENERATOR_KINDS)
    generate.add_argument("--k", type=int, default=16, help="размер решётки / число точек")
    generate.add_argument("--level", type=int, default=2, help="уровень ковра")
    generate.add_argument(
        "--metric", choices=("intrinsic", "euclidean"), default="intrinsic", help="метрика ковра"
    )
    generate.add_argument("-o", "--output", default=None)

    invariants = commands.add_parser("invariants", help="оценить N, L_lc, L_alc")
    invariants.add_argument("space")
    invariants.add_argument("--samples", type=int, default=None)
    invariants.add_argument("-o", "--output", default=None)

    straighten = commands.add_parser("straighten", help="спрямить дугу")
    straighten.add_argument("space")
    _add_arc_source(straighten)
    straighten.add_argument("--eps", type=float, required=True)
    straighten.add_argument("--mode", type=parse_mode, default="whole-arc")
    straighten.add_argument("-o", "--output", default=None)

    split = commands.add_parser("split", help="расщепить квазидугу на две")
    split.add_argument("space")
    _add_arc_source(split)
    split.add_argument("--eps", type=float, default=0.3)
    split.add_argument("--lambda0", type=float, default=None)
    split.add_argument("-o", "--output", default=None)

    bogensatz = commands.add_parser("bogensatz", help="n квазидуг между двумя точками")
    bogensatz.add_argument("space")
    bogensatz.add_argument("--x", type=int, required=True)
    bogensatz.add_argument("--y", type=int, required=True)
    bogensatz.add_argument("--n", type=int, default=2)
    bogensatz.add_argument("-o", "--output", default=None)

    circle = commands.add_parser("circle", help="квазиокружность через точки")
    circle.add_argument("space")
    circle.add_argument("--points", type=parse_points, required=True)
    circle.add_argument("-o", "--output", default=None)

    render = commands.add_parser("render", help="отрисовать артефакты в SVG")
    render.add_argument("space")
    render.add_argument("artifacts", nargs="*")
    render.add_argument("--mark", type=parse_points, default=None, help="подписанные точки")
    render.add_argument("-o", "--output", required=True)

    verify = commands.add_parser("verify", help="перепроверить сохранённый артефакт")
    verify.add_argument("space")
    verify.add_argument("artifact", nargs="?", default=None)
    verify.add_argument("-o", "--output", default=None)
    return parser


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)
