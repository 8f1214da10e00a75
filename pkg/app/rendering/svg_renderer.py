"""
Отрисовка пространства, дуг и окружностей в SVG.

Вывод детерминирован: координаты округляются до фиксированного числа знаков,
порядок элементов задаётся порядком входных дуг и отмеченных точек.
"""

from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import svgwrite

from geometry.arc_model import DiscreteArc, DiscreteCircle
from geometry.space_model import MetricSpace
from utils.error_handler import ErrorType, InputError, safe_operation
from utils.logger import log_info

Curve = Union[DiscreteArc, DiscreteCircle]

CANVAS = 800.0
PADDING = 24.0
DIGITS = 3

# Различимые цвета штрихов, далее по кругу
PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#17becf",
    "#8c564b",
    "#e377c2",
)


def render_svg(
    space: MetricSpace,
    curves: Sequence[Curve],
    marked: Optional[Sequence[int]] = None,
    title: Optional[str] = None,
) -> str:
    """
    SVG-документ: точки пространства точками, каждая дуга своей ломаной,
    окружности замкнутыми многоугольниками, отмеченные точки с подписями.

    Args:
        space: Пространство с координатами
        curves: Дуги и окружности в порядке отрисовки
        marked: Отмеченные точки (подписываются номерами)
        title: Заголовок документа

    Returns:
        str: Текст SVG

    Raises:
        InputError: у пространства нет координат или точка вне пространства
    """
    return safe_operation(
        _render_svg_impl,
        ErrorType.INPUT_ERROR,
        show_cli_error=False,
        operation_name="Отрисовка SVG",
        reraise=True,
        space=space,
        curves=curves,
        marked=marked,
        title=title,
    )


def _render_svg_impl(
    space: MetricSpace,
    curves: Sequence[Curve],
    marked: Optional[Sequence[int]] = None,
    title: Optional[str] = None,
) -> str:
    if space.coords is None:
        raise InputError("У пространства нет координат: отрисовка невозможна")
    marked = [int(p) for p in (marked or [])]
    bad = [p for p in marked if not 0 <= p < space.n_points]
    if bad:
        raise InputError(f"Отмеченные точки {bad} вне пространства")

    canvas = _project(space.coords)
    dot = max(0.6, min(3.0, 0.25 * _step_pixels(space, canvas)))
    size = _fmt(CANVAS + 2 * PADDING)
    drawing = svgwrite.Drawing(profile="tiny", size=(size, size))
    drawing.attribs["viewBox"] = f"0 0 {size} {size}"
    if title:
        drawing.add(drawing.text(title, insert=(PADDING, PADDING * 0.75), font_size=12))

    points = drawing.g(id="points", fill="#999999", stroke="none")
    for x, y in canvas:
        points.add(drawing.circle(center=(_fmt(x), _fmt(y)), r=_fmt(dot)))
    drawing.add(points)

    for index, curve in enumerate(curves):
        if curve.space is not space:
            raise InputError(f"Кривая {index} принадлежит другому пространству")
        colour = PALETTE[index % len(PALETTE)]
        vertices = [(_fmt(canvas[p, 0]), _fmt(canvas[p, 1])) for p in curve.points]
        group = drawing.g(id=f"curve{index}", fill="none", stroke=colour)
        if isinstance(curve, DiscreteCircle):
            group.add(drawing.polygon(points=vertices, stroke_width=_fmt(2 * dot)))
        else:
            group.add(
                drawing.polyline(
                    points=vertices,
                    stroke_width=_fmt(2 * dot),
                    stroke_linecap="round",
                    stroke_linejoin="round",
                )
            )
        drawing.add(group)

    if marked:
        labels = drawing.g(id="marked", fill="#000000")
        for p in marked:
            x, y = canvas[p]
            labels.add(drawing.circle(center=(_fmt(x), _fmt(y)), r=_fmt(3 * dot)))
            labels.add(
                drawing.text(str(p), insert=(_fmt(x + 4 * dot), _fmt(y - 4 * dot)), font_size=11)
            )
        drawing.add(labels)

    text = drawing.tostring()
    log_info(f"SVG: {len(curves)} кривых, {len(marked)} отмеченных точек")
    return text


def _project(coords: np.ndarray) -> np.ndarray:
    """Координаты в пиксели холста; ось y направлена вверх."""
    low = coords.min(axis=0)
    span = float(max((coords.max(axis=0) - low).max(), 1e-12))
    scale = CANVAS / span
    canvas = (coords - low) * scale
    canvas[:, 1] = CANVAS - canvas[:, 1]
    return canvas + PADDING


def _step_pixels(space: MetricSpace, canvas: np.ndarray) -> float:
    """Длина одного шага графа в пикселях (по первому ребру шагового графа)."""
    graph = space.step_graph.tocoo()
    if graph.nnz == 0:
        return 4.0
    a, b = int(graph.row[0]), int(graph.col[0])
    return float(np.linalg.norm(canvas[a] - canvas[b]))


def _fmt(value: float) -> float:
    return round(float(value), DIGITS)


def curves_from_documents(space: MetricSpace, documents: Sequence[dict]) -> List[Curve]:
    """Разбирает документы дуг/окружностей ({points, cyclic}) в кривые пространства."""
    curves: List[Curve] = []
    for document in documents:
        points: Tuple[int, ...] = tuple(int(p) for p in document["points"])
        if document.get("cyclic"):
            curves.append(DiscreteCircle(space, points))
        else:
            curves.append(DiscreteArc(space, points))
    return curves
