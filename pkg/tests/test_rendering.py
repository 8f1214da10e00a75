import pytest

from geometry.arc_model import DiscreteArc, DiscreteCircle
from geometry.space_model import generate_grid_square, grid_index
from rendering.svg_renderer import curves_from_documents, render_svg
from utils.error_handler import InputError


def test_svg_has_one_group_per_curve(grid8):
    arc = DiscreteArc(grid8, [grid_index(8, i, 2) for i in range(9)])
    text = render_svg(grid8, [arc], marked=[0, 80], title="решётка")
    assert text.startswith("<svg")
    assert 'id="points"' in text
    assert 'id="curve0"' in text
    assert "<polyline" in text
    assert 'id="marked"' in text
    assert ">80<" in text
    assert text.count("<circle") == grid8.n_points + 2


def test_circle_is_drawn_as_polygon(circle64):
    circle = DiscreteCircle(circle64, list(range(64)))
    text = render_svg(circle64, [circle])
    assert "<polygon" in text
    assert "<polyline" not in text


def test_rendering_is_stable(grid8):
    arc = DiscreteArc(grid8, [0, 1, 2])
    assert render_svg(grid8, [arc]) == render_svg(grid8, [arc])


def test_space_without_coordinates_is_rejected(four_point_space):
    with pytest.raises(InputError):
        render_svg(four_point_space, [])


def test_foreign_curve_and_bad_marks(grid8):
    other = generate_grid_square(8)
    with pytest.raises(InputError):
        render_svg(grid8, [DiscreteArc(other, [0, 1])])
    with pytest.raises(InputError):
        render_svg(grid8, [], marked=[grid8.n_points])


def test_documents_become_curves(grid8):
    curves = curves_from_documents(
        grid8, [{"points": [0, 1, 2]}, {"points": [0, 1, 10, 9], "cyclic": True}]
    )
    assert isinstance(curves[0], DiscreteArc)
    assert isinstance(curves[1], DiscreteCircle)
