import math

import pytest

from geometry.graph_ops import is_step_walk
from geometry.invariants import (
    alc_triples_at,
    annular_linear_connectivity,
    default_radii,
    doubling_constant,
    estimate_working_constants,
    invariants_report,
    linear_connectivity,
    sample_alc_triples,
    sample_pairs,
)
from geometry.space_model import generate_sierpinski_carpet, grid_index
from utils.error_handler import InputError


def test_doubling_constant_of_square(grid8):
    estimate = doubling_constant(grid8, [0.4, 0.8], seed=0)
    # шар радиуса 0.4 не покрыть одним шаром радиуса 0.2
    assert estimate.greedy >= 2
    assert estimate.exact is None or 2 <= estimate.exact <= estimate.greedy
    assert estimate.samples > 0
    assert estimate.worst is not None


def test_doubling_rejects_unresolved_radii(grid8):
    with pytest.raises(InputError):
        doubling_constant(grid8, [0.1])
    with pytest.raises(InputError):
        doubling_constant(grid8, [])


def test_default_radii_start_at_twice_mesh(grid8):
    radii = default_radii(grid8)
    assert radii[0] == pytest.approx(2 * grid8.mesh_h)
    assert all(b == pytest.approx(4 * a) for a, b in zip(radii, radii[1:]))


def test_sampled_pairs_are_resolved(grid8):
    pairs = sample_pairs(grid8, 12, seed=5)
    assert len(pairs) == 12
    assert all(grid8.dist(x, y) >= grid8.mesh_h - grid8.tol for x, y in pairs)
    assert pairs == sample_pairs(grid8, 12, seed=5)


def test_square_is_linearly_connected(grid16):
    estimate = linear_connectivity(grid16, sample_pairs(grid16, 10, seed=1))
    assert 1.0 <= estimate.value <= 2.0
    assert len(estimate.witnesses) == 10
    for witness in estimate.witnesses:
        assert is_step_walk(grid16, witness["path"])
        assert witness["path"][0] == witness["x"] and witness["path"][-1] == witness["y"]


def test_carpet_witnesses_stay_in_region():
    carpet = generate_sierpinski_carpet(2, metric="euclidean")
    estimate = linear_connectivity(carpet, sample_pairs(carpet, 8, seed=2))
    assert math.isfinite(estimate.value)
    for witness in estimate.witnesses:
        x, y = witness["x"], witness["y"]
        reach = [max(carpet.dist(z, x), carpet.dist(z, y)) for z in witness["path"]]
        assert max(reach) <= witness["D_min"] + carpet.tol


def test_linear_connectivity_rejects_close_pair(grid8):
    with pytest.raises(InputError):
        linear_connectivity(grid8, [(0, 0)])


def test_square_is_annularly_connected(grid16):
    triples = sample_alc_triples(grid16, 8, seed=0)
    assert triples
    estimate = annular_linear_connectivity(grid16, triples)
    assert estimate.ok
    assert 1.0 <= estimate.value < math.inf
    assert all(t[1] >= 4 * grid16.mesh_h - grid16.tol for t in triples)


def test_glue_point_breaks_annular_connectivity(glued8):
    glue = glued8.meta["glue_point"]
    triples = alc_triples_at(glued8, [glue], [0.75], seed=0)
    assert len(triples) == 1
    _, _, x, y = triples[0]
    # точки выбраны в разных квадратах
    assert (glued8.coords[x] <= 1.0).all() != (glued8.coords[y] <= 1.0).all()

    estimate = annular_linear_connectivity(glued8, triples)
    assert not estimate.ok
    assert estimate.failures[0]["p"] == glue


def test_interior_point_of_square_is_not_a_failure(glued8):
    center = grid_index(8, 4, 4)
    estimate = annular_linear_connectivity(glued8, alc_triples_at(glued8, [center], [0.75]))
    assert estimate.ok


def test_annulus_below_resolution_is_rejected(grid16):
    with pytest.raises(InputError):
        annular_linear_connectivity(grid16, [(0, grid16.mesh_h, 1, 2)])


def test_working_constants_are_cached(grid8):
    first = estimate_working_constants(grid8, seed=0)
    assert estimate_working_constants(grid8, seed=0) is first
    assert first.L == max(first.L_lc, first.L_alc)
    assert first.N >= 1
    assert first.alc_ok


def test_report_flags_glued_squares(glued8):
    report = invariants_report(glued8, 6, 0)
    assert report["alc_ok"] is False
    assert any(f["p"] == glued8.meta["glue_point"] for f in report["alc_failures"])


def test_report_is_deterministic(grid8):
    first = invariants_report(grid8, 6, 3)
    assert first == invariants_report(grid8, 6, 3)
    assert first["seed"] == 3 and first["samples"] == 6
    assert {w["kind"] for w in first["witnesses"]} <= {"lc", "alc"}
    assert first["lc_within_8_alc"] is (first["L_lc"] <= 8 * first["L_alc"])
