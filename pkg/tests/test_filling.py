import itertools
import math

import numpy as np
import pytest

from coexact.complex import Chain
from coexact.dec import skeleton_metric
from coexact.filling import (FillingError, SamplerConfig, cheeger_estimate, edge_path_polyline,
                             min_filling_area, project_to_skeleton, Polyline)
from coexact.homology import classify_cycle, homology_basis
from coexact.models import fixtures


def surface(name):
    mesh = getattr(fixtures, name)()
    cx = mesh.complex
    return skeleton_metric(cx, mesh.vertices), homology_basis(cx)


def brute_force_filling(md, rhs, values=(-1, 0, 1)):
    """Least area over all 2-chains with coefficients in ``values``."""
    d2 = md.complex.boundary(2).toarray()
    F = d2.shape[1]
    X = np.array(list(itertools.product(values, repeat=F)))
    ok = np.all(X @ d2.T == rhs, axis=1)
    if not ok.any():
        return math.inf
    return float((np.abs(X[ok]) @ md.triangle_areas).min())


def test_zero_cycle():
    md, H = surface("octahedron")
    res = min_filling_area(md, H, Chain(1))
    assert res.area == 0.0 and not res.chain.any()


def test_octahedron_equator_fills_a_hemisphere():
    md, H = surface("octahedron")
    cx = md.complex
    gamma = Chain.edge_path(cx, fixtures.octahedron_equator())
    res = min_filling_area(md, H, gamma)
    oracle = brute_force_filling(md, gamma.to_array(cx.count(1)))
    assert np.isclose(oracle, 2 * math.sqrt(3))
    assert np.isclose(res.area, oracle)
    assert res.integrality_gap is not None and abs(res.integrality_gap) < 1e-9
    assert res.residual <= 1e-9


def test_projective_plane_core_needs_two_copies():
    md, H = surface("projective_plane")
    cx = md.complex
    core = Chain.edge_path(cx, fixtures.projective_plane_core_loop())
    res = min_filling_area(md, H, core)
    assert res.r_used == 2
    oracle = brute_force_filling(md, 2 * core.to_array(cx.count(1)), )
    ilp = res.area + res.integrality_gap
    assert np.isclose(ilp * 2, oracle)
    assert res.area <= ilp + 1e-9
    with pytest.raises(FillingError):
        min_filling_area(md, H, core, r=3)
    assert np.isclose(min_filling_area(md, H, core, r="universal").area, res.area)


def test_nontrivial_cycle_cannot_be_filled(torus3):
    md, H = torus3
    with pytest.raises(FillingError):
        min_filling_area(md, H, Chain.edge_path(md.complex, [0, 9, 18, 0]))


def test_unit_square_in_the_grid(torus3):
    md, H = torus3
    h = 1 / 3
    # square x in [0, h], y in [0, h] at z = 0; vertex (i, j, k) has id 9 i + 3 j + k
    square = Chain.edge_path(md.complex, [0, 9, 12, 3, 0])
    res = min_filling_area(md, H, square)
    assert np.isclose(res.area, h * h)
    est = cheeger_estimate(md, H, SamplerConfig(tree_cycles=0, short_cycles=0, extra_cycles=[square]))
    assert np.isclose(est.ratio, 4 / h)


def test_lp_is_not_worse_than_integers_and_stokes(torus3):
    md, H = torus3
    cx = md.complex
    rng = np.random.default_rng(1)
    d2 = cx.boundary(2)
    closed = md.d(0) @ rng.normal(size=cx.n_vertices) + H.cocycle_matrix(cx.count(1)).T @ rng.normal(size=3)
    areas = []
    for faces in ([0, 5], [3, 17, 40], [100]):
        c = np.zeros(cx.count(2), dtype=np.int64)
        c[faces] = 1
        gamma = Chain.from_array(1, d2 @ c)
        res = min_filling_area(md, H, gamma, integer_check=True)
        assert res.area <= res.area + res.integrality_gap + 1e-9
        assert res.area <= md.triangle_areas[faces].sum() + 1e-12
        rhs = gamma.to_array(cx.count(1))
        assert np.abs(d2 @ res.chain - rhs).max() <= 1e-9
        assert np.isclose(closed @ (d2 @ res.chain), closed @ rhs)
        areas.append((gamma, res.area))
    (g1, a1), (g2, a2) = areas[:2]
    assert min_filling_area(md, H, g1 + g2).area <= a1 + a2 + 1e-9


def test_backends_agree(torus3):
    md, H = torus3
    gamma = Chain.edge_path(md.complex, [0, 9, 12, 3, 0])
    a = min_filling_area(md, H, gamma, backend="simplex").area
    b = min_filling_area(md, H, gamma, backend="highs").area
    assert np.isclose(a, b)


def test_edge_polyline_projects_to_itself(torus3):
    md, _ = torus3
    path = [0, 9, 12, 3, 0]
    proj = project_to_skeleton(md, edge_path_polyline(md, path))
    assert proj.chain == Chain.edge_path(md.complex, path)
    assert proj.correction_area == 0.0
    assert np.isclose(proj.chain_length, proj.curve_length)


def test_chord_through_one_tetrahedron():
    from coexact.dec import assemble_metric

    mesh = fixtures.single_tetrahedron()
    md = assemble_metric(mesh.complex, mesh.vertices)
    start, end = np.array([0.1, 0.6, 0.2, 0.1]), np.array([0.1, 0.1, 0.2, 0.6])
    poly = Polyline(np.array([0]), start[None], end[None])
    proj = project_to_skeleton(md, poly, closed=False)
    assert proj.chain == Chain.edge_path(md.complex, [1, 3])
    P = mesh.vertices
    p, q = start @ P, end @ P
    tri = lambda a, b, c: 0.5 * np.linalg.norm(np.cross(b - a, c - a))
    assert np.isclose(proj.correction_area, tri(p, q, P[3]) + tri(p, P[3], P[1]))
    assert np.isfinite(proj.constant) and proj.constant > 0


def test_cheeger_history_is_monotone(torus3):
    md, H = torus3
    small = cheeger_estimate(md, H, SamplerConfig(seed=2, tree_cycles=4, short_cycles=4))
    large = cheeger_estimate(md, H, SamplerConfig(seed=2, tree_cycles=4, short_cycles=16))
    assert all(b <= a for a, b in zip(small.history, small.history[1:]))
    assert large.ratio <= small.ratio
    assert large.to_csv().startswith("cycle_id,source,length,r,area,ratio")


def test_cheeger_needs_candidates(torus3):
    md, H = torus3
    with pytest.raises(ValueError):
        cheeger_estimate(md, H, SamplerConfig(tree_cycles=0, short_cycles=0))
