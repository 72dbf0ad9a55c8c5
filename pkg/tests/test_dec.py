import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coexact.algebra import PointFrame, form
from coexact.complex import build_complex
from coexact.dec import (LOCAL_EDGES, GeometryError, assemble_metric, export_coo, hodge_decompose,
                         import_coo, norms, skeleton_metric)
from coexact.models import fixtures


def single(coords):
    return assemble_metric(build_complex(4, [(0, 1, 2, 3)]), np.asarray(coords, dtype=float))


def coordinate_form(md, axis):
    """Cochain of the constant 1-form dx_axis from the per-cell coordinates."""
    c = np.zeros(md.complex.count(1))
    edges = md.complex.faces(3, 1)
    for e, (a, b) in enumerate(LOCAL_EDGES):
        c[edges[:, e]] = md.cell_coords[:, b, axis] - md.cell_coords[:, a, axis]
    return c


def whitney_mass_oracle(coords):
    """Whitney 1-form mass matrix from integrals of barycentric products."""
    P = np.asarray(coords, dtype=float)
    E = (P[1:] - P[0]).T
    vol = abs(np.linalg.det(E)) / 6.0
    grads = np.vstack([-np.linalg.inv(E).sum(axis=0), np.linalg.inv(E)])
    mono = lambda a, b: vol * (1 + (a == b)) / 20.0  # integral of lambda_a lambda_b
    M = np.zeros((6, 6))
    for p, (i, j) in enumerate(LOCAL_EDGES):
        for q, (k, l) in enumerate(LOCAL_EDGES):
            M[p, q] = (mono(i, k) * grads[j] @ grads[l] - mono(i, l) * grads[j] @ grads[k]
                       - mono(j, k) * grads[i] @ grads[l] + mono(j, l) * grads[i] @ grads[k])
    return M


def test_unit_tetrahedron_volume_and_scalar_mass():
    md = single(fixtures.single_tetrahedron().vertices)
    assert np.isclose(md.total_volume, 1 / 6)
    assert np.isclose(md.mass[0].sum(), 1 / 6)
    assert np.allclose(md.edge_lengths, [1, 1, 1, np.sqrt(2), np.sqrt(2), np.sqrt(2)])


@pytest.mark.parametrize("seed", range(4))
def test_one_form_mass_matches_barycentric_integrals(seed):
    coords = np.random.default_rng(seed).normal(size=(4, 3))
    if np.linalg.det(coords[1:] - coords[0]) < 0:
        coords[[1, 2]] = coords[[2, 1]]
    md = single(coords)
    assert np.allclose(md.mass[1].toarray(), whitney_mass_oracle(coords))


def test_torus_volume_and_positive_definite_masses(torus3):
    md, _ = torus3
    assert np.isclose(md.total_volume, 1.0)
    for k in range(4):
        M = md.mass[k].toarray()
        assert np.allclose(M, M.T)
        assert np.linalg.eigvalsh(M).min() > 0


def test_inverted_tetrahedron_is_rejected():
    cx = fixtures.boundary_of_4_simplex().complex
    flat = np.zeros((5, 3))
    with pytest.raises(GeometryError):
        assemble_metric(cx, flat)


def test_norms_of_a_constant_unit_form(torus3):
    md, _ = torus3
    dx = coordinate_form(md, 0)
    nr = norms(md, dx, 1)
    assert np.isclose(nr["L2"] ** 2, md.total_volume)
    assert np.isclose(nr["L1"], md.total_volume)
    assert np.isclose(nr["Linf"], 1.0)
    assert np.isclose(nr["mass"], 1.0)


@given(st.integers(0, 10_000), st.floats(0.1, 10))
def test_norm_relations_and_scaling(seed, s):
    md = single(fixtures.single_tetrahedron().vertices)
    a = np.random.default_rng(seed).normal(size=6)
    for degree, size in ((1, 6), (2, 4)):
        c = a[:size]
        nr, scaled = norms(md, c, degree), norms(md, s * c, degree)
        for key in nr:
            assert np.isclose(scaled[key], s * nr[key])
        assert nr["mass"] <= nr["Linf"] + 1e-12
        assert nr["L1"] <= md.total_volume * nr["Linf"] + 1e-12
        assert nr["L2"] ** 2 <= md.total_volume * nr["Linf"] ** 2 + 1e-12


def test_pointwise_norms_agree_with_the_frame_algebra():
    md = single(np.random.default_rng(3).normal(size=(4, 3)) + np.eye(4, 3) * 2)
    rng = np.random.default_rng(4)
    c1, c2 = rng.normal(size=6), rng.normal(size=4)
    bary = np.array([0.1, 0.2, 0.3, 0.4])
    frame = PointFrame(md.gram[0], int(md.orientation[0]))
    cov = md.one_form_at(c1, bary)[0]
    assert np.isclose(md.one_form_norm(cov[None])[0], frame.norm(form(3, 1, cov)))
    w = md.two_form_at(c2, bary)[0]
    two = form(3, 2, [w[2], -w[1], w[0]])
    assert np.isclose(md.two_form_norm(w[None])[0], frame.norm(two))
    # the velocity is the metric dual of the star of the 2-form at the centroid
    w = md.two_form_at(c2, np.full(4, 0.25))[0]
    two = form(3, 2, [w[2], -w[1], w[0]])
    v = md.velocity(c2)[0]
    assert np.allclose(frame.flat(v).coeffs, frame.star(two).coeffs)


def test_hodge_parts(torus3):
    md, H = torus3
    rng = np.random.default_rng(0)
    f = rng.normal(size=md.complex.n_vertices)
    exact_in = md.d(0) @ f
    parts = hodge_decompose(md, exact_in)
    assert np.allclose(parts.exact, exact_in)
    assert np.abs(parts.coexact).max() < 1e-8 and np.abs(parts.harmonic).max() < 1e-8
    dx = coordinate_form(md, 0)
    parts = hodge_decompose(md, dx)
    assert np.allclose(parts.harmonic, dx, atol=1e-8)
    omega = rng.normal(size=md.complex.count(1))
    parts = hodge_decompose(md, omega)
    M = md.mass[1]
    assert np.allclose(parts.exact + parts.coexact + parts.harmonic, omega)
    for a, b in itertools.combinations((parts.exact, parts.coexact, parts.harmonic), 2):
        assert abs(a @ (M @ b)) < 1e-8 * (omega @ (M @ omega))
    assert np.abs(md.d(1) @ parts.harmonic).max() < 1e-8


def test_harmonic_dimension_equals_first_betti(torus3):
    md, H = torus3
    harm = np.column_stack([hodge_decompose(md, H.cocycle_matrix(md.complex.count(1))[j]).harmonic
                            for j in range(H.rank)])
    assert np.linalg.matrix_rank(harm, tol=1e-8) == H.betti[1] == 3


def test_coo_round_trip(tmp_path, torus3):
    md, _ = torus3
    path = tmp_path / "m1.coo"
    export_coo(md.mass[1], path)
    assert np.array_equal(import_coo(path).toarray(), md.mass[1].toarray())


def test_skeleton_metric_heron():
    mesh = fixtures.octahedron()
    sk = skeleton_metric(mesh.complex, mesh.vertices)
    by_length = skeleton_metric(mesh.complex, edge_lengths=sk.edge_lengths)
    assert np.allclose(sk.triangle_areas, np.sqrt(3) / 2)
    assert np.allclose(by_length.triangle_areas, sk.triangle_areas)
