import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coexact.complex import (Chain, ComplexError, Mesh, build_complex, load_mesh, mesh_from_json,
                             mesh_from_off, mesh_to_json, mesh_to_off, save_mesh)
from coexact.models import fixtures


def test_triangle_boundary_signs():
    cx = build_complex(3, [(0, 1, 2)])
    col = cx.boundary(2).toarray()[:, 0]
    assert col[cx.index((1, 2))] == 1
    assert col[cx.index((0, 2))] == -1
    assert col[cx.index((0, 1))] == 1


def test_tetrahedron_surface_has_no_boundary():
    cx = fixtures.single_tetrahedron().complex
    surface = cx.boundary(3) @ np.ones(1, dtype=np.int64)
    assert np.abs(surface).sum() == 4
    assert not (cx.boundary(2) @ surface).any()


def test_counts_and_euler_characteristic():
    s3 = fixtures.boundary_of_4_simplex().complex
    assert s3.counts == (5, 10, 10, 5)
    assert s3.euler_characteristic == 0
    assert s3.is_closed and s3.is_orientable
    assert fixtures.octahedron().complex.euler_characteristic == 2


def test_single_tetrahedron_is_not_closed():
    cx = fixtures.single_tetrahedron().complex
    assert cx.is_manifold and not cx.is_closed


def test_coherent_orientation_flips_across_shared_faces():
    cx = fixtures.boundary_of_4_simplex().complex
    d3 = cx.boundary(3) @ cx.orientation
    assert not d3.any()


@pytest.mark.parametrize("cells, message", [
    ([(0, 1, 2, 3), (3, 2, 1, 0)], "duplicate"),
    ([(0, 1, 1, 2)], "repeats"),
    ([(0, 1, 2, 7)], "outside"),
])
def test_malformed_input_is_rejected(cells, message):
    with pytest.raises(ComplexError, match=message):
        build_complex(4, cells)


def test_three_cofaces_is_not_a_manifold():
    with pytest.raises(ComplexError):
        build_complex(6, fixtures.three_cofaces())
    cx = build_complex(6, fixtures.three_cofaces(), allow_nonmanifold=True)
    assert not cx.is_manifold


def test_chain_from_simplices_respects_vertex_order():
    cx = build_complex(3, [(0, 1, 2)])
    a = Chain.from_simplices(cx, [((2, 1), 1)])
    assert a.coeffs == {cx.index((1, 2)): -1}
    loop = Chain.edge_path(cx, [0, 1, 2, 0])
    assert loop.boundary(cx).is_zero()
    face = Chain.from_simplices(cx, [((0, 1, 2), 1)])
    assert face.boundary(cx) == loop


def test_chain_arithmetic():
    a = Chain(1, {0: 2, 3: -1})
    b = Chain(1, {0: -2, 5: 4})
    assert (a + b).coeffs == {3: -1, 5: 4}
    assert (a - a).is_zero()
    assert (3 * a).coeffs == {0: 6, 3: -3}
    assert a.pair(b) == -4
    assert a.l1() == 3
    assert a.is_integral()


@pytest.mark.parametrize("name", ["single_tetrahedron", "boundary_of_4_simplex", "octahedron"])
@pytest.mark.parametrize("ext", ["json", "off"])
def test_mesh_round_trip(tmp_path, name, ext):
    mesh = getattr(fixtures, name)()
    path = tmp_path / f"m.{ext}"
    save_mesh(mesh, path)
    back = load_mesh(path)
    for k in range(4):
        assert np.array_equal(back.complex.simplices[k], mesh.complex.simplices[k])
    assert np.array_equal(back.vertices, mesh.vertices)


def test_mesh_json_keeps_lower_dimensional_cells():
    cx = build_complex(5, [(0, 1, 2), (2, 3), (4,)])
    back = mesh_from_json(mesh_to_json(Mesh(cx)))
    assert back.complex.counts == cx.counts


def test_bad_mesh_text():
    with pytest.raises(ComplexError):
        mesh_from_json("{not json")
    with pytest.raises(ComplexError):
        mesh_from_off("PLY\n")
    with pytest.raises(ComplexError):
        mesh_from_off("OFF\n4 1 0\n0 0 0\n")


def test_off_is_exact_for_floats():
    mesh = fixtures.boundary_of_4_simplex()
    assert np.array_equal(mesh_from_off(mesh_to_off(mesh)).vertices, mesh.vertices)


@st.composite
def random_complexes(draw):
    n = draw(st.integers(4, 8))
    quads = list(itertools.combinations(range(n), 4))
    cells = draw(st.lists(st.sampled_from(quads), min_size=1, max_size=8, unique=True))
    extra = draw(st.lists(st.sampled_from(list(itertools.combinations(range(n), 3))), max_size=4))
    return build_complex(n, cells + extra, allow_nonmanifold=True)


@given(random_complexes())
def test_boundary_of_boundary_vanishes(cx):
    for k in (2, 3):
        if cx.count(k):
            prod = (cx.boundary(k - 1) @ cx.boundary(k)).toarray()
            assert not prod.any()
