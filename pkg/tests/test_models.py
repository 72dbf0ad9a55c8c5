import math

import numpy as np
import pytest

from coexact.complex import Chain
from coexact.filling import SamplerConfig, cheeger_estimate, min_filling_area
from coexact.homology import betti_numbers, homology_basis
from coexact.models import MODELS, generate_mesh
from coexact.models.berger import (BergerModel, berger_h1_bounds, berger_mesh, berger_spectrum_invariant,
                                   fiber_form_eigenvalue, fiber_loop, hopf_field, hopf_identities,
                                   invariant_laplacian, sphere_points)
from coexact.models.cusp import (CuspMeshSpec, CuspModel, analytic_eigenvalue, central_volume,
                                 central_volume_exact, cusp_eigenvalue, cusp_mesh, equator_loop)
from coexact.models.torus import first_eigenvalue, torus_mesh

EPSILONS = (1.0, 0.5, 0.25, 0.1)


# -- Berger spheres ---------------------------------------------------------

@pytest.mark.parametrize("eps", EPSILONS)
def test_invariant_spectrum_closed_form(eps):
    lam = berger_spectrum_invariant(eps)
    assert np.allclose(lam, sorted([4 * eps ** 2, 4 / eps ** 2, 4 / eps ** 2]), rtol=0, atol=1e-12)
    assert abs(fiber_form_eigenvalue(eps) - 4 * eps ** 2) <= 1e-12
    assert np.allclose(invariant_laplacian(eps, route="star"), invariant_laplacian(eps, route="adjoint"),
                       atol=1e-12)


def test_round_sphere_invariant_forms_are_degenerate():
    # at eps = 1 every invariant form is an eigenform with eigenvalue 4
    assert np.allclose(invariant_laplacian(1.0), 4 * np.eye(3))


@pytest.mark.parametrize("eps", EPSILONS)
def test_berger_bounds(eps):
    upper, lower = berger_h1_bounds(eps)
    assert upper == 2 * eps and lower == math.pi
    ids = hopf_identities(eps)
    assert ids["d_alpha_factor"] == 2.0 and np.isclose(ids["pullback_area_norm"], 1.0)
    assert np.isclose(ids["base_area"], math.pi)
    assert np.isclose(ids["fiber_length"] / ids["alpha_on_fiber"], eps)


def test_invalid_epsilon():
    for eps in (0.0, -1.0, 1.5):
        with pytest.raises(ValueError):
            BergerModel(eps)
    with pytest.raises(ValueError):
        invariant_laplacian(0.5, route="other")


def test_hopf_field_is_tangent_and_unit():
    x = np.random.default_rng(0).normal(size=(20, 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    v = hopf_field(x)
    assert np.allclose((x * v).sum(axis=1), 0)
    assert np.allclose(np.linalg.norm(v, axis=1), 1)
    corners = sphere_points([[0, 0, 0, 0], [4, 4, 0, 2]], 4)
    assert np.allclose(np.linalg.norm(corners, axis=1), 1)


@pytest.fixture(scope="module")
def berger4():
    return {eps: berger_mesh(eps, 4) for eps in (1.0, 0.5, 0.25)}


def test_berger_mesh_is_a_sphere(berger4):
    md = berger4[1.0]
    assert betti_numbers(md.complex) == (1, 0, 0, 1)
    assert md.complex.is_closed
    # inscribed chords lose a few percent of the round volume at this resolution
    assert np.isclose(md.total_volume, 2 * math.pi ** 2, rtol=0.1)
    for eps, m in berger4.items():
        assert np.isclose(m.total_volume, eps * 2 * math.pi ** 2, rtol=0.1)


def fiber_length(md):
    return Chain.edge_path(md.complex, fiber_loop(md)).l1(md.edge_lengths)


def test_fiber_loop_length(berger4):
    assert np.isclose(fiber_length(berger4[1.0]), 2 * math.pi, rtol=0.01)
    # thin fibers converge more slowly: the tensor is frozen at tilted centroids
    eps = 0.25
    rel = [fiber_length(berger_mesh(eps, m)) / (2 * math.pi * eps) - 1 for m in (2, 4, 6)]
    assert all(0 < b < a for a, b in zip(rel, rel[1:]))
    assert rel[-1] < 0.15
    with pytest.raises(ValueError):
        berger_mesh(0.5, 3)


def test_cheeger_upper_bound_scales_with_epsilon(berger4):
    ratios = {}
    for eps, md in berger4.items():
        H = homology_basis(md.complex)
        loop = Chain.edge_path(md.complex, fiber_loop(md))
        est = cheeger_estimate(md, H, SamplerConfig(tree_cycles=0, short_cycles=0, extra_cycles=[loop],
                                                    backend="highs"))
        ratios[eps] = est.ratio / eps
    assert max(ratios.values()) <= 2.5
    assert max(ratios.values()) / min(ratios.values()) < 2.5


def test_round_sphere_fiber_filling_is_a_hemisphere(berger4):
    md = berger4[1.0]
    H = homology_basis(md.complex)
    loop = Chain.edge_path(md.complex, fiber_loop(md))
    area = min_filling_area(md, H, loop, backend="highs").area
    assert 0.9 * 2 * math.pi <= area <= 2 * math.pi * 1.05


# -- cusp ------------------------------------------------------------------

def test_cusp_eigenvalue_converges_at_second_order():
    eps = math.exp(-3)
    errs = [cusp_eigenvalue(CuspModel(eps, n)).relative_error for n in (63, 127, 255)]
    rates = [a / b for a, b in zip(errs, errs[1:])]
    assert all(3.5 < r < 4.5 for r in rates)


def test_cusp_eigenvalue_is_monotone_and_vanishes():
    eps = [math.exp(-k) for k in (1, 2, 5, 10, 20)]
    vals = [cusp_eigenvalue(CuspModel(e, 512)).finite_difference for e in eps]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 0.01
    assert np.isclose(analytic_eigenvalue(math.exp(-1)), math.pi ** 2 / 4)


def test_cusp_rayleigh_quotient():
    res = cusp_eigenvalue(CuspModel(0.01, 400))
    assert np.isclose(res.rayleigh_quotient(), res.finite_difference, rtol=1e-10)


def test_cusp_parameter_checks():
    with pytest.raises(ValueError):
        cusp_eigenvalue(CuspModel(0.1, 8))
    for eps in (0.0, 1.0):
        with pytest.raises(ValueError):
            CuspModel(eps)


@pytest.fixture(scope="module")
def cusp():
    return cusp_mesh(math.exp(-2), CuspMeshSpec(sphere_level=1, t_step=0.25))


def test_cusp_mesh_topology_and_volume(cusp):
    assert betti_numbers(cusp.complex) == (1, 0, 0, 1)
    assert np.isclose(central_volume(cusp), central_volume_exact(math.exp(-2)), rtol=0.01)
    assert set(cusp.extra["part"]) == {"central", "left", "right"}


def test_cusp_equator_ratio_stays_bounded():
    ratios = []
    for k in (1, 2, 3):
        md = cusp_mesh(math.exp(-k), CuspMeshSpec(sphere_level=1, t_step=0.5))
        H = homology_basis(md.complex)
        loop = Chain.edge_path(md.complex, equator_loop(md))
        area = min_filling_area(md, H, loop, backend="highs").area
        ratios.append(area / loop.l1(md.edge_lengths))
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert max(ratios) < 1.0


# -- torus and dispatcher --------------------------------------------------

def test_torus_needs_three_cells_per_side():
    with pytest.raises(ValueError):
        torus_mesh(2)
    md = torus_mesh(3)
    assert md.complex.counts[3] == 6 * 27
    assert first_eigenvalue() == 4 * math.pi ** 2


@pytest.mark.parametrize("model", MODELS)
def test_generate_mesh(model):
    res = {"torus": 3, "berger": 2, "cusp": 1}[model]
    cx, md = generate_mesh(model, res)
    assert md.complex is cx and cx.is_closed


def test_generate_mesh_accepts_model_objects():
    _, md = generate_mesh(BergerModel(0.5), 2)
    assert md.extra["epsilon"] == 0.5
    with pytest.raises(ValueError):
        generate_mesh("klein")
