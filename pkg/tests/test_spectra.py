import numpy as np
import pytest
import scipy.linalg as sla

from coexact.spectra import coexact_spectrum, exact_spectrum, harmonic_basis, sup_l2_ratio
from test_dec import coordinate_form


def dense_pencil(md):
    K = (md.d(1).T @ md.mass[2] @ md.d(1)).toarray()
    return K, md.mass[1].toarray()


def test_matches_dense_generalized_eigensolver(torus3):
    md, H = torus3
    K, M = dense_pencil(md)
    w = sla.eigh(K, M, eigvals_only=True)
    scale = np.max(np.diag(K) / np.diag(M))
    nonzero = w[w > 1e-9 * scale]
    res = coexact_spectrum(md, 6, homology=H)
    assert np.allclose(res.eigenvalues, nonzero[:6], rtol=1e-9)
    # kernel of the pencil: closed 1-cochains, b1 + rank d0
    assert len(w) - len(nonzero) == H.betti[1] + md.complex.n_vertices - 1


def test_residuals_and_orthogonality(torus3):
    md, H = torus3
    K, M = dense_pencil(md)
    res = coexact_spectrum(md, 5, homology=H, tol=1e-10)
    U = res.eigenforms
    Minv = np.linalg.inv(M)
    for lam, u in zip(res.eigenvalues, U.T):
        r = K @ u - lam * M @ u
        assert np.sqrt(r @ Minv @ r) <= 1e-8 * np.sqrt(u @ M @ u) * max(1.0, lam)
    assert np.allclose(U.T @ M @ U, np.eye(5), atol=1e-10)
    # eigenforms are coexact: orthogonal to exact and harmonic forms
    exact = md.d(0).toarray()
    assert np.abs(exact.T @ M @ U).max() < 1e-8
    assert np.abs(harmonic_basis(md, H).T @ M @ U).max() < 1e-8
    assert (res.residuals <= 1e-10).all()


def test_seed_independence(torus3):
    md, H = torus3
    a = coexact_spectrum(md, 4, homology=H, seed=1).eigenvalues
    b = coexact_spectrum(md, 4, homology=H, seed=99).eigenvalues
    assert np.allclose(a, b, rtol=2e-8)


def test_truncation_flag():
    from coexact.dec import assemble_metric
    from coexact.models import fixtures

    mesh = fixtures.boundary_of_4_simplex()
    md = assemble_metric(mesh.complex, mesh.vertices)
    res = coexact_spectrum(md, 50)
    K, M = dense_pencil(md)
    n_nonzero = int(np.sum(sla.eigh(K, M, eigvals_only=True) > 1e-9 * np.max(np.diag(K) / np.diag(M))))
    assert res.truncated and len(res.eigenvalues) == n_nonzero


def test_exact_spectrum_equals_down_pencil(torus3):
    md, _ = torus3
    D0 = md.d(0).toarray()
    M0, M1 = md.mass[0].toarray(), md.mass[1].toarray()
    # down Laplacian on 1-forms: M1 d0 M0^-1 d0^T M1 against M1
    down = M1 @ D0 @ np.linalg.solve(M0, D0.T @ M1)
    w = sla.eigh(down, M1, eigvals_only=True)
    smallest_down = w[w > 1e-9 * w.max()].min()
    lam0 = exact_spectrum(md, 1).eigenvalues[0]
    assert np.isclose(lam0, smallest_down, rtol=1e-8)


def test_sup_l2_ratio(torus3):
    md, H = torus3
    dx = coordinate_form(md, 1)
    assert np.isclose(sup_l2_ratio(md, dx), 1.0)
    u = coexact_spectrum(md, 1, homology=H).eigenforms[:, 0]
    assert np.isclose(sup_l2_ratio(md, u), sup_l2_ratio(md, -3.5 * u))
    assert sup_l2_ratio(md, u) >= 1.0 - 1e-12
    with pytest.raises(ValueError):
        sup_l2_ratio(md, np.zeros_like(dx))


def test_invalid_count(torus3):
    with pytest.raises(ValueError):
        coexact_spectrum(torus3[0], 0)
