"""Small named complexes used in tests and examples."""

import itertools

import numpy as np

from ..complex import Mesh, build_complex

# six-vertex projective plane
RP2_TRIANGLES = [
    (0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 5, 1),
    (1, 2, 4), (2, 3, 5), (3, 4, 1), (4, 5, 2), (5, 1, 3),
]


def single_tetrahedron():
    coords = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    return Mesh(build_complex(4, [(0, 1, 2, 3)]), coords)


def boundary_of_4_simplex():
    """Five tetrahedra bounding a 4-simplex: a triangulated 3-sphere."""
    tets = list(itertools.combinations(range(5), 4))
    # regular 4-simplex in R^4, centered and normalized onto the unit sphere
    coords = np.eye(5)[:, :5] - 0.2
    basis = np.linalg.svd(coords)[2][:4].T
    pts = coords @ basis
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return Mesh(build_complex(5, tets), pts)


def octahedron():
    coords = np.array([[1.0, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]])
    tris = []
    for top in (4, 5):
        for i in range(4):
            tris.append((i, (i + 1) % 4, top))
    return Mesh(build_complex(6, tris), coords)


def octahedron_equator():
    """Vertex loop +x, +y, -x, -y around the equator."""
    return [0, 1, 2, 3, 0]


def projective_plane():
    return Mesh(build_complex(6, RP2_TRIANGLES))


def projective_plane_core_loop():
    """A vertex loop whose class has order two."""
    return [0, 1, 3, 0]


def torus_surface(n=3):
    """Triangulated 2-torus on an n-by-n grid."""
    idx = lambda i, j: (i % n) * n + (j % n)
    tris = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris += [(a, b, c), (a, c, d)]
    return Mesh(build_complex(n * n, tris))


def three_cofaces():
    """Three tetrahedra sharing a triangle: not a manifold."""
    return [(0, 1, 2, 3), (0, 1, 2, 4), (0, 1, 2, 5)]
