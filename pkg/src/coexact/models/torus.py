"""Flat unit 3-torus on an N x N x N grid, six tetrahedra per cube."""

import itertools

import numpy as np

from ..complex import build_complex
from ..dec import assemble_metric

# Kuhn paths: each permutation of the axes walks from a cube corner to the opposite one
_PERMS = list(itertools.permutations(range(3)))


def torus_grid(N):
    """Tetrahedra (global ids) and unwrapped per-cell coordinates."""
    if N < 3:
        raise ValueError("the periodic grid needs N >= 3 to be a simplicial complex")
    tets, cells = [], []
    for i, j, k in itertools.product(range(N), repeat=3):
        base = np.array([i, j, k])
        for p in _PERMS:
            pts = [base.copy()]
            for ax in p:
                nxt = pts[-1].copy()
                nxt[ax] += 1
                pts.append(nxt)
            ids = [int(((q[0] % N) * N + q[1] % N) * N + q[2] % N) for q in pts]
            order = np.argsort(ids)
            tets.append(tuple(ids[o] for o in order))
            cells.append(np.array(pts, dtype=float)[order] / N)
    return tets, np.array(cells)


def torus_mesh(N, name=None):
    tets, cells = torus_grid(N)
    cx = build_complex(N ** 3, tets)
    return assemble_metric(cx, cell_coords=align_cells(cx, tets, cells), name=name or f"torus-{N}")


def align_cells(cx, tets, cells):
    """Reorder per-cell arrays from input order to the complex's tetrahedron order."""
    out = np.empty_like(cells)
    for t, c in zip(tets, cells):
        out[cx.index(t)] = c
    return out


def vertex_positions(N):
    g = np.arange(N) / N
    return np.array(list(itertools.product(g, g, g)))


def first_eigenvalue():
    """Smallest nonzero eigenvalue of the Hodge Laplacian on coexact 1-forms."""
    return 4 * np.pi ** 2
