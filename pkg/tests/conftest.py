import functools

import pytest
from hypothesis import settings

from coexact.homology import homology_basis
from coexact.models.torus import torus_mesh

settings.register_profile("coexact", deadline=None, max_examples=40)
settings.load_profile("coexact")


@functools.lru_cache(maxsize=None)
def torus_with_homology(N):
    md = torus_mesh(N)
    return md, homology_basis(md.complex)


@pytest.fixture(scope="session")
def torus3():
    return torus_with_homology(3)


@pytest.fixture(scope="session")
def torus4():
    return torus_with_homology(4)
