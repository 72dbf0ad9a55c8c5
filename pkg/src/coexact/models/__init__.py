"""Model geometries: flat torus, Berger spheres, cusp-like spheres, small fixtures."""

from .berger import BergerModel, berger_mesh
from .cusp import CuspMeshSpec, CuspModel, cusp_mesh
from .torus import torus_mesh

MODELS = ("torus", "berger", "cusp")


def generate_mesh(model, resolution=None, *, epsilon=None):
    """Build a model mesh; returns ``(complex, metric)``.

    ``model`` is a name from ``MODELS`` or a model object. Resolutions are the
    grid size N for the torus, the even cube subdivision for Berger spheres
    and a ``CuspMeshSpec`` (or its sphere level) for the cusp.
    """
    if isinstance(model, BergerModel):
        model, epsilon = "berger", model.epsilon
    elif isinstance(model, CuspModel):
        model, epsilon = "cusp", model.epsilon
    if model == "torus":
        md = torus_mesh(8 if resolution is None else int(resolution))
    elif model == "berger":
        eps = 1.0 if epsilon is None else float(epsilon)
        md = berger_mesh(eps) if resolution is None else berger_mesh(eps, int(resolution))
    elif model == "cusp":
        eps = 0.1 if epsilon is None else float(epsilon)
        if isinstance(resolution, int):
            resolution = CuspMeshSpec(sphere_level=resolution)
        md = cusp_mesh(eps, resolution)
    else:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    return md.complex, md
