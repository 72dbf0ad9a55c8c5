"""Coexact 1-form spectra, filling areas and flow curves on tetrahedral meshes."""

__version__ = "0.1.0"
