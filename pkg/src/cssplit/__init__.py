"""Generalized BDF time stepping with consistent splitting for incompressible flow."""

from .stencil import SchemeSpec, StencilSet, make_stencils
from .splitting import SplitSet, make_split, certify_DC, certify_AC
from .stability import CharPoly, Verdict, roots_at, is_stable, region_scan
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = [
    "SchemeSpec",
    "StencilSet",
    "make_stencils",
    "SplitSet",
    "make_split",
    "certify_DC",
    "certify_AC",
    "CharPoly",
    "Verdict",
    "roots_at",
    "is_stable",
    "region_scan",
    "KERNEL_BACKEND",
    "__version__",
]
