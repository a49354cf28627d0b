"""Backend selection for the hot stability-classification kernel.

The compiled extension is used when it was built; set ``CSSPLIT_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _kernels_py

STABLE, UNSTABLE, BOUNDARY = _kernels_py.STABLE, _kernels_py.UNSTABLE, _kernels_py.BOUNDARY

python_classify_points = _kernels_py.classify_points

try:
    from ._kernels import classify_points as compiled_classify_points
except ImportError:  # extension not built
    compiled_classify_points = None

if compiled_classify_points is not None and not os.environ.get("CSSPLIT_PURE_PYTHON"):
    classify_points = compiled_classify_points
    BACKEND = "cython"
else:
    classify_points = python_classify_points
    BACKEND = "python"

__all__ = ["classify_points", "BACKEND", "STABLE", "UNSTABLE", "BOUNDARY"]
