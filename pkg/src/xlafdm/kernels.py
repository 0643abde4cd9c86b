"""Kaczmarz kernel selection.

The compiled extension is used when it was built; setting XLAFDM_PURE_PYTHON=1
forces the NumPy fallback. ``BACKEND`` names the active implementation.
"""

import os

from . import _kaczmarz_py as python_kernels

try:
    if os.environ.get("XLAFDM_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python kernels requested")
    from . import _kaczmarz as compiled_kernels
except ImportError:
    compiled_kernels = None

if compiled_kernels is not None:
    kaczmarz_primal = compiled_kernels.kaczmarz_primal
    kaczmarz_dual = compiled_kernels.kaczmarz_dual
    BACKEND = "cython"
else:
    kaczmarz_primal = python_kernels.kaczmarz_primal
    kaczmarz_dual = python_kernels.kaczmarz_dual
    BACKEND = "python"
