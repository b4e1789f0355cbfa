"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

Set ``LIOUFLOW_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
rk4_affine = _kernels_py.rk4_affine

if os.environ.get("LIOUFLOW_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        rk4_affine = _ckernels.rk4_affine
        BACKEND = "cython"
