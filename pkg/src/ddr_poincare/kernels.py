"""Hot-kernel dispatch: compiled extension if importable, numpy fallback otherwise.

Set DDR_PURE_PYTHON=1 to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
if os.environ.get("DDR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
else:
    _impl = _kernels_py

vandermonde = _impl.vandermonde
whitney_local = _impl.whitney_local
