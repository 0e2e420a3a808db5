"""Backend selection for the hot kernels.

The compiled extension is used when it imports cleanly; otherwise the numpy
fallback is used. Setting ``MAXENTSD_PURE_PYTHON=1`` forces the fallback.
``BACKEND`` names the active implementation.
"""
import os

from . import _kernels_py

if os.environ.get("MAXENTSD_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

log_partition = _impl.log_partition
tilted_moments = _impl.tilted_moments

__all__ = ["BACKEND", "log_partition", "tilted_moments"]
