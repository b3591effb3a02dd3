"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
implementation.  ``FRAMEDISC_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("FRAMEDISC_PURE_PYTHON", "") not in ("", "0"):
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        kernels = _kernels_py

BACKEND = kernels.BACKEND

__all__ = ["kernels", "BACKEND", "_kernels_py"]
