"""Kernel selection: the compiled ``_core`` extension when importable, else
the numpy fallback.  Set ``TANKSEP_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pycore

if os.environ.get("TANKSEP_PURE_PYTHON", "") not in ("", "0"):
    kernels = _pycore
    COMPILED = False
else:
    try:
        from . import _core as kernels
        COMPILED = True
    except ImportError:  # extension not built
        kernels = _pycore
        COMPILED = False

NAME = "cython" if COMPILED else "python"

__all__ = ["kernels", "COMPILED", "NAME"]
