"""Kernel backend selection.

CURLAMR_BACKEND=numpy forces the pure-numpy kernels, CURLAMR_BACKEND=numba
forces the compiled ones; unset (or "auto") prefers numba when it imports.
CURLAMR_THREADS caps numba's thread count.  Both are read once at import.
"""

import os

_choice = os.environ.get("CURLAMR_BACKEND", "auto").strip().lower()

if _choice in ("numpy", "np"):
    from . import _kernels_numpy as kernels
elif _choice == "numba":
    from . import _kernels_numba as kernels
elif _choice in ("auto", ""):
    try:
        from . import _kernels_numba as kernels
    except ImportError:
        from . import _kernels_numpy as kernels
else:
    raise ValueError(f"CURLAMR_BACKEND must be numpy|numba|auto, got {_choice!r}")

if kernels.NAME == "numba":
    _threads = os.environ.get("CURLAMR_THREADS")
    if _threads:
        import numba

        numba.set_num_threads(max(1, int(_threads)))


def backend_name():
    return kernels.NAME
