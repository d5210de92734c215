"""Kernel backend selection.

Hot kernels are compiled with numba by default. Setting the environment
variable ``LAGAT_NO_NUMBA=1`` (or a failed numba import) selects a pure-numpy
interpretation of the *same* functions, so both backends are semantically
identical by construction.
"""

import os

NUMBA_ENABLED = os.environ.get("LAGAT_NO_NUMBA", "0") != "1"

if NUMBA_ENABLED:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    def jit(func):
        return _njit(cache=True)(func)
else:
    def jit(func):
        return func


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
