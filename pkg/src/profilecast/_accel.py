"""Backend selection for the numeric kernels.

Numba is used when importable unless ``PROFILECAST_NO_NUMBA`` is set to a
truthy value, in which case every kernel dispatches to its pure-numpy twin.
The flag is read once at import time.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("PROFILECAST_NO_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("disabled by PROFILECAST_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        # bare @njit and @njit(...) both return the function untouched
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrapper(f):
            return f

        return wrapper


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
