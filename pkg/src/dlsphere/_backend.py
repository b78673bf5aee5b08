"""Select the kernel backend.

Numba-compiled kernels are used when numba imports cleanly and the
environment variable ``DLSPHERE_DISABLE_NUMBA`` is unset or one of
``0/false/no``. Anything else forces the pure-numpy path. The choice is made
once, at import time.
"""

import os

ENV_FLAG = "DLSPHERE_DISABLE_NUMBA"


def _flag_set(value):
    return value is not None and value.strip().lower() not in ("", "0", "false", "no")


try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _flag_set(os.environ.get(ENV_FLAG))


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
