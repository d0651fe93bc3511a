"""Backend selection for the hot kernels.

The shooting integrator in :mod:`blowuplab.radial` is compiled with numba
when it is available.  Set ``BLOWUPLAB_BACKEND=numpy`` to force the plain
Python/numpy path (useful for debugging and for the benchmark comparison),
``BLOWUPLAB_BACKEND=numba`` to insist on the compiled path.

``BLOWUPLAB_THREADS`` caps the worker count used by multistart searches.
"""

import os

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on numba-free installs
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        """Fallback decorator: leaves the function as plain Python."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def use_numba() -> bool:
    """True when compiled kernels should be used for this call."""
    choice = os.environ.get("BLOWUPLAB_BACKEND", "").strip().lower()
    if choice == "numpy":
        return False
    if choice == "numba":
        if not HAS_NUMBA:
            raise RuntimeError(
                "BLOWUPLAB_BACKEND=numba requested but numba is not importable"
            )
        return True
    return HAS_NUMBA


def backend_name() -> str:
    return "numba" if use_numba() else "numpy"


def worker_count() -> int:
    """Worker cap from BLOWUPLAB_THREADS (default 1, minimum 1)."""
    raw = os.environ.get("BLOWUPLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
