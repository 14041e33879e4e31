"""Backend selection for the hot kernels.

Set ``ISDA_DISABLE_NUMBA=1`` to force the pure-numpy path. If numba cannot
be imported the numpy path is used automatically.
"""
import os

_disabled = os.environ.get("ISDA_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _disabled:
        raise ImportError("numba disabled by ISDA_DISABLE_NUMBA")
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        # bare @njit and @njit(...) both work
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def deco(fn):
            return fn

        return deco


BACKEND = "numba" if HAVE_NUMBA else "numpy"


def thread_cap():
    """Value of ``ISDA_THREADS`` as a positive int, or None when unset."""
    raw = os.environ.get("ISDA_THREADS", "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        return None
    return n if n > 0 else None


def configure_threads():
    n = thread_cap()
    if n is not None and HAVE_NUMBA:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    return n
