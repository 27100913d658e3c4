"""Backend selection for the compiled kernels.

Setting ``AJCIR_BACKEND=numpy`` (or ``AJCIR_DISABLE_NUMBA=1``) before import
switches every hot loop to its vectorised numpy fallback. Both paths run
the same arithmetic and draw the same random numbers.
"""
import os
import warnings

_requested = os.environ.get("AJCIR_BACKEND", "numba").strip().lower()
if os.environ.get("AJCIR_DISABLE_NUMBA", "").strip() not in ("", "0"):
    _requested = "numpy"

USE_NUMBA = False
if _requested != "numpy":
    try:
        import numba
        from numba.core.errors import NumbaWarning

        # the bundled TBB is too old here; omp/workqueue are fine
        warnings.filterwarnings("ignore", category=NumbaWarning,
                                message=".*TBB.*")
        USE_NUMBA = True
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

BACKEND = "numba" if USE_NUMBA else "numpy"


def jit(*args, **kwargs):
    """``numba.njit`` with caching, or the identity when numba is off."""
    if not USE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    opts = {"cache": True}
    opts.update(kwargs)
    if len(args) == 1 and callable(args[0]):
        return numba.njit(**opts)(args[0])
    return numba.njit(*args, **opts)


def set_threads(n):
    """Set the kernel thread count; returns the count actually used."""
    if not USE_NUMBA or n is None:
        return 1
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def get_threads():
    if not USE_NUMBA:
        return 1
    return numba.get_num_threads()
