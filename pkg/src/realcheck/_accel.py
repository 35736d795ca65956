"""Backend selection for the hot kernels.

``REALCHECK_BACKEND=numpy`` forces the pure-numpy path; the default is numba
when it imports. ``REALCHECK_THREADS`` caps numba's thread pool.
"""
import os

_requested = os.environ.get("REALCHECK_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"REALCHECK_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _requested == "numba"
BACKEND = "numba" if USE_NUMBA else "numpy"


def thread_cap():
    raw = os.environ.get("REALCHECK_THREADS", "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        return None
    return n if n > 0 else None


def numba_threads():
    if not HAVE_NUMBA:
        return 1
    cap = thread_cap()
    avail = numba.config.NUMBA_NUM_THREADS
    return avail if cap is None else max(1, min(cap, avail))


numba_default = {
    "nogil": True,
    "cache": True,
    "fastmath": False,
    "error_model": "numpy",
    "boundscheck": False,
}
numba_parallel = dict(numba_default, parallel=numba_threads() > 1)

if HAVE_NUMBA and numba_threads() > 1:
    numba.set_num_threads(numba_threads())
