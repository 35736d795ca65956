"""Batched numeric kernels with a numba path and a pure-numpy fallback.

Both implementations expose the same functions with the same signatures; the
one re-exported here is chosen once at import time (see ``realcheck._accel``).
"""
from .._accel import BACKEND, USE_NUMBA
from . import numpy_impl

if USE_NUMBA:
    from . import numba_impl as _impl
else:
    _impl = numpy_impl

KERNELS = (
    "chol_batch",
    "forward_solve",
    "mahalanobis_batch",
    "jacobi_eigh_batch",
    "gammainc_lower",
    "sample_moments",
    "splitmix_words",
    "class_scores",
)

chol_batch = _impl.chol_batch
forward_solve = _impl.forward_solve
mahalanobis_batch = _impl.mahalanobis_batch
jacobi_eigh_batch = _impl.jacobi_eigh_batch
gammainc_lower = _impl.gammainc_lower
sample_moments = _impl.sample_moments
splitmix_words = _impl.splitmix_words
class_scores = _impl.class_scores

__all__ = ["BACKEND", "numpy_impl", *KERNELS]
