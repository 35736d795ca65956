"""Counter-based SplitMix64 streams.

Every random quantity is addressed by ``(seed, record index, purpose)``, so a
record's draws do not depend on how many records are generated, in which
order, or in which chunk. Only integer mixing and IEEE-exact arithmetic are
used up to the uniform stage; normals use Box-Muller.
"""
import numpy as np

from . import kernels
from .kernels.numpy_impl import _mix64

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_PURPOSE = np.uint64(0xD1B54A32D192ED03)
_TWO_PI = 2.0 * np.pi


def stream_keys(seed, index, purpose):
    """SplitMix64 starting states for records ``index`` under ``purpose``."""
    index = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN * (index + np.uint64(1)))
        return _mix64(base ^ (_PURPOSE * np.uint64(purpose + 1)))


def uniforms(seed, index, purpose, n):
    """(len(index), n) doubles in the open interval (0, 1)."""
    w = kernels.splitmix_words(stream_keys(seed, index, purpose), n)
    return ((w >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals(seed, index, purpose, n):
    """(len(index), n) standard normals via Box-Muller."""
    pairs = (n + 1) // 2
    u = uniforms(seed, index, purpose, 2 * pairs)
    r = np.sqrt(-2.0 * np.log(u[:, 0::2]))
    ang = _TWO_PI * u[:, 1::2]
    z = np.empty((u.shape[0], 2 * pairs))
    z[:, 0::2] = r * np.cos(ang)
    z[:, 1::2] = r * np.sin(ang)
    return z[:, :n]


def gammas(seed, index, purpose, shape, max_rounds=64):
    """Gamma(shape, 1) draws (shape >= 1) by Marsaglia-Tsang rejection.

    Round ``r`` of record ``i`` reads its own stream ``purpose + r``; callers
    must leave ``max_rounds`` purposes free above ``purpose``.
    """
    if shape < 1.0:
        raise ValueError("shape must be >= 1")
    index = np.asarray(index)
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.full(index.shape[0], np.nan)
    todo = np.arange(index.shape[0])
    for r in range(max_rounds):
        if todo.size == 0:
            break
        z = normals(seed, index[todo], purpose + r, 1)[:, 0]
        u = uniforms(seed, index[todo], purpose + r, 3)[:, 2]
        v = (1.0 + c * z) ** 3
        good = v > 0.0
        vs = np.where(good, v, 1.0)
        accept = good & (np.log(u) < 0.5 * z * z + d - d * vs + d * np.log(vs))
        out[todo[accept]] = d * vs[accept]
        todo = todo[~accept]
    if todo.size:
        raise RuntimeError("gamma sampler exceeded its round budget")
    return out
