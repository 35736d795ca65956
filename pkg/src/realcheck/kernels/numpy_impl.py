"""Pure-numpy kernels, vectorized over the leading (record) axis.

The loops that remain run over the small matrix dimension only. This module is
also the reference path the simulator uses, so its output does not depend on
which backend is active.
"""
import math

import numpy as np

# pivots at or below this fraction of the largest diagonal entry count as failure
PIVOT_RTOL = 1e-14

_FPMIN = 1e-300
_GAMMA_EPS = 1e-16
_GAMMA_MAXITER = 2000

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def chol_batch(a, rel_tol=PIVOT_RTOL):
    """Lower Cholesky factors of a stack of symmetric matrices.

    Returns ``(L, ok)``; ``ok[n]`` is False when a pivot of matrix ``n`` fell
    at or below ``rel_tol * max|diag|`` (its ``L`` is then meaningless).
    """
    a = np.asarray(a, dtype=np.float64)
    n, d, _ = a.shape
    L = np.zeros_like(a)
    ok = np.ones(n, dtype=bool)
    scale = np.max(np.abs(np.diagonal(a, axis1=1, axis2=2)), axis=1) if d else np.zeros(n)
    for j in range(d):
        s = a[:, j, j].copy()
        for k in range(j):
            s -= L[:, j, k] * L[:, j, k]
        bad = ~(s > rel_tol * scale)
        ok &= ~bad
        ljj = np.sqrt(np.where(bad, 1.0, s))
        L[:, j, j] = ljj
        for i in range(j + 1, d):
            t = a[:, i, j].copy()
            for k in range(j):
                t -= L[:, i, k] * L[:, j, k]
            L[:, i, j] = t / ljj
    return L, ok


def forward_solve(L, r):
    """Solve ``L z = r`` for every right-hand side; ``r`` has shape (N, M, d)."""
    L = np.asarray(L, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    d = L.shape[-1]
    z = np.empty_like(r)
    for i in range(d):
        t = r[..., i].copy()
        for k in range(i):
            t -= L[:, i, k][:, None] * z[..., k]
        z[..., i] = t / L[:, i, i][:, None]
    return z


def mahalanobis_batch(L, r):
    """Squared norms of ``L^{-1} r`` over the last axis, shape (N, M)."""
    z = forward_solve(L, r)
    out = np.zeros(z.shape[:-1])
    for i in range(z.shape[-1]):
        out += z[..., i] * z[..., i]
    return out


def jacobi_eigh_batch(a, rel_tol=1e-12, max_sweeps=100):
    """Cyclic Jacobi eigen-decomposition of a stack of symmetric matrices.

    Returns ``(w, V, ok)`` with eigenvalues descending, eigenvectors as
    columns normalized so the largest-magnitude entry is positive, and
    ``ok`` False where the sweep cap was hit before convergence.
    """
    A = np.array(a, dtype=np.float64, copy=True)
    n, d, _ = A.shape
    V = np.broadcast_to(np.eye(d), (n, d, d)).copy()
    fro = np.sqrt(np.sum(A * A, axis=(1, 2)))
    offmask = ~np.eye(d, dtype=bool)
    done = np.zeros(n, dtype=bool)
    for _ in range(max_sweeps + 1):
        off = np.sqrt(np.sum(np.where(offmask, A * A, 0.0), axis=(1, 2)))
        done = off <= rel_tol * fro
        if done.all():
            break
        active = ~done
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[:, p, q]
                rot = active & (apq != 0.0)
                if not rot.any():
                    continue
                safe = np.where(rot, apq, 1.0)
                theta = (A[:, q, q] - A[:, p, p]) / (2.0 * safe)
                t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                c = np.where(rot, 1.0 / np.sqrt(t * t + 1.0), 1.0)
                s = np.where(rot, t * c, 0.0)
                cc = c[:, None]
                ss = s[:, None]
                colp = A[:, :, p].copy()
                colq = A[:, :, q].copy()
                A[:, :, p] = cc * colp - ss * colq
                A[:, :, q] = ss * colp + cc * colq
                rowp = A[:, p, :].copy()
                rowq = A[:, q, :].copy()
                A[:, p, :] = cc * rowp - ss * rowq
                A[:, q, :] = ss * rowp + cc * rowq
                A[rot, p, q] = 0.0
                A[rot, q, p] = 0.0
                vp = V[:, :, p].copy()
                vq = V[:, :, q].copy()
                V[:, :, p] = cc * vp - ss * vq
                V[:, :, q] = ss * vp + cc * vq
    w = np.diagonal(A, axis1=1, axis2=2).copy()
    order = np.argsort(-w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    V = np.take_along_axis(V, order[:, None, :], axis=2)
    idx = np.argmax(np.abs(V), axis=1)
    lead = np.take_along_axis(V, idx[:, None, :], axis=1)[:, 0, :]
    V = V * np.where(lead < 0.0, -1.0, 1.0)[:, None, :]
    return w, V, done


def _lgamma(a):
    a = np.asarray(a, dtype=np.float64)
    uniq, inv = np.unique(a, return_inverse=True)
    vals = np.array([math.lgamma(u) for u in uniq])
    return vals[inv].reshape(a.shape)


def gammainc_lower(a, x):
    """Regularized lower incomplete gamma ``P(a, x)`` elementwise (a > 0).

    Series for ``x < a + 1``, Lentz continued fraction for the upper tail
    otherwise. Non-convergence yields NaN.
    """
    a, x = np.broadcast_arrays(np.asarray(a, dtype=np.float64), np.asarray(x, dtype=np.float64))
    a = a.ravel()
    x = x.ravel()
    out = np.zeros(a.shape)
    pos = x > 0.0
    if not pos.any():
        return out.reshape(np.shape(a))
    xp = np.where(pos, x, 1.0)
    lnpre = -xp + a * np.log(xp) - _lgamma(a)

    ser = pos & (x < a + 1.0)
    if ser.any():
        aa, xx = a[ser], x[ser]
        ap = aa.copy()
        term = 1.0 / aa
        total = term.copy()
        live = np.ones(aa.shape, dtype=bool)
        for _ in range(_GAMMA_MAXITER):
            ap += 1.0
            term = np.where(live, term * xx / ap, 0.0)
            total += term
            live &= np.abs(term) >= np.abs(total) * _GAMMA_EPS
            if not live.any():
                break
        res = total * np.exp(lnpre[ser])
        res[live] = np.nan
        out[ser] = res

    cf = pos & ~ser
    if cf.any():
        aa, xx = a[cf], x[cf]
        b = xx + 1.0 - aa
        c = np.full(aa.shape, 1.0 / _FPMIN)
        dd = 1.0 / b
        h = dd.copy()
        live = np.ones(aa.shape, dtype=bool)
        for i in range(1, _GAMMA_MAXITER):
            an = -i * (i - aa)
            b = b + 2.0
            dd = an * dd + b
            dd = np.where(np.abs(dd) < _FPMIN, _FPMIN, dd)
            c = b + an / c
            c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
            dd = 1.0 / dd
            delta = np.where(live, dd * c, 1.0)
            h *= delta
            live &= np.abs(delta - 1.0) >= _GAMMA_EPS
            if not live.any():
                break
        res = 1.0 - np.exp(lnpre[cf]) * h
        res[live] = np.nan
        out[cf] = res
    return out


def sample_moments(samples):
    """Mean and unbiased (divisor K-1) covariance of each (K, d) sample."""
    s = np.asarray(samples, dtype=np.float64)
    k = s.shape[1]
    mean = s.mean(axis=1)
    c = s - mean[:, None, :]
    cov = np.einsum("nki,nkj->nij", c, c) / (k - 1)
    return mean, cov


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def splitmix_words(keys, n):
    """First ``n`` SplitMix64 outputs for each starting state in ``keys``.

    Row ``i`` equals the sequence a SplitMix64 generator seeded with
    ``keys[i]`` would produce, so any word is addressable without state.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    steps = np.arange(1, n + 1, dtype=np.uint64) * _GOLDEN
    with np.errstate(over="ignore"):
        return _mix64(keys[:, None] + steps[None, :])


def class_scores(probs):
    """Per-record uncertainty scores for a (N, K, C) stack of softmax samples.

    Returns ``(one_minus_max, entropy, win_var, mi, win_var_per_sample, pred)``.
    The variance-based entries are NaN when K == 1; ``mi`` is not clamped.
    """
    p = np.asarray(probs, dtype=np.float64)
    n, k, _ = p.shape
    out = [np.empty(n) for _ in range(5)]
    pred = np.empty(n, dtype=np.int64)
    step = 4096
    for lo in range(0, n, step):
        blk = p[lo:lo + step]
        m = blk.mean(axis=1)
        w = np.argmax(m, axis=1)
        hm = -np.sum(np.where(m > 0.0, m * np.log(np.where(m > 0.0, m, 1.0)), 0.0), axis=1)
        hk = -np.sum(np.where(blk > 0.0, blk * np.log(np.where(blk > 0.0, blk, 1.0)), 0.0), axis=2)
        out[0][lo:lo + step] = 1.0 - np.max(m, axis=1)
        out[1][lo:lo + step] = hm
        pred[lo:lo + step] = w
        if k > 1:
            pw = np.take_along_axis(blk, w[:, None, None], axis=2)[:, :, 0]
            out[2][lo:lo + step] = pw.var(axis=1, ddof=1)
            out[3][lo:lo + step] = hm - hk.mean(axis=1)
            out[4][lo:lo + step] = blk.max(axis=2).var(axis=1, ddof=1)
        else:
            for j in (2, 3, 4):
                out[j][lo:lo + step] = np.nan
    return (*out, pred)
