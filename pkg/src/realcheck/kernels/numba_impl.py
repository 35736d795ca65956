"""numba-compiled kernels; same contracts as :mod:`.numpy_impl`."""
import math

import numpy as np
from numba import njit, prange

from .._accel import numba_default, numba_parallel
from .numpy_impl import PIVOT_RTOL, _lgamma

_FPMIN = 1e-300
_GAMMA_EPS = 1e-16
_GAMMA_MAXITER = 2000


@njit(**numba_parallel)
def _chol(a, rel_tol):
    n, d, _ = a.shape
    L = np.zeros_like(a)
    ok = np.ones(n, dtype=np.bool_)
    for m in prange(n):
        scale = 0.0
        for j in range(d):
            scale = max(scale, abs(a[m, j, j]))
        for j in range(d):
            s = a[m, j, j]
            for k in range(j):
                s -= L[m, j, k] * L[m, j, k]
            if not (s > rel_tol * scale):
                ok[m] = False
                s = 1.0
            ljj = math.sqrt(s)
            L[m, j, j] = ljj
            for i in range(j + 1, d):
                t = a[m, i, j]
                for k in range(j):
                    t -= L[m, i, k] * L[m, j, k]
                L[m, i, j] = t / ljj
    return L, ok


def chol_batch(a, rel_tol=PIVOT_RTOL):
    return _chol(np.ascontiguousarray(a, dtype=np.float64), rel_tol)


@njit(**numba_parallel)
def _forward(L, r):
    n, mm, d = r.shape
    z = np.empty_like(r)
    for m in prange(n):
        for j in range(mm):
            for i in range(d):
                t = r[m, j, i]
                for k in range(i):
                    t -= L[m, i, k] * z[m, j, k]
                z[m, j, i] = t / L[m, i, i]
    return z


def forward_solve(L, r):
    return _forward(np.ascontiguousarray(L, dtype=np.float64), np.ascontiguousarray(r, dtype=np.float64))


@njit(**numba_parallel)
def _maha(L, r):
    n, mm, d = r.shape
    out = np.empty((n, mm))
    for m in prange(n):
        z = np.empty(d)
        for j in range(mm):
            acc = 0.0
            for i in range(d):
                t = r[m, j, i]
                for k in range(i):
                    t -= L[m, i, k] * z[k]
                z[i] = t / L[m, i, i]
                acc += z[i] * z[i]
            out[m, j] = acc
    return out


def mahalanobis_batch(L, r):
    return _maha(np.ascontiguousarray(L, dtype=np.float64), np.ascontiguousarray(r, dtype=np.float64))


@njit(**numba_parallel)
def _jacobi(a, rel_tol, max_sweeps):
    n, d, _ = a.shape
    W = np.empty((n, d))
    VV = np.empty((n, d, d))
    ok = np.zeros(n, dtype=np.bool_)
    for m in prange(n):
        A = a[m].copy()
        V = np.eye(d)
        fro = 0.0
        for i in range(d):
            for j in range(d):
                fro += A[i, j] * A[i, j]
        fro = math.sqrt(fro)
        for _ in range(max_sweeps + 1):
            off = 0.0
            for i in range(d):
                for j in range(d):
                    if i != j:
                        off += A[i, j] * A[i, j]
            if math.sqrt(off) <= rel_tol * fro:
                ok[m] = True
                break
            for p in range(d - 1):
                for q in range(p + 1, d):
                    apq = A[p, q]
                    if apq == 0.0:
                        continue
                    theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                    sgn = 1.0 if theta >= 0.0 else -1.0
                    t = sgn / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    c = 1.0 / math.sqrt(t * t + 1.0)
                    s = t * c
                    for k in range(d):
                        akp = A[k, p]
                        akq = A[k, q]
                        A[k, p] = c * akp - s * akq
                        A[k, q] = s * akp + c * akq
                    for k in range(d):
                        apk = A[p, k]
                        aqk = A[q, k]
                        A[p, k] = c * apk - s * aqk
                        A[q, k] = s * apk + c * aqk
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    for k in range(d):
                        vp = V[k, p]
                        vq = V[k, q]
                        V[k, p] = c * vp - s * vq
                        V[k, q] = s * vp + c * vq
        w = np.empty(d)
        for i in range(d):
            w[i] = A[i, i]
        order = np.argsort(-w, kind="mergesort")
        for jj in range(d):
            src = order[jj]
            W[m, jj] = w[src]
            big = 0
            for i in range(1, d):
                if abs(V[i, src]) > abs(V[big, src]):
                    big = i
            sign = -1.0 if V[big, src] < 0.0 else 1.0
            for i in range(d):
                VV[m, i, jj] = sign * V[i, src]
    return W, VV, ok


def jacobi_eigh_batch(a, rel_tol=1e-12, max_sweeps=100):
    return _jacobi(np.ascontiguousarray(a, dtype=np.float64), rel_tol, max_sweeps)


@njit(**numba_default)
def _gammainc_one(a, x, lgam):
    if x <= 0.0:
        return 0.0
    lnpre = -x + a * math.log(x) - lgam
    if x < a + 1.0:
        ap = a
        term = 1.0 / a
        total = term
        for _ in range(_GAMMA_MAXITER):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _GAMMA_EPS:
                return total * math.exp(lnpre)
        return np.nan
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    dd = 1.0 / b
    h = dd
    for i in range(1, _GAMMA_MAXITER):
        an = -i * (i - a)
        b += 2.0
        dd = an * dd + b
        if abs(dd) < _FPMIN:
            dd = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        dd = 1.0 / dd
        delta = dd * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            return 1.0 - math.exp(lnpre) * h
    return np.nan


@njit(**numba_parallel)
def _gammainc(a, x, lgam):
    out = np.empty(a.shape[0])
    for i in prange(a.shape[0]):
        out[i] = _gammainc_one(a[i], x[i], lgam[i])
    return out


def gammainc_lower(a, x):
    a, x = np.broadcast_arrays(np.asarray(a, dtype=np.float64), np.asarray(x, dtype=np.float64))
    shape = a.shape
    a = np.ascontiguousarray(a.ravel())
    x = np.ascontiguousarray(x.ravel())
    return _gammainc(a, x, _lgamma(a)).reshape(shape)


@njit(**numba_parallel)
def _moments(s):
    n, k, d = s.shape
    mean = np.zeros((n, d))
    cov = np.zeros((n, d, d))
    for m in prange(n):
        for j in range(k):
            for i in range(d):
                mean[m, i] += s[m, j, i]
        for i in range(d):
            mean[m, i] /= k
        for j in range(k):
            for i in range(d):
                ci = s[m, j, i] - mean[m, i]
                for l in range(i + 1):
                    cov[m, i, l] += ci * (s[m, j, l] - mean[m, l])
        for i in range(d):
            for l in range(i + 1):
                cov[m, i, l] /= k - 1
                cov[m, l, i] = cov[m, i, l]
    return mean, cov


def sample_moments(samples):
    return _moments(np.ascontiguousarray(samples, dtype=np.float64))


@njit(**numba_parallel)
def _splitmix(keys, n):
    out = np.empty((keys.shape[0], n), dtype=np.uint64)
    golden = np.uint64(0x9E3779B97F4A7C15)
    m1 = np.uint64(0xBF58476D1CE4E5B9)
    m2 = np.uint64(0x94D049BB133111EB)
    for i in prange(keys.shape[0]):
        state = keys[i]
        for j in range(n):
            state = state + golden
            z = state
            z = (z ^ (z >> np.uint64(30))) * m1
            z = (z ^ (z >> np.uint64(27))) * m2
            out[i, j] = z ^ (z >> np.uint64(31))
    return out


def splitmix_words(keys, n):
    return _splitmix(np.ascontiguousarray(keys, dtype=np.uint64), int(n))


@njit(**numba_parallel)
def _scores(p):
    n, k, c = p.shape
    umax = np.empty(n)
    ent = np.empty(n)
    wvar = np.empty(n)
    mi = np.empty(n)
    wvar_ps = np.empty(n)
    pred = np.empty(n, dtype=np.int64)
    for r in prange(n):
        m = np.zeros(c)
        hk = 0.0
        for j in range(k):
            h = 0.0
            for i in range(c):
                v = p[r, j, i]
                m[i] += v
                if v > 0.0:
                    h -= v * math.log(v)
            hk += h
        best = 0
        for i in range(c):
            m[i] /= k
            if m[i] > m[best]:
                best = i
        hm = 0.0
        for i in range(c):
            if m[i] > 0.0:
                hm -= m[i] * math.log(m[i])
        umax[r] = 1.0 - m[best]
        ent[r] = hm
        pred[r] = best
        if k > 1:
            mu = 0.0
            mu_ps = 0.0
            for j in range(k):
                mu += p[r, j, best]
                top = p[r, j, 0]
                for i in range(1, c):
                    top = max(top, p[r, j, i])
                mu_ps += top
            mu /= k
            mu_ps /= k
            ss = 0.0
            ss_ps = 0.0
            for j in range(k):
                dv = p[r, j, best] - mu
                ss += dv * dv
                top = p[r, j, 0]
                for i in range(1, c):
                    top = max(top, p[r, j, i])
                dv = top - mu_ps
                ss_ps += dv * dv
            wvar[r] = ss / (k - 1)
            wvar_ps[r] = ss_ps / (k - 1)
            mi[r] = hm - hk / k
        else:
            wvar[r] = np.nan
            wvar_ps[r] = np.nan
            mi[r] = np.nan
    return umax, ent, wvar, mi, wvar_ps, pred


def class_scores(probs):
    return _scores(np.ascontiguousarray(probs, dtype=np.float64))
