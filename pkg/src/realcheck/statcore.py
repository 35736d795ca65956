"""Special functions, small-matrix linear algebra and goodness-of-fit testing.

Scalar entry points (``cholesky``, ``mahalanobis_sq``, ``eigen_sym`` ...) work on
one matrix or vector; the ``*_batch`` helpers run the same computation over a
stack of records through :mod:`realcheck.kernels`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .errors import (
    ConvergenceFailure,
    DegenerateSample,
    DimensionMismatch,
    EmptySample,
    InvalidInput,
    NotPositiveDefinite,
    TooFewSamples,
)

SYMMETRY_RTOL = 1e-9
# diagonal jitter, as a fraction of trace/d, tried in order when Cholesky fails
JITTER_STEPS = (1e-12, 1e-10, 1e-8, 1e-6)
JACOBI_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 100
KS_TERM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GaussianSummary:
    mean: np.ndarray
    cov: np.ndarray
    count: int = 0

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GaussianSummary):
            return NotImplemented
        return (
            self.count == other.count
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.cov, other.cov)
        )


@dataclass(frozen=True)
class GofResult:
    statistic: float
    p_value: float
    n: int


def _as_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InvalidInput(f"expected a nonempty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInput("matrix has non-finite entries")
    scale = np.max(np.abs(m))
    if np.max(np.abs(m - m.T)) > SYMMETRY_RTOL * scale:
        raise InvalidInput("matrix is not symmetric")
    return m


def cholesky(m) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == m``.

    Raises NotPositiveDefinite when a pivot is not safely positive.
    """
    m = _as_square(m)
    L, ok = kernels.chol_batch(m[None])
    if not ok[0]:
        raise NotPositiveDefinite("matrix is not positive definite")
    return L[0]


def mahalanobis_sq(s: GaussianSummary, y) -> float:
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (s.dim,):
        raise DimensionMismatch(f"vector of shape {y.shape} against a {s.dim}-dim summary")
    L = cholesky(s.cov)
    r = (y - s.mean)[None, None, :]
    return float(kernels.mahalanobis_batch(L[None], r)[0, 0])


def chol_with_jitter(cov: np.ndarray):
    """Cholesky of a covariance stack with escalating diagonal jitter.

    Returns ``(cov_used, L, ok, jitter)`` where ``jitter[n]`` is the relative
    step that made matrix ``n`` factorizable (0 when none was needed) and
    ``ok`` is False for matrices that failed even at the largest step.
    """
    cov = np.array(cov, dtype=np.float64, copy=True)
    L, ok = kernels.chol_batch(cov)
    jitter = np.zeros(cov.shape[0])
    if ok.all():
        return cov, L, ok, jitter
    d = cov.shape[-1]
    level = np.trace(cov, axis1=1, axis2=2) / d
    for eps in JITTER_STEPS:
        bad = np.flatnonzero(~ok & (level > 0.0))
        if bad.size == 0:
            break
        trial = cov[bad] + (eps * level[bad])[:, None, None] * np.eye(d)
        Lt, okt = kernels.chol_batch(trial)
        fixed = bad[okt]
        cov[fixed] = trial[okt]
        L[fixed] = Lt[okt]
        ok[fixed] = True
        jitter[fixed] = eps
    return cov, L, ok, jitter


def summarize_batch(samples):
    """Sample mean/covariance of a (N, K, d) stack plus Cholesky factors.

    Returns ``(mean, cov, L, ok, jitter)``; see :func:`chol_with_jitter`.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n, k, d = samples.shape
    if k < d + 2:
        raise TooFewSamples(f"need K >= d + 2 = {d + 2} samples, got {k}")
    mean, cov = kernels.sample_moments(samples)
    cov, L, ok, jitter = chol_with_jitter(cov)
    return mean, cov, L, ok, jitter


def sample_summary(samples) -> GaussianSummary:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise InvalidInput("samples must be a K x d matrix")
    mean, cov, _, ok, _ = summarize_batch(samples[None])
    if not ok[0]:
        raise DegenerateSample("sample covariance is singular even after jitter")
    return GaussianSummary(mean=mean[0], cov=cov[0], count=samples.shape[0])


def chi2_cdf(d, x):
    """CDF of the chi-squared law with ``d`` degrees of freedom.

    Accepts scalars or arrays for ``x``; returns the same shape.
    """
    if d <= 0:
        raise InvalidInput("degrees of freedom must be positive")
    xa = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(xa)) or np.any(xa < 0.0):
        raise InvalidInput("chi2_cdf is defined for x >= 0")
    out = np.where(np.isinf(xa), 1.0, 0.0)
    fin = np.isfinite(xa)
    if np.any(fin):
        vals = kernels.gammainc_lower(np.full(np.count_nonzero(fin), 0.5 * d), 0.5 * xa[fin])
        if np.any(np.isnan(vals)):
            raise ConvergenceFailure("incomplete gamma evaluation did not converge")
        out[fin] = np.clip(vals, 0.0, 1.0)
    if np.ndim(x) == 0:
        return float(out)
    return out


def kolmogorov_sf(lam: float) -> float:
    """Survival function of the limiting Kolmogorov distribution."""
    if lam <= 0.0:
        return 1.0
    if lam < 1.18:
        # theta-function form of the same law; the alternating series is
        # ill-conditioned for small lambda
        total = 0.0
        k = 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8.0 * lam * lam))
            total += term
            if term < KS_TERM_TOL * max(total, 1e-300) or k > 100:
                break
            k += 1
        cdf = math.sqrt(2.0 * math.pi) / lam * total
        return min(1.0, max(0.0, 1.0 - cdf))
    total = 0.0
    for k in range(1, 101):
        term = math.exp(-2.0 * k * k * lam * lam)
        total += term if k % 2 else -term
        if term < KS_TERM_TOL:
            break
    return min(1.0, max(0.0, 2.0 * total))


def ks_statistic(values: np.ndarray, cdf: Callable) -> float:
    x = np.sort(np.asarray(values, dtype=np.float64))
    n = x.size
    f = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n), 0.0))


def ks_test(values, cdf: Callable) -> GofResult:
    """One-sample Kolmogorov-Smirnov test of ``values`` against ``cdf``.

    ``cdf`` must accept a sorted numpy array. The p-value uses the asymptotic
    law with effective size ``sqrt(n) + 0.12 + 0.11/sqrt(n)``.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptySample("KS test needs at least one value")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("KS test values must be finite")
    n = x.size
    stat = min(1.0, ks_statistic(x, cdf))
    en = math.sqrt(n)
    p = kolmogorov_sf((en + 0.12 + 0.11 / en) * stat)
    return GofResult(statistic=stat, p_value=p, n=n)


def eigen_batch(m):
    """Jacobi eigen-decomposition of a (N, d, d) stack; raises on non-convergence."""
    w, V, ok = kernels.jacobi_eigh_batch(m, JACOBI_RTOL, JACOBI_MAX_SWEEPS)
    if not np.all(ok):
        raise ConvergenceFailure(
            f"Jacobi sweeps did not converge within {JACOBI_MAX_SWEEPS} sweeps "
            f"for {int(np.count_nonzero(~ok))} matrices"
        )
    return w, V


def eigen_sym(m):
    """Eigenvalues (descending) and column eigenvectors of a symmetric matrix."""
    m = _as_square(m)
    w, V = eigen_batch(m[None])
    return w[0], V[0]


def _nonempty(values) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptySample("empty sample")
    return x


def empirical_quantile(values, p: float) -> float:
    """Linear-interpolation quantile at plotting positions (k-1)/(n-1)."""
    x = _nonempty(values)
    if not 0.0 < p < 1.0:
        raise InvalidInput(f"quantile level must lie in (0, 1), got {p}")
    return float(np.quantile(x, p, method="linear"))


def tail_mean(values, p: float) -> float:
    """Mean of the values strictly above the ``p`` quantile (max if none are)."""
    x = _nonempty(values)
    q = empirical_quantile(x, p)
    above = x[x > q]
    if above.size == 0:
        return float(np.max(x))
    return float(np.mean(above))


def describe(values) -> dict:
    """Mean, unbiased variance, skewness and (non-excess) kurtosis."""
    x = _nonempty(values)
    mean = float(np.mean(x))
    c = x - mean
    m2 = float(np.mean(c * c))
    out = {"n": int(x.size), "mean": mean}
    out["variance"] = float(np.var(x, ddof=1)) if x.size > 1 else 0.0
    if m2 > 0.0:
        out["skewness"] = float(np.mean(c**3) / m2**1.5)
        out["kurtosis"] = float(np.mean(c**4) / m2**2)
    else:
        out["skewness"] = 0.0
        out["kurtosis"] = 0.0
    return out
