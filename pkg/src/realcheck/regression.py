"""Realism checks for regression uncertainty.

A dataset is either a list of :class:`RegressionRecord` or a
:class:`RegressionBatch` (array form, what the simulator and readers produce
for homogeneous data). Degenerate records, meaning a singular covariance or a
zero error for the angle analysis, are skipped and counted, never imputed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from statistics import NormalDist
from typing import Sequence, Union

import numpy as np

from . import kernels, rng
from .errors import (
    AllRecordsDegenerate,
    DegenerateSample,
    EmptySample,
    InvalidInput,
    MixedDimensions,
    NoRawSamples,
    TooFewRecords,
    TooFewSamples,
    ZeroVariance,
)
from .statcore import (
    GaussianSummary,
    GofResult,
    chi2_cdf,
    chol_with_jitter,
    eigen_batch,
    empirical_quantile,
    ks_test,
    summarize_batch,
)

REALISTIC = "realistic"
NOT_REALISTIC = "not_realistic"
MIN_ERROR_NORM = 1e-12


@dataclass(eq=False)
class RegressionRecord:
    y_gt: np.ndarray
    samples: np.ndarray | None = None
    summary: GaussianSummary | None = None

    def __post_init__(self):
        self.y_gt = np.asarray(self.y_gt, dtype=np.float64)
        if (self.samples is None) == (self.summary is None):
            raise InvalidInput("a record carries exactly one of samples or summary")
        if self.samples is not None:
            self.samples = np.asarray(self.samples, dtype=np.float64)
            if self.samples.ndim != 2 or self.samples.shape[1] != self.y_gt.shape[0]:
                raise MixedDimensions("samples do not match y_gt dimension")
        elif self.summary.dim != self.y_gt.shape[0]:
            raise MixedDimensions("summary does not match y_gt dimension")

    @property
    def dim(self) -> int:
        return self.y_gt.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RegressionRecord):
            return NotImplemented
        if not np.array_equal(self.y_gt, other.y_gt):
            return False
        if self.samples is not None:
            return other.samples is not None and np.array_equal(self.samples, other.samples)
        return other.summary is not None and self.summary == other.summary


@dataclass(eq=False)
class RegressionBatch:
    """Homogeneous records in array form.

    Either ``samples`` (N, K, d) or both ``mean`` (N, d) and ``cov`` (N, d, d)
    are set, never both.
    """

    y_gt: np.ndarray
    samples: np.ndarray | None = None
    mean: np.ndarray | None = None
    cov: np.ndarray | None = None

    def __post_init__(self):
        self.y_gt = np.asarray(self.y_gt, dtype=np.float64)
        if self.y_gt.ndim != 2:
            raise InvalidInput("y_gt must be an (N, d) array")
        n, d = self.y_gt.shape
        if self.samples is not None:
            if self.mean is not None or self.cov is not None:
                raise InvalidInput("batch carries both samples and summaries")
            self.samples = np.asarray(self.samples, dtype=np.float64)
            if self.samples.ndim != 3 or self.samples.shape[0] != n or self.samples.shape[2] != d:
                raise MixedDimensions("samples shape does not match y_gt")
        else:
            if self.mean is None or self.cov is None:
                raise InvalidInput("batch needs samples or mean and cov")
            self.mean = np.asarray(self.mean, dtype=np.float64)
            self.cov = np.asarray(self.cov, dtype=np.float64)
            if self.mean.shape != (n, d) or self.cov.shape != (n, d, d):
                raise MixedDimensions("summary shapes do not match y_gt")

    def __len__(self):
        return self.y_gt.shape[0]

    @property
    def dim(self) -> int:
        return self.y_gt.shape[1]

    def records(self) -> list[RegressionRecord]:
        if self.samples is not None:
            return [RegressionRecord(y, samples=s) for y, s in zip(self.y_gt, self.samples)]
        return [
            RegressionRecord(y, summary=GaussianSummary(m, c, 0))
            for y, m, c in zip(self.y_gt, self.mean, self.cov)
        ]


RegressionData = Union[RegressionBatch, Sequence[RegressionRecord]]


@dataclass(eq=False)
class MahalanobisSet:
    values: np.ndarray
    dim: int
    skipped: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    def __len__(self):
        return self.values.size


@dataclass(eq=False)
class Summaries:
    """Per-record Gaussian summaries in the dataset's original order."""

    y_gt: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray
    ok: np.ndarray
    jitter: np.ndarray

    @property
    def skipped(self) -> int:
        return int(np.count_nonzero(~self.ok))


@dataclass(eq=False)
class Residuals:
    """Error vectors (mean - y_gt) and scalar covariance scores of usable records."""

    error: np.ndarray
    score_det: np.ndarray
    score_maxdiag: np.ndarray
    angle: np.ndarray
    skipped: int = 0


@dataclass
class BinRow:
    score_lo: float
    score_hi: float
    n: int
    mean_abs_error: float
    q99_error: float
    gauss_bound: float


@dataclass(eq=False)
class AngleSet:
    values: np.ndarray
    dim: int
    skipped_degenerate: int = 0
    skipped_zero_error: int = 0


def _groups(data: RegressionData):
    """Split a dataset into homogeneous batches: list of (indices, batch), n, d."""
    if isinstance(data, RegressionBatch):
        if len(data) == 0:
            raise EmptySample("empty dataset")
        return [(np.arange(len(data)), data)], len(data), data.dim
    records = list(data)
    if not records:
        raise EmptySample("empty dataset")
    d = records[0].dim
    buckets: dict = {}
    for i, r in enumerate(records):
        if r.dim != d:
            raise MixedDimensions(f"record {i} has dimension {r.dim}, expected {d}")
        key = ("s", r.samples.shape[0]) if r.samples is not None else ("m", 0)
        buckets.setdefault(key, []).append(i)
    groups = []
    for key, idx in buckets.items():
        sub = [records[i] for i in idx]
        y = np.stack([r.y_gt for r in sub])
        if key[0] == "s":
            batch = RegressionBatch(y, samples=np.stack([r.samples for r in sub]))
        else:
            batch = RegressionBatch(
                y,
                mean=np.stack([r.summary.mean for r in sub]),
                cov=np.stack([r.summary.cov for r in sub]),
            )
        groups.append((np.asarray(idx), batch))
    return groups, len(records), d


def summarize(data: RegressionData) -> Summaries:
    """Gaussian summary and Cholesky factor for every record.

    Raw samples go through the sample summary (unbiased covariance, jitter on
    failure); supplied summaries are factorized as given.
    """
    groups, n, d = _groups(data)
    y = np.empty((n, d))
    mean = np.empty((n, d))
    cov = np.empty((n, d, d))
    L = np.empty((n, d, d))
    ok = np.empty(n, dtype=bool)
    jitter = np.zeros(n)
    for idx, b in groups:
        y[idx] = b.y_gt
        if b.samples is not None:
            m, c, l, o, j = summarize_batch(b.samples)
            jitter[idx] = j
        else:
            m, c = b.mean, b.cov
            l, o = kernels.chol_batch(c)
        mean[idx], cov[idx], L[idx], ok[idx] = m, c, l, o
    return Summaries(y, mean, cov, L, ok, jitter)


def mgt_set(data: RegressionData) -> MahalanobisSet:
    """Squared Mahalanobis distance of each ground truth to its summary."""
    s = summarize(data)
    if not s.ok.any():
        raise AllRecordsDegenerate("every record has a degenerate covariance")
    r = (s.y_gt - s.mean)[s.ok][:, None, :]
    vals = kernels.mahalanobis_batch(s.chol[s.ok], r)[:, 0]
    return MahalanobisSet(vals, s.mean.shape[1], s.skipped)


def msample_set(data: RegressionData, leave_one_out: bool = False) -> MahalanobisSet:
    """Squared Mahalanobis distances of sample members to their own summary.

    By default each member is measured against the summary of all K members
    including itself. With ``leave_one_out`` the summary excludes the member.
    """
    groups, _, d = _groups(data)
    values = []
    skipped = 0
    for _, b in groups:
        if b.samples is None:
            raise NoRawSamples("intra-sample distances need raw samples")
        k = b.samples.shape[1]
        if k < d + 2:
            raise TooFewSamples(f"need K >= d + 2 = {d + 2} samples, got {k}")
        mean, _, L, ok, _ = summarize_batch(b.samples)
        skipped += int(np.count_nonzero(~ok))
        if not ok.any():
            continue
        vals = kernels.mahalanobis_batch(L[ok], b.samples[ok] - mean[ok][:, None, :])
        if leave_one_out:
            # rank-one downdate of the covariance, closed form via Sherman-Morrison
            t = vals / (k - 1)
            denom = 1.0 - k * t / (k - 1)
            vals = (k / (k - 1)) ** 2 * (k - 2) * t / np.where(denom > 0.0, denom, np.nan)
            bad = ~np.all(np.isfinite(vals), axis=1)
            skipped += int(np.count_nonzero(bad))
            vals = vals[~bad]
        values.append(vals.ravel())
    if not values or sum(v.size for v in values) == 0:
        raise DegenerateSample("every sample is degenerate")
    return MahalanobisSet(np.concatenate(values), d, skipped)


def realism_test(mset: MahalanobisSet, alpha: float = 0.01) -> tuple[GofResult, str]:
    """KS test of a Mahalanobis set against chi2(d); realistic iff p >= alpha."""
    if not 0.0 < alpha < 1.0:
        raise InvalidInput("alpha must lie in (0, 1)")
    if len(mset) == 0:
        raise EmptySample("empty Mahalanobis set")
    gof = ks_test(mset.values, lambda x: chi2_cdf(mset.dim, x))
    return gof, REALISTIC if gof.p_value >= alpha else NOT_REALISTIC


def rescale_to_variance(mset: MahalanobisSet, target_var: float) -> MahalanobisSet:
    """Multiply all values by one factor so their unbiased variance is ``target_var``."""
    if not target_var > 0.0:
        raise InvalidInput("target variance must be positive")
    if len(mset) < 2:
        raise ZeroVariance("need at least two values")
    var = float(np.var(mset.values, ddof=1))
    if not var > 0.0:
        raise ZeroVariance("values have zero variance")
    c = math.sqrt(target_var / var)
    return MahalanobisSet(mset.values * c, mset.dim, mset.skipped)


def residuals(data: RegressionData) -> Residuals:
    s = summarize(data)
    if not s.ok.any():
        raise AllRecordsDegenerate("every record has a degenerate covariance")
    err = (s.mean - s.y_gt)[s.ok]
    L = s.chol[s.ok]
    cov = s.cov[s.ok]
    diag = np.diagonal(L, axis1=1, axis2=2)
    det = np.prod(diag * diag, axis=1)
    maxdiag = np.max(np.diagonal(cov, axis1=1, axis2=2), axis=1)
    _, V = eigen_batch(cov)
    top = V[:, :, 0]
    norm = np.linalg.norm(err, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosv = np.abs(np.einsum("ni,ni->n", top, err)) / norm
    angle = np.where(norm >= MIN_ERROR_NORM, np.arccos(np.clip(cosv, 0.0, 1.0)), np.nan)
    return Residuals(err, det, maxdiag, angle, s.skipped)


def angle_set(data: RegressionData) -> AngleSet:
    """Folded angle in [0, pi/2] between each error and its covariance's top eigenvector."""
    res = residuals(data)
    good = np.isfinite(res.angle)
    return AngleSet(res.angle[good], res.error.shape[1], res.skipped, int(np.count_nonzero(~good)))


_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
_GL_X10, _GL_W10 = np.polynomial.legendre.leggauss(10)
_TABLE_PANELS = 256


def _gl(f, a, b, x=_GL_X, w=_GL_W):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    return half * np.sum(w * f(mid + half * x))


def adaptive_integral(f, a, b, tol=1e-15, depth=0):
    """Adaptive Gauss-Legendre: bisect until the 10- and 20-point rules agree."""
    coarse = _gl(f, a, b, _GL_X10, _GL_W10)
    fine = _gl(f, a, b)
    if abs(fine - coarse) <= tol * max(1.0, abs(fine)) or depth >= 40:
        return fine
    m = 0.5 * (a + b)
    return adaptive_integral(f, a, m, tol, depth + 1) + adaptive_integral(f, m, b, tol, depth + 1)


def _solid_angle_density(d):
    lognorm = math.log(2.0) - (math.lgamma((d - 1) / 2) + math.lgamma(0.5) - math.lgamma(d / 2))
    norm = math.exp(lognorm)
    return norm, (lambda t: norm * np.sin(t) ** (d - 2))


@lru_cache(maxsize=None)
def _solid_angle_table(d):
    _, f = _solid_angle_density(d)
    nodes = np.linspace(0.0, 0.5 * math.pi, _TABLE_PANELS + 1)
    cum = np.zeros(nodes.size)
    for j in range(_TABLE_PANELS):
        cum[j + 1] = cum[j] + adaptive_integral(f, nodes[j], nodes[j + 1])
    return nodes, cum


def solid_angle_cdf(d: int, alpha):
    """CDF of the folded angle between a fixed axis and an isotropic direction in R^d.

    Density is proportional to sin(alpha)**(d-2) on [0, pi/2].
    """
    if int(d) != d or d < 2:
        raise InvalidInput("dimension must be an integer >= 2")
    a = np.asarray(alpha, dtype=np.float64)
    if np.any(np.isnan(a)) or np.any(a < 0.0) or np.any(a > 0.5 * math.pi + 1e-12):
        raise InvalidInput("angle must lie in [0, pi/2]")
    a = np.clip(a, 0.0, 0.5 * math.pi)
    nodes, cum = _solid_angle_table(int(d))
    _, f = _solid_angle_density(int(d))
    j = np.clip(np.searchsorted(nodes, a, side="right") - 1, 0, _TABLE_PANELS - 1)
    lo = nodes[j]
    half = 0.5 * (a - lo)
    mid = 0.5 * (a + lo)
    part = half * np.sum(_GL_W * f(mid[..., None] + half[..., None] * _GL_X), axis=-1)
    out = np.clip(cum[j] + part, 0.0, 1.0)
    out = np.where(a >= 0.5 * math.pi, 1.0, out)
    if np.ndim(alpha) == 0:
        return float(out)
    return out


def angle_test(angles: AngleSet, alpha: float = 0.01) -> tuple[GofResult, str]:
    """KS test of the angle set against the folded solid-angle law."""
    if angles.values.size == 0:
        raise EmptySample("no usable angles")
    gof = ks_test(angles.values, lambda x: solid_angle_cdf(angles.dim, x))
    return gof, REALISTIC if gof.p_value >= alpha else NOT_REALISTIC


def two_sided_z(p: float) -> float:
    """Normal quantile bounding a fraction ``p`` of mass symmetrically (2.576 at 0.99)."""
    return NormalDist().inv_cdf(0.5 * (1.0 + p))


def monotonicity_table(
    data: RegressionData | Residuals,
    score: str = "det",
    n_bins: int = 10,
    quantile_p: float = 0.99,
    error_mode: str = "norm",
) -> list[BinRow]:
    """Equal-population score bins with mean error, error quantile and Gaussian bound.

    ``error_mode="norm"`` uses the Euclidean error norm and bounds it by
    ``z * RMS(norm) / sqrt(d)``; ``"component"`` pools the absolute error
    components of a bin and bounds them by ``z * RMS(component)``.
    """
    if score not in ("det", "maxdiag"):
        raise InvalidInput("score must be 'det' or 'maxdiag'")
    if error_mode not in ("norm", "component"):
        raise InvalidInput("error_mode must be 'norm' or 'component'")
    if n_bins < 2:
        raise InvalidInput("need at least two bins")
    if not 0.0 < quantile_p < 1.0:
        raise InvalidInput("quantile must lie in (0, 1)")
    res = data if isinstance(data, Residuals) else residuals(data)
    n, d = res.error.shape
    if n < 5 * n_bins:
        raise TooFewRecords(f"{n} usable records cannot fill {n_bins} bins of at least 5")
    sc = res.score_det if score == "det" else res.score_maxdiag
    order = np.argsort(sc, kind="stable")
    z = two_sided_z(quantile_p)
    rows = []
    for idx in np.array_split(order, n_bins):
        e = res.error[idx]
        if error_mode == "norm":
            mag = np.linalg.norm(e, axis=1)
            bound = z * math.sqrt(float(np.mean(mag * mag))) / math.sqrt(d)
        else:
            mag = np.abs(e).ravel()
            bound = z * math.sqrt(float(np.mean(mag * mag)))
        rows.append(
            BinRow(
                score_lo=float(sc[idx].min()),
                score_hi=float(sc[idx].max()),
                n=int(idx.size),
                mean_abs_error=float(np.mean(mag)),
                q99_error=empirical_quantile(mag, quantile_p),
                gauss_bound=bound,
            )
        )
    return rows


def tied_bin_edges(rows: list[BinRow]) -> int:
    """Number of adjacent bin pairs that share the same score range (degenerate binning)."""
    return sum(
        1 for a, b in zip(rows, rows[1:]) if a.score_lo == b.score_lo and a.score_hi == b.score_hi
    )


def gaussian_implied_tail(cov: np.ndarray, p: float = 0.99, draws: int = 20, seed: int = 0):
    """Quantile and tail mean of the error norm if errors were N(0, cov_i).

    Monte-Carlo over ``draws`` Gaussian errors per record from a fixed stream,
    pooled across records; deterministic for a given ``seed``.
    """
    cov = np.asarray(cov, dtype=np.float64)
    n, d, _ = cov.shape
    _, L, ok, _ = chol_with_jitter(cov)
    L = L[ok]
    z = rng.normals(seed, np.arange(L.shape[0]), 0, draws * d).reshape(L.shape[0], draws, d)
    e = np.einsum("nij,nkj->nki", L, z)
    mag = np.linalg.norm(e, axis=2).ravel()
    q = empirical_quantile(mag, p)
    above = mag[mag > q]
    return q, float(above.mean()) if above.size else q


def nll_grid(err_range, sigma_range, steps: int) -> np.ndarray:
    """Rows (err, sigma, nll, realism) over a steps x steps grid.

    ``nll = log(sigma) + err**2 / (2 sigma**2)`` (constant dropped) and
    ``realism = |err**2 / sigma**2 - 1|``. Rows run over err, then sigma.
    """
    e_lo, e_hi = map(float, err_range)
    s_lo, s_hi = map(float, sigma_range)
    if int(steps) != steps or steps < 2:
        raise InvalidInput("steps must be an integer >= 2")
    if not (s_lo > 0.0 and s_hi > 0.0):
        raise InvalidInput("sigma range must be strictly positive")
    if not all(map(math.isfinite, (e_lo, e_hi, s_lo, s_hi))) or e_hi < e_lo or s_hi < s_lo:
        raise InvalidInput("ranges must be finite and ordered LO:HI")
    err = np.linspace(e_lo, e_hi, int(steps))
    sig = np.linspace(s_lo, s_hi, int(steps))
    E, S = np.meshgrid(err, sig, indexing="ij")
    E = E.ravel()
    S = S.ravel()
    nll = np.log(S * S) / 2.0 + E * E / (2.0 * S * S)
    realism = np.abs((E / S) ** 2 - 1.0)
    return np.column_stack([E, S, nll, realism])
