"""Seeded fixtures with known calibration regimes.

Regression mechanisms report (mu, Sigma_mech) through K moment-matched samples:
the sample mean and unbiased covariance of the emitted sample equal ``mu_true``
and ``Sigma_mech`` up to rounding, so the regime alone decides whether the
reported uncertainty is realistic. Ground truths are drawn from the regime's
error law around ``mu_true``.

All float work goes through :mod:`realcheck.kernels.numpy_impl` so output is
identical whichever kernel backend is active.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .classification import ClassificationBatch
from .errors import InvalidRegime
from .kernels import numpy_impl as npk
from .regression import RegressionBatch

REGRESSION_KINDS = ("calibrated", "var_scaled", "misoriented", "fat_tailed", "biased")
CLASSIFICATION_KINDS = ("informative", "uninformative", "out_of_data")

# per-record overall standard deviation is log-uniform on this range
SCALE_RANGE = (0.5, 2.0)
COND_CAP = 100.0
MEAN_BOX = 100.0
CHUNK = 20000

# stream purposes
_P_SPECTRUM, _P_ROTATION, _P_MEAN, _P_SAMPLES, _P_ERROR, _P_GAMMA = 0, 1, 2, 3, 4, 16
_P_CLS_META, _P_CLS_SHARED, _P_CLS_SAMPLE = 0, 1, 2


@dataclass(frozen=True)
class RegressionRegime:
    kind: str = "calibrated"
    d: int = 4
    k: int = 50
    n: int = 10000
    seed: int = 0
    scale: float = 1.0
    nu: float = 3.0
    bias: tuple = ()

    def validate(self):
        if self.kind not in REGRESSION_KINDS:
            raise InvalidRegime(f"unknown regression regime {self.kind!r}")
        if self.d < 1 or self.n < 1:
            raise InvalidRegime("d and n must be positive")
        if self.k < self.d + 2:
            raise InvalidRegime(f"k must be >= d + 2 = {self.d + 2}")
        if not self.scale > 0.0:
            raise InvalidRegime("variance scale c must be > 0")
        if not self.nu > 2.0:
            raise InvalidRegime("Student-t degrees of freedom must be > 2")
        if self.kind == "biased" and len(self.bias) != self.d:
            raise InvalidRegime(f"bias must have {self.d} components")
        if self.kind == "misoriented" and self.d < 2:
            raise InvalidRegime("misorientation needs d >= 2")
        if not 0 <= self.seed < 2**64:
            raise InvalidRegime("seed must fit in 64 bits")

    def meta(self) -> dict:
        out = {"task": "regression", "regime": self.kind, "d": self.d, "k": self.k,
               "n": self.n, "seed": self.seed}
        if self.kind == "var_scaled":
            out["scale"] = self.scale
        if self.kind == "fat_tailed":
            out["nu"] = self.nu
        if self.kind == "biased":
            out["bias"] = list(self.bias)
        return out


@dataclass(frozen=True)
class ClassificationRegime:
    kind: str = "informative"
    c: int = 19
    k: int = 50
    n: int = 10000
    seed: int = 0

    def validate(self):
        if self.kind not in CLASSIFICATION_KINDS:
            raise InvalidRegime(f"unknown classification regime {self.kind!r}")
        if self.c < 2:
            raise InvalidRegime("need at least two classes")
        if self.k < 1 or self.n < 1:
            raise InvalidRegime("k and n must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvalidRegime("seed must fit in 64 bits")

    def meta(self) -> dict:
        return {"task": "classification", "regime": self.kind, "c": self.c, "k": self.k,
                "n": self.n, "seed": self.seed}


def random_rotations(z: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of each (d, d) matrix by modified Gram-Schmidt.

    Gaussian input gives Haar-distributed rotations.
    """
    q = np.array(z, dtype=np.float64, copy=True)
    d = q.shape[-1]
    for j in range(d):
        for i in range(j):
            proj = np.sum(q[:, :, i] * q[:, :, j], axis=1)
            q[:, :, j] -= proj[:, None] * q[:, :, i]
        q[:, :, j] /= np.sqrt(np.sum(q[:, :, j] * q[:, :, j], axis=1))[:, None]
    return q


def _compose(Q, lam):
    return np.einsum("nij,nj,nkj->nik", Q, lam, Q)


def _regression_chunk(reg: RegressionRegime, idx: np.ndarray):
    d, k, seed = reg.d, reg.k, reg.seed
    n = idx.size
    u = rng.uniforms(seed, idx, _P_SPECTRUM, d + 1)
    lo, hi = map(math.log, SCALE_RANGE)
    std = np.exp(lo + (hi - lo) * u[:, d])
    lam = (std * std)[:, None] * COND_CAP ** (u[:, :d] - 0.5)
    Q = random_rotations(rng.normals(seed, idx, _P_ROTATION, d * d).reshape(n, d, d))
    sigma_true = _compose(Q, lam)
    mu = MEAN_BOX * (2.0 * rng.uniforms(seed, idx, _P_MEAN, d) - 1.0)

    if reg.kind == "var_scaled":
        sigma_mech = reg.scale * sigma_true
    elif reg.kind == "misoriented":
        # quarter turn in the plane of the largest and smallest principal axes
        lam_m = lam.copy()
        top = np.argmax(lam, axis=1)
        bot = np.argmin(lam, axis=1)
        rows = np.arange(n)
        lam_m[rows, top] = lam[rows, bot]
        lam_m[rows, bot] = lam[rows, top]
        sigma_mech = _compose(Q, lam_m)
    else:
        sigma_mech = sigma_true

    z = rng.normals(seed, idx, _P_SAMPLES, k * d).reshape(n, k, d)
    zmean, zcov = npk.sample_moments(z)
    Lz, _ = npk.chol_batch(zcov)
    white = npk.forward_solve(Lz, z - zmean[:, None, :])
    Lm, _ = npk.chol_batch(sigma_mech)
    samples = mu[:, None, :] + np.einsum("nij,nkj->nki", Lm, white)

    Lt, _ = npk.chol_batch(sigma_true)
    err = np.einsum("nij,nj->ni", Lt, rng.normals(seed, idx, _P_ERROR, d))
    if reg.kind == "fat_tailed":
        nu = reg.nu
        chi2 = 2.0 * rng.gammas(seed, idx, _P_GAMMA, 0.5 * nu)
        err *= (np.sqrt((nu - 2.0) / nu) / np.sqrt(chi2 / nu))[:, None]
    elif reg.kind == "biased":
        err += np.asarray(reg.bias, dtype=np.float64)[None, :]
    return mu + err, samples, sigma_true


def gen_regression(regime: RegressionRegime, with_truth: bool = False):
    """Regression records for ``regime`` as a :class:`RegressionBatch`.

    With ``with_truth`` also returns the per-record true covariances.
    """
    regime.validate()
    ys, ss, ts = [], [], []
    for lo in range(0, regime.n, CHUNK):
        idx = np.arange(lo, min(lo + CHUNK, regime.n), dtype=np.uint64)
        y, s, t = _regression_chunk(regime, idx)
        ys.append(y)
        ss.append(s)
        ts.append(t)
    batch = RegressionBatch(np.concatenate(ys), samples=np.concatenate(ss))
    if with_truth:
        return batch, np.concatenate(ts)
    return batch


# logit signal strength, shared (per-record) noise and per-sample noise as a
# function of difficulty delta in [0, 1]
def _profile(kind, delta):
    if kind == "informative":
        return 14.0 * (1.0 - delta), 3.0 * delta, 3.0 * delta * delta
    if kind == "uninformative":
        one = np.ones_like(delta)
        return 3.0 * one, 1.0 * one, 1.0 * one
    one = np.ones_like(delta)
    return 0.3 * one, 3.0 * one, 1.5 * one


UNINFORMATIVE_ACCURACY = 0.7


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _classification_chunk(reg: ClassificationRegime, idx: np.ndarray):
    c, k, seed = reg.c, reg.k, reg.seed
    n = idx.size
    meta = rng.uniforms(seed, idx, _P_CLS_META, 4)
    delta = meta[:, 0]
    label = np.minimum((meta[:, 1] * c).astype(np.int64), c - 1)
    s, h, g = _profile(reg.kind, delta)
    shared = rng.normals(seed, idx, _P_CLS_SHARED, c)
    noise = rng.normals(seed, idx, _P_CLS_SAMPLE, k * c).reshape(n, k, c)
    logits = (h[:, None] * shared)[:, None, :] + g[:, None, None] * noise
    logits[np.arange(n), :, label] += s[:, None]
    probs = _softmax(logits)
    gt = label
    if reg.kind == "uninformative":
        # correctness is a coin independent of the softmax sample
        pred = np.argmax(probs.mean(axis=1), axis=1)
        other = (pred + 1 + np.minimum((meta[:, 3] * (c - 1)).astype(np.int64), c - 2)) % c
        gt = np.where(meta[:, 2] < UNINFORMATIVE_ACCURACY, pred, other)
    return gt, probs


def gen_classification(regime: ClassificationRegime) -> ClassificationBatch:
    """Classification records: per-record difficulty drives signal and noise.

    * informative: signal falls and both noise levels rise with difficulty,
      so spread and flatness of the softmax sample predict errors;
    * uninformative: constant profile, and whether the prediction is correct
      is decided by an independent coin;
    * out_of_data: almost no signal and strong shared noise, which produces
      frequent confident mistakes.
    """
    regime.validate()
    step = max(1, CHUNK // max(1, regime.k))
    gts, ps = [], []
    for lo in range(0, regime.n, step):
        idx = np.arange(lo, min(lo + step, regime.n), dtype=np.uint64)
        g, p = _classification_chunk(regime, idx)
        gts.append(g)
        ps.append(p)
    return ClassificationBatch(np.concatenate(gts), np.concatenate(ps))
