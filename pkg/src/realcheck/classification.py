"""Uncertainty scores for classifiers and their evaluation by ROC/PR analysis.

All scores are uncertainties: higher means less trustworthy. Curves rank
records by confidence, the negated uncertainty, and treat correctly
classified records as positives. Entropies use the natural log.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import kernels
from .errors import (
    DegenerateCurve,
    EmptySample,
    InvalidInput,
    InvalidRecord,
    MixedDimensions,
    NeedsSamples,
    NoPositives,
    OneClassOnly,
)

SCORE_KINDS = ("max_prob", "entropy", "win_var", "mi")
SPREAD_SCORES = ("win_var", "mi")
ROW_SUM_TOL = 1e-6
MI_CLAMP_TOL = 1e-9
YOUDEN_TIE_TOL = 1e-12


@dataclass(eq=False)
class ClassificationRecord:
    gt_class: int
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2 or self.probs.shape[0] < 1 or self.probs.shape[1] < 2:
            raise InvalidRecord("probs must be a K x C matrix with K >= 1, C >= 2")
        _check_probs(self.probs)
        if not 0 <= int(self.gt_class) < self.probs.shape[1]:
            raise InvalidRecord(f"class {self.gt_class} outside [0, {self.probs.shape[1]})")
        self.gt_class = int(self.gt_class)

    def __eq__(self, other):
        if not isinstance(other, ClassificationRecord):
            return NotImplemented
        return self.gt_class == other.gt_class and np.array_equal(self.probs, other.probs)


def _check_probs(p):
    if not np.all(np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise InvalidRecord("probabilities must lie in [0, 1]")
    if np.any(np.abs(p.sum(axis=-1) - 1.0) > ROW_SUM_TOL):
        raise InvalidRecord("probability rows must sum to 1")


@dataclass(eq=False)
class ClassificationBatch:
    gt: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        self.gt = np.asarray(self.gt, dtype=np.int64)
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 3 or self.gt.shape != (self.probs.shape[0],):
            raise InvalidRecord("expected gt (N,) and probs (N, K, C)")

    def __len__(self):
        return self.gt.shape[0]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[2]

    def records(self) -> list[ClassificationRecord]:
        return [ClassificationRecord(int(g), p) for g, p in zip(self.gt, self.probs)]


ClassificationData = Union[ClassificationBatch, Sequence[ClassificationRecord]]


@dataclass
class ScoredRecord:
    correct: bool
    uncertainty: float


@dataclass(eq=False)
class ScoredSet:
    """Array form of a list of :class:`ScoredRecord`."""

    correct: np.ndarray
    uncertainty: np.ndarray

    def __post_init__(self):
        self.correct = np.asarray(self.correct, dtype=bool)
        self.uncertainty = np.asarray(self.uncertainty, dtype=np.float64)
        if self.correct.shape != self.uncertainty.shape or self.correct.ndim != 1:
            raise InvalidInput("correct and uncertainty must be equal-length vectors")
        if not np.all(np.isfinite(self.uncertainty)):
            raise InvalidInput("uncertainties must be finite")

    def __len__(self):
        return self.correct.size

    def records(self) -> list[ScoredRecord]:
        return [ScoredRecord(bool(c), float(u)) for c, u in zip(self.correct, self.uncertainty)]


@dataclass(eq=False)
class CurveReport:
    """Curve points as rows (threshold, x, y); threshold is a confidence (-uncertainty).

    For ROC x = false-positive rate and y = true-positive rate; for PR x = recall
    and y = precision. The first point always has threshold +inf.
    """

    points: np.ndarray
    auc: float
    kind: str
    positives: int
    negatives: int

    def __eq__(self, other):
        if not isinstance(other, CurveReport):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.auc == other.auc
            and self.positives == other.positives
            and self.negatives == other.negatives
            and np.array_equal(self.points, other.points)
        )


def mean_softmax(r: ClassificationRecord) -> np.ndarray:
    return r.probs.mean(axis=0)


def _entropy(p):
    p = p[p > 0.0]
    return float(-np.sum(p * np.log(p)))


def score(r: ClassificationRecord, kind: str, per_sample_winner: bool = False) -> float:
    """Uncertainty score of one record (see :func:`score_batch` for definitions)."""
    if kind not in SCORE_KINDS:
        raise InvalidInput(f"unknown score {kind!r}")
    k = r.probs.shape[0]
    if kind in SPREAD_SCORES and k < 2:
        raise NeedsSamples(f"score {kind!r} needs at least two samples", count=1)
    m = mean_softmax(r)
    if kind == "max_prob":
        return float(1.0 - m.max())
    if kind == "entropy":
        return _entropy(m)
    if kind == "win_var":
        col = r.probs.max(axis=1) if per_sample_winner else r.probs[:, int(np.argmax(m))]
        return float(np.var(col, ddof=1))
    mi = _entropy(m) - float(np.mean([_entropy(row) for row in r.probs]))
    return _clamp_mi(np.array([mi]))[0]


def _clamp_mi(mi):
    if np.any(mi < -MI_CLAMP_TOL):
        raise InvalidRecord("mutual information below zero beyond rounding")
    return np.maximum(mi, 0.0)


def _groups(data: ClassificationData):
    if isinstance(data, ClassificationBatch):
        if len(data) == 0:
            raise EmptySample("empty dataset")
        return [(np.arange(len(data)), data)], len(data)
    records = list(data)
    if not records:
        raise EmptySample("empty dataset")
    c = records[0].probs.shape[1]
    buckets: dict = {}
    for i, r in enumerate(records):
        if r.probs.shape[1] != c:
            raise MixedDimensions(f"record {i} has {r.probs.shape[1]} classes, expected {c}")
        buckets.setdefault(r.probs.shape[0], []).append(i)
    groups = []
    for _, idx in sorted(buckets.items()):
        sub = [records[i] for i in idx]
        groups.append(
            (np.asarray(idx), ClassificationBatch([r.gt_class for r in sub], np.stack([r.probs for r in sub])))
        )
    return groups, len(records)


def score_batch(
    data: ClassificationData, kinds: Sequence[str] = SCORE_KINDS, per_sample_winner: bool = False
) -> tuple[np.ndarray, dict]:
    """Correctness and uncertainty scores for every record.

    * ``max_prob``: 1 - max of the mean softmax;
    * ``entropy``: entropy of the mean softmax;
    * ``win_var``: unbiased variance over samples of the probability of the
      mean-softmax winner (of each sample's own winner with ``per_sample_winner``);
    * ``mi``: entropy of the mean minus the mean per-sample entropy.

    Returns ``(correct, {kind: uncertainty array})``. Raises NeedsSamples
    (with the affected record count) if a spread score meets K = 1 records.
    """
    for kind in kinds:
        if kind not in SCORE_KINDS:
            raise InvalidInput(f"unknown score {kind!r}")
    groups, n = _groups(data)
    correct = np.empty(n, dtype=bool)
    out = {kind: np.empty(n) for kind in kinds}
    single = 0
    for idx, b in groups:
        umax, ent, wvar, mi, wvar_ps, pred = kernels.class_scores(b.probs)
        correct[idx] = pred == b.gt
        if b.probs.shape[1] < 2:
            single += idx.size
        table = {"max_prob": umax, "entropy": ent, "win_var": wvar_ps if per_sample_winner else wvar, "mi": mi}
        for kind in kinds:
            vals = table[kind]
            if kind == "mi" and b.probs.shape[1] > 1:
                vals = _clamp_mi(vals)
            out[kind][idx] = vals
    if single and any(k in SPREAD_SCORES for k in kinds):
        bad = [k for k in kinds if k in SPREAD_SCORES]
        raise NeedsSamples(
            f"scores {', '.join(bad)} need K >= 2 samples; {single} record(s) have K = 1",
            count=single,
        )
    return correct, out


def scored_set(data: ClassificationData, kind: str, per_sample_winner: bool = False) -> ScoredSet:
    correct, scores = score_batch(data, (kind,), per_sample_winner)
    return ScoredSet(correct, scores[kind])


def _arrays(scored):
    if isinstance(scored, ScoredSet):
        return scored.correct, scored.uncertainty
    items = list(scored)
    return (
        np.array([s.correct for s in items], dtype=bool),
        np.array([s.uncertainty for s in items], dtype=np.float64),
    )


def _sweep(correct, uncertainty):
    """Cumulative (thresholds, TP, FP) at each distinct confidence, descending."""
    conf = -uncertainty
    order = np.argsort(-conf, kind="stable")
    conf = conf[order]
    pos = correct[order].astype(np.int64)
    ends = np.flatnonzero(np.diff(conf) != 0.0)
    ends = np.append(ends, conf.size - 1)
    tp = np.cumsum(pos)[ends]
    fp = (ends + 1) - tp
    return conf[ends], tp, fp


def roc_curve(scored) -> CurveReport:
    correct, unc = _arrays(scored)
    npos = int(np.count_nonzero(correct))
    nneg = int(correct.size - npos)
    if npos == 0 or nneg == 0:
        raise OneClassOnly("ROC needs both correct and incorrect records")
    thr, tp, fp = _sweep(correct, unc)
    x = np.concatenate([[0.0], fp / nneg])
    y = np.concatenate([[0.0], tp / npos])
    t = np.concatenate([[math.inf], thr])
    auc = float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))
    return CurveReport(np.column_stack([t, x, y]), min(1.0, max(0.0, auc)), "roc", npos, nneg)


def pr_curve(scored) -> CurveReport:
    """Precision-recall curve; area is average precision (step-wise).

    The origin row is (inf, recall 0, precision 1).
    """
    correct, unc = _arrays(scored)
    npos = int(np.count_nonzero(correct))
    if npos == 0:
        raise NoPositives("PR curve needs at least one correct record")
    thr, tp, fp = _sweep(correct, unc)
    recall = tp / npos
    precision = tp / (tp + fp)
    ap = float(np.sum(np.diff(np.concatenate([[0.0], recall])) * precision))
    pts = np.column_stack(
        [np.concatenate([[math.inf], thr]), np.concatenate([[0.0], recall]), np.concatenate([[1.0], precision])]
    )
    return CurveReport(pts, min(1.0, max(0.0, ap)), "pr", npos, int(correct.size - npos))


def youden_threshold(roc: CurveReport) -> float:
    """Confidence threshold maximizing TPR - FPR.

    Ties go to the lowest threshold, i.e. the one rejecting fewest records.
    """
    if roc.kind != "roc" or roc.points.shape[0] < 2:
        raise DegenerateCurve("Youden threshold needs a ROC curve with at least two points")
    j = roc.points[:, 2] - roc.points[:, 1]
    best = np.flatnonzero(j >= j.max() - YOUDEN_TIE_TOL)
    return float(roc.points[best[-1], 0])


def rejection_report(scored, threshold: float) -> tuple[float, float]:
    """Fractions (incorrect rejected, correct rejected) when rejecting confidence < threshold."""
    correct, unc = _arrays(scored)
    rejected = -unc < threshold
    n_bad = int(np.count_nonzero(~correct))
    n_good = int(np.count_nonzero(correct))
    fn = np.count_nonzero(rejected & ~correct) / n_bad if n_bad else 0.0
    tp = np.count_nonzero(rejected & correct) / n_good if n_good else 0.0
    return float(fn), float(tp)
