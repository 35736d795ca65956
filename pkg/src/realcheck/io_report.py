"""Dataset files, report assembly and report serialization.

Dataset files are UTF-8, one JSON object per line::

    {"y_gt": [...], "samples": [[...], ...]}          # raw predictive sample
    {"y_gt": [...], "mean": [...], "cov": [[...]]}    # Gaussian summary
    {"gt": 3, "probs": [[...], ...]}                  # classification

Floats are written with ``repr`` so they round-trip exactly. Reports are
JSON-native dataclasses; the same input always yields byte-identical JSON.
"""
from __future__ import annotations

import contextlib
import csv
import hashlib
import io
import json
import math
import os
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .classification import (
    SCORE_KINDS,
    SPREAD_SCORES,
    ClassificationBatch,
    ClassificationRecord,
    ScoredSet,
    pr_curve,
    rejection_report,
    roc_curve,
    score_batch,
    youden_threshold,
)
from .errors import (
    DataError,
    InvalidInput,
    InvalidProbability,
    MixedDimensions,
    NeedsSamples,
    ParseError,
    RealcheckError,
    TooFewRecords,
)
from .regression import (
    RegressionBatch,
    AngleSet,
    RegressionRecord,
    _groups,
    angle_test,
    gaussian_implied_tail,
    mgt_set,
    monotonicity_table,
    msample_set,
    realism_test,
    rescale_to_variance,
    residuals,
    solid_angle_cdf,
    summarize,
    tied_bin_edges,
    two_sided_z,
)
from .statcore import GaussianSummary, chi2_cdf, describe, empirical_quantile, tail_mean

HIST_BINS = 60
HIST_MIN_UPPER = 30.0
HIST_UPPER_QUANTILE = 0.999
ANGLE_BINS = 30
ROW_SUM_TOL = 1e-6
# rows already within rounding of 1 are kept verbatim so files round-trip exactly
RENORM_TOL = 1e-12


class IoError(RealcheckError, OSError):
    pass


@dataclass
class Dataset:
    kind: str
    records: list
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def to_batch(self):
        """Array form when all records share one payload shape, else the record list."""
        if not self.records:
            return self.records
        if self.kind == "regression":
            groups, _, _ = _groups(self.records)
            return groups[0][1] if len(groups) == 1 else self.records
        ks = {r.probs.shape[0] for r in self.records}
        if len(ks) == 1:
            return ClassificationBatch(
                [r.gt_class for r in self.records], np.stack([r.probs for r in self.records])
            )
        return self.records


# ---------------------------------------------------------------- reading


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def _numeric(value, line, what, ndim):
    try:
        arr = np.array(value)
    except ValueError:
        raise ParseError(line, f"{what} is ragged") from None
    if arr.dtype.kind not in "iuf" or arr.ndim != ndim:
        raise ParseError(line, f"{what} must be a {ndim}-d array of numbers")
    arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise ParseError(line, f"{what} has non-finite entries")
    return arr


def _lines(path):
    try:
        fh = open(path, "r", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ParseError(lineno, "record must be a JSON object")
            yield lineno, obj


def read_regression(path) -> Dataset:
    records = []
    d = None
    for lineno, obj in _lines(path):
        if "y_gt" not in obj:
            raise ParseError(lineno, "missing key 'y_gt'")
        y = _numeric(obj["y_gt"], lineno, "y_gt", 1)
        if y.size == 0:
            raise ParseError(lineno, "y_gt is empty")
        if d is None:
            d = y.size
        elif y.size != d:
            raise MixedDimensions(f"y_gt has {y.size} components, expected {d}", line=lineno)
        has_s = "samples" in obj
        has_m = "mean" in obj or "cov" in obj
        if has_s == has_m:
            raise ParseError(lineno, "need exactly one of 'samples' or 'mean'+'cov'")
        if has_s:
            s = _numeric(obj["samples"], lineno, "samples", 2)
            if s.shape[1] != d:
                raise MixedDimensions(f"samples have {s.shape[1]} columns, expected {d}", line=lineno)
            records.append(RegressionRecord(y, samples=s))
        else:
            if "mean" not in obj or "cov" not in obj:
                raise ParseError(lineno, "summary payload needs both 'mean' and 'cov'")
            m = _numeric(obj["mean"], lineno, "mean", 1)
            c = _numeric(obj["cov"], lineno, "cov", 2)
            if m.size != d or c.shape != (d, d):
                raise MixedDimensions("summary shape does not match y_gt", line=lineno)
            if np.max(np.abs(c - c.T)) > 1e-9 * max(np.max(np.abs(c)), 1e-300):
                raise ParseError(lineno, "cov is not symmetric")
            records.append(RegressionRecord(y, summary=GaussianSummary(m, c, 0)))
    return Dataset("regression", records, {"source": str(path), "digest": file_digest(path)})


def read_classification(path) -> Dataset:
    records = []
    c = None
    for lineno, obj in _lines(path):
        if "gt" not in obj or "probs" not in obj:
            raise ParseError(lineno, "need keys 'gt' and 'probs'")
        gt = obj["gt"]
        if isinstance(gt, bool) or not isinstance(gt, int):
            raise ParseError(lineno, "gt must be an integer")
        p = _numeric(obj["probs"], lineno, "probs", 2)
        if p.shape[0] < 1 or p.shape[1] < 2:
            raise ParseError(lineno, "probs must be K x C with K >= 1 and C >= 2")
        if c is None:
            c = p.shape[1]
        elif p.shape[1] != c:
            raise MixedDimensions(f"probs have {p.shape[1]} classes, expected {c}", line=lineno)
        if not 0 <= gt < c:
            raise ParseError(lineno, f"gt {gt} outside [0, {c})")
        if np.any(p < 0.0) or np.any(p > 1.0 + ROW_SUM_TOL):
            raise InvalidProbability(lineno, "probabilities must lie in [0, 1]")
        sums = p.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            raise InvalidProbability(lineno, "a probability row does not sum to 1")
        if np.any(np.abs(sums - 1.0) > RENORM_TOL):
            p = p / sums[:, None]
        records.append(ClassificationRecord(gt, np.minimum(p, 1.0)))
    return Dataset("classification", records, {"source": str(path), "digest": file_digest(path)})


# ---------------------------------------------------------------- writing


@contextlib.contextmanager
def atomic_open(path):
    """Text handle on a temp file that replaces ``path`` only on success."""
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=parent)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror}") from exc
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _dump_line(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n"


def iter_regression_lines(data):
    if isinstance(data, RegressionBatch):
        if data.samples is not None:
            for y, s in zip(data.y_gt.tolist(), data.samples.tolist()):
                yield _dump_line({"y_gt": y, "samples": s})
        else:
            for y, m, c in zip(data.y_gt.tolist(), data.mean.tolist(), data.cov.tolist()):
                yield _dump_line({"y_gt": y, "mean": m, "cov": c})
        return
    for r in data:
        if r.samples is not None:
            yield _dump_line({"y_gt": r.y_gt.tolist(), "samples": r.samples.tolist()})
        else:
            yield _dump_line(
                {"y_gt": r.y_gt.tolist(), "mean": r.summary.mean.tolist(), "cov": r.summary.cov.tolist()}
            )


def iter_classification_lines(data):
    if isinstance(data, ClassificationBatch):
        for g, p in zip(data.gt.tolist(), data.probs):
            yield _dump_line({"gt": g, "probs": p.tolist()})
        return
    for r in data:
        yield _dump_line({"gt": r.gt_class, "probs": r.probs.tolist()})


def write_dataset(data, path=None):
    """Write regression or classification records; stdout when ``path`` is None."""
    if isinstance(data, Dataset):
        data = data.to_batch() if data.kind == "classification" else data.records
    is_cls = isinstance(data, ClassificationBatch) or (
        not isinstance(data, RegressionBatch) and data and isinstance(data[0], ClassificationRecord)
    )
    lines = iter_classification_lines(data) if is_cls else iter_regression_lines(data)
    if path is None:
        for line in lines:
            sys.stdout.write(line)
        return
    with atomic_open(path) as fh:
        for line in lines:
            fh.write(line)


# ---------------------------------------------------------------- reports


def _tool():
    return {"name": "realcheck", "version": __version__}


def _gof(g, verdict=None, alpha=None):
    out = {"statistic": g.statistic, "p_value": g.p_value, "n": g.n}
    if verdict is not None:
        out["verdict"] = verdict
        out["alpha"] = alpha
    return out


def mahalanobis_histogram(values, dim) -> dict:
    """60 equal bins on [0, max(30, q999)] with expected chi2(dim) counts."""
    values = np.asarray(values, dtype=np.float64)
    hi = max(HIST_MIN_UPPER, empirical_quantile(values, HIST_UPPER_QUANTILE))
    edges = np.linspace(0.0, hi, HIST_BINS + 1)
    counts, _ = np.histogram(values, bins=edges)
    cdf = chi2_cdf(dim, edges)
    return {
        "edges": edges.tolist(),
        "counts": counts.tolist(),
        "expected": (values.size * np.diff(cdf)).tolist(),
        "overflow": int(np.count_nonzero(values > hi)),
        "reference": f"chi2({dim})",
    }


def angle_histogram(values, dim) -> dict:
    edges = np.linspace(0.0, 0.5 * math.pi, ANGLE_BINS + 1)
    counts, _ = np.histogram(values, bins=edges)
    cdf = solid_angle_cdf(dim, edges)
    return {
        "edges": edges.tolist(),
        "counts": counts.tolist(),
        "reference_cdf": cdf[1:].tolist(),
        "expected": (len(values) * np.diff(cdf)).tolist(),
    }


@dataclass
class RealismReport:
    tool: dict
    input: dict
    settings: dict
    test: dict
    mgt: dict
    msample: dict | None
    angle: dict | None
    monotonicity: dict | None
    tail: dict
    skips: dict
    histograms: dict
    kind: str = "regression_realism"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RealismReport":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    @property
    def verdict(self) -> str:
        return self.test["verdict"]


def _all_raw(data) -> bool:
    if isinstance(data, RegressionBatch):
        return data.samples is not None
    return all(r.samples is not None for r in data)


def build_regression_report(
    data,
    *,
    alpha: float = 0.01,
    score: str = "det",
    bins: int = 10,
    quantile: float = 0.99,
    error_mode: str = "norm",
    rescale_msample: bool = False,
    loo_msample: bool = False,
    digest: str | None = None,
) -> RealismReport:
    """Run the full regression realism suite and collect it into a report."""
    if isinstance(data, Dataset):
        digest = digest or data.meta.get("digest")
        data = data.to_batch()
    summ = summarize(data)
    n_records = int(summ.ok.size)
    mgt = mgt_set(data)
    d = mgt.dim
    gof, verdict = realism_test(mgt, alpha)

    msample = None
    msample_hist = None
    msample_skipped = 0
    if _all_raw(data):
        ms = msample_set(data, leave_one_out=loo_msample)
        msample_skipped = ms.skipped
        g2, v2 = realism_test(ms, alpha)
        msample = {"summary": describe(ms.values), "test": _gof(g2, v2, alpha),
                   "mode": "leave_one_out" if loo_msample else "self_inclusive"}
        if rescale_msample:
            rs = rescale_to_variance(ms, float(np.var(mgt.values, ddof=1)))
            factor = float(rs.values[0] / ms.values[0]) if ms.values[0] != 0 else None
            msample["rescaled"] = {"target": "variance of M_gt", "factor": factor,
                                   "summary": describe(rs.values)}
        msample_hist = mahalanobis_histogram(ms.values, d)

    res = residuals(data)
    angle = None
    angle_hist = None
    zero_err = int(np.count_nonzero(~np.isfinite(res.angle)))
    if d >= 2:
        good = np.isfinite(res.angle)
        aset = AngleSet(res.angle[good], d, res.skipped, zero_err)
        if aset.values.size:
            ga, va = angle_test(aset, alpha)
            angle = {"test": _gof(ga, va, alpha), "reference": f"folded solid angle, d={d}",
                     "summary": describe(aset.values)}
            angle_hist = angle_histogram(aset.values, d)

    try:
        rows = monotonicity_table(res, score=score, n_bins=bins, quantile_p=quantile, error_mode=error_mode)
        mono = {
            "score": score,
            "error_mode": error_mode,
            "error_scalar": "euclidean norm" if error_mode == "norm" else "absolute component",
            "z": two_sided_z(quantile),
            "quantile": quantile,
            "rows": [asdict(r) for r in rows],
            "tied_bin_edges": tied_bin_edges(rows),
        }
    except TooFewRecords as exc:
        mono = {"score": score, "error_mode": error_mode, "skipped_reason": str(exc), "rows": []}

    norms = np.linalg.norm(res.error, axis=1)
    gq, gtm = gaussian_implied_tail(summ.cov[summ.ok], quantile)
    tail = {
        "quantile": quantile,
        "error_quantile": empirical_quantile(norms, quantile),
        "error_tail_mean": tail_mean(norms, quantile),
        "gaussian_error_quantile": gq,
        "gaussian_error_tail_mean": gtm,
    }
    skips = {
        "degenerate_records": summ.skipped,
        "zero_error_records": zero_err,
        "msample_degenerate": msample_skipped,
        "jittered_records": int(np.count_nonzero(summ.jitter > 0)),
    }
    hist = {"mgt": mahalanobis_histogram(mgt.values, d)}
    if msample_hist is not None:
        hist["msample"] = msample_hist
    if angle_hist is not None:
        hist["angle"] = angle_hist
    settings = {
        "alpha": alpha, "score": score, "bins": bins, "quantile": quantile,
        "error_mode": error_mode, "rescale_msample": rescale_msample,
        "loo_msample": loo_msample, "gof_test": "kolmogorov-smirnov",
    }
    test = _gof(gof, verdict, alpha)
    test["reference"] = f"chi2({d})"
    return RealismReport(
        tool=_tool(),
        input={"digest": digest, "records": n_records, "dim": d},
        settings=settings,
        test=test,
        mgt=describe(mgt.values),
        msample=msample,
        angle=angle,
        monotonicity=mono,
        tail=tail,
        skips=skips,
        histograms=hist,
    )


def _curve_rows(curve):
    return [["inf" if math.isinf(t) else float(t), float(x), float(y)] for t, x, y in curve.points]


@dataclass
class ClassificationReport:
    tool: dict
    input: dict
    settings: dict
    counts: dict
    scores: dict
    undefined: dict
    kind: str = "classification_auc"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ClassificationReport":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def build_classification_report(
    data,
    *,
    scores=SCORE_KINDS,
    reject: bool = False,
    per_sample_winner: bool = False,
    digest: str | None = None,
) -> ClassificationReport:
    """Per-score AUROC/AUPRC (correct records as positives) and optional rejection rates.

    Scores that cannot be computed (K = 1 for spread scores) are listed under
    ``undefined`` with the number of affected records.
    """
    if isinstance(data, Dataset):
        digest = digest or data.meta.get("digest")
        data = data.to_batch()
    scores = tuple(scores)
    plain = [k for k in scores if k not in SPREAD_SCORES]
    spread = [k for k in scores if k in SPREAD_SCORES]
    correct, values = score_batch(data, plain or ("max_prob",))
    values = {k: values[k] for k in plain}
    undefined = {}
    if spread:
        try:
            _, more = score_batch(data, spread, per_sample_winner)
            values.update(more)
        except NeedsSamples as exc:
            for k in spread:
                undefined[k] = {"reason": str(exc), "records": exc.count}
    out = {}
    for k in scores:
        if k not in values:
            continue
        ss = ScoredSet(correct, values[k])
        roc = roc_curve(ss)
        pr = pr_curve(ss)
        entry = {"auroc": roc.auc, "auprc": pr.auc, "roc": _curve_rows(roc), "pr": _curve_rows(pr)}
        if reject:
            thr = youden_threshold(roc)
            fn, tp = rejection_report(ss, thr)
            entry["rejection"] = {"threshold": "inf" if math.isinf(thr) else thr,
                                  "fn_rejected_frac": fn, "tp_rejected_frac": tp}
        out[k] = entry
    n = int(correct.size)
    npos = int(np.count_nonzero(correct))
    return ClassificationReport(
        tool=_tool(),
        input={"digest": digest, "records": n},
        settings={"scores": list(scores), "reject": reject, "per_sample_winner": per_sample_winner,
                  "positives": "correctly classified", "ranking": "confidence = -uncertainty",
                  "entropy_log_base": "e", "pr_auc": "average precision (step-wise)"},
        counts={"records": n, "correct": npos, "incorrect": n - npos},
        scores=out,
        undefined=undefined,
    )


def report_json(report) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _hist_rows(h, extra=()):
    e = h["edges"]
    rows = []
    for i, c in enumerate(h["counts"]):
        rows.append([e[i], e[i + 1], c, *[h[k][i] for k in extra]])
    return rows


def csv_bundle(report) -> dict:
    """File name -> CSV text for every plottable section of a report."""
    files = {}
    if isinstance(report, RealismReport):
        summary = [["test", k, v] for k, v in sorted(report.test.items())]
        summary += [["mgt", k, v] for k, v in sorted(report.mgt.items())]
        if report.msample:
            summary += [["msample", k, v] for k, v in sorted(report.msample["summary"].items())]
            summary += [["msample_test", k, v] for k, v in sorted(report.msample["test"].items())]
        if report.angle:
            summary += [["angle_test", k, v] for k, v in sorted(report.angle["test"].items())]
        summary += [["tail", k, v] for k, v in sorted(report.tail.items())]
        summary += [["skips", k, v] for k, v in sorted(report.skips.items())]
        files["summary.csv"] = _csv_text(["section", "key", "value"], summary)
        h = report.histograms
        files["mahalanobis_gt_hist.csv"] = _csv_text(
            ["bin_lo", "bin_hi", "count", "expected_chi2"], _hist_rows(h["mgt"], ("expected",))
        )
        if "msample" in h:
            files["mahalanobis_sample_hist.csv"] = _csv_text(
                ["bin_lo", "bin_hi", "count", "expected_chi2"], _hist_rows(h["msample"], ("expected",))
            )
        if "angle" in h:
            files["angle_hist.csv"] = _csv_text(
                ["bin_lo", "bin_hi", "count", "reference_cdf", "expected"],
                _hist_rows(h["angle"], ("reference_cdf", "expected")),
            )
        cols = ["score_lo", "score_hi", "n", "mean_abs_error", "q99_error", "gauss_bound"]
        rows = [[r[c] for c in cols] for r in (report.monotonicity or {}).get("rows", [])]
        files["monotonicity.csv"] = _csv_text(cols, rows)
    elif isinstance(report, ClassificationReport):
        summary = []
        for k, e in report.scores.items():
            rej = e.get("rejection", {})
            summary.append([k, e["auroc"], e["auprc"], rej.get("threshold", ""),
                            rej.get("fn_rejected_frac", ""), rej.get("tp_rejected_frac", "")])
            files[f"roc_{k}.csv"] = _csv_text(["threshold", "fpr", "tpr"], e["roc"])
            files[f"pr_{k}.csv"] = _csv_text(["threshold", "recall", "precision"], e["pr"])
        files["summary.csv"] = _csv_text(
            ["score", "auroc", "auprc", "threshold", "fn_rejected_frac", "tp_rejected_frac"], summary
        )
    else:
        raise InvalidInput("unknown report type")
    return files


def write_report(report, path=None, format: str = "json") -> None:
    """Write a report as one JSON document or as a directory of CSV files.

    JSON goes to standard output when ``path`` is None.
    """
    if format == "json":
        text = report_json(report)
        if path is None:
            sys.stdout.write(text)
            return
        with atomic_open(path) as fh:
            fh.write(text)
        return
    if format != "csv_bundle":
        raise InvalidInput(f"unknown report format {format!r}")
    if path is None:
        raise InvalidInput("csv_bundle output needs a directory path")
    target = Path(path)
    if target.exists() and not target.is_dir():
        raise IoError(f"{target} exists and is not a directory")
    files = csv_bundle(report)
    files["report.json"] = report_json(report)
    parent = target.parent if str(target.parent) else Path(".")
    try:
        tmpdir = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=parent))
    except OSError as exc:
        raise IoError(f"cannot write {target}: {exc.strerror}") from exc
    try:
        for name, text in files.items():
            with open(tmpdir / name, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        if target.exists():
            for name in files:
                os.replace(tmpdir / name, target / name)
            shutil.rmtree(tmpdir)
        else:
            os.replace(tmpdir, target)
    except BaseException:
        shutil.rmtree(tmpdir, ignore_errors=True)
        raise


def read_report(path):
    """Parse a JSON report (or the ``report.json`` of a CSV bundle)."""
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    try:
        d = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {p}: {exc.strerror}") from exc
    kind = d.get("kind")
    if kind == "regression_realism":
        return RealismReport.from_dict(d)
    if kind == "classification_auc":
        return ClassificationReport.from_dict(d)
    raise DataError(f"{p} is not a realcheck report")
