"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Thresholds are the stated ones; nothing here is relaxed to make a criterion pass.
"""
import filecmp
import math
import time

import numpy as np

from realcheck.classification import SCORE_KINDS, ScoredSet, roc_curve, score_batch
from realcheck.cli import main
from realcheck.regression import (
    angle_set,
    angle_test,
    gaussian_implied_tail,
    mgt_set,
    monotonicity_table,
    msample_set,
    nll_grid,
    realism_test,
    residuals,
    solid_angle_cdf,
    summarize,
)
from realcheck.simulator import ClassificationRegime, RegressionRegime, gen_classification, gen_regression
from realcheck.statcore import chi2_cdf, tail_mean

from conftest import acceptance_line, chi2_quad

D, K, N = 4, 50, 10000


def _reg(kind, seed, **kw):
    return gen_regression(RegressionRegime(kind, d=D, k=K, n=N, seed=seed, **kw))


def test_c01_calibrated_rejection_rate():
    t0 = time.perf_counter()
    rejections = 0
    for seed in range(100):
        _, verdict = realism_test(mgt_set(_reg("calibrated", seed)), alpha=0.01)
        rejections += verdict != "realistic"
    elapsed = time.perf_counter() - t0
    ok = rejections <= 4 and elapsed <= 60.0
    acceptance_line(1, ok, f"{rejections}/100 calibrated fixtures rejected (<= 4), {elapsed:.1f} s (<= 60 s)")
    assert ok


def test_c02_var_scaled_p_near_zero():
    ps = [realism_test(mgt_set(_reg("var_scaled", seed, scale=0.01)))[0].p_value for seed in range(20)]
    ok = all(p < 1e-10 for p in ps)
    acceptance_line(2, ok, f"max p over 20 var_scaled seeds = {max(ps):.3g} (< 1e-10)")
    assert ok


def test_c03_msample_chi2_on_var_scaled():
    passes = 0
    worst = 1.0
    for seed in range(20):
        gof, verdict = realism_test(msample_set(_reg("var_scaled", seed, scale=0.01)), alpha=0.01)
        passes += verdict == "realistic"
        worst = min(worst, gof.p_value)
    ok = passes >= 18
    acceptance_line(3, ok, f"M_sample passes KS in {passes}/20 var_scaled seeds (>= 18); min p = {worst:.3g}")
    assert ok


def test_c04_fat_tails_exceed_gaussian_bounds():
    data = _reg("fat_tailed", 7, nu=3.0)
    rows = monotonicity_table(data, score="det", n_bins=10, quantile_p=0.99)
    exceed = sum(r.q99_error > r.gauss_bound for r in rows)
    res = residuals(data)
    norms = np.linalg.norm(res.error, axis=1)
    s = summarize(data)
    _, gauss_tm = gaussian_implied_tail(s.cov[s.ok], 0.99)
    ratio = tail_mean(norms, 0.99) / gauss_tm
    ok = exceed >= 8 and ratio >= 1.25
    acceptance_line(4, ok, f"{exceed}/10 bins with q99 > bound (>= 8); tail-mean ratio {ratio:.3f} (>= 1.25)")
    assert ok


def test_c05_orientation():
    p_mis = angle_test(angle_set(_reg("misoriented", 7)))[0].p_value
    passes = 0
    for seed in range(20):
        _, verdict = angle_test(angle_set(_reg("calibrated", seed)), alpha=0.01)
        passes += verdict == "realistic"
    ok_a, ok_b = p_mis < 1e-6, passes >= 18
    acceptance_line("5a", ok_a, f"misoriented angle KS p = {p_mis:.3g} (< 1e-6)")
    acceptance_line("5b", ok_b, f"calibrated angle sets pass in {passes}/20 seeds (>= 18)")
    assert ok_a and ok_b


def test_c06_chi2_cdf_vs_quadrature():
    g = np.random.default_rng(6)
    worst = 0.0
    for i in range(1000):
        d = (1, 2, 4, 8)[i % 4]
        x = float(g.uniform(0.0, 60.0))
        ref = chi2_quad(d, x)
        worst = max(worst, abs(chi2_cdf(d, x) - ref) / ref)
    ok = worst <= 1e-10
    acceptance_line(6, ok, f"max relative error over 1000 points = {worst:.2e} (<= 1e-10)")
    assert ok


def _pair_auc(correct, conf):
    pos = conf[correct]
    neg = conf[~correct]
    diff = pos[:, None] - neg[None, :]
    return (np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0)) / (pos.size * neg.size)


def test_c07_auroc_equals_pair_statistic():
    g = np.random.default_rng(7)
    worst, done = 0.0, 0
    while done < 500:
        n = int(g.integers(2, 201))
        conf = np.round(g.standard_normal(n), int(g.integers(0, 3)))
        correct = g.random(n) < g.uniform(0.05, 0.95)
        if correct.all() or not correct.any():
            continue
        worst = max(worst, abs(roc_curve(ScoredSet(correct, -conf)).auc - _pair_auc(correct, conf)))
        done += 1
    ok = worst <= 1e-12
    acceptance_line(7, ok, f"max |AUROC - pair statistic| over 500 datasets = {worst:.1e} (<= 1e-12)")
    assert ok


def _aurocs(kind, seed=0):
    data = gen_classification(ClassificationRegime(kind, c=19, k=50, n=50000, seed=seed))
    correct, scores = score_batch(data, SCORE_KINDS)
    del data
    return {k: roc_curve(ScoredSet(correct, scores[k])).auc for k in SCORE_KINDS}


def test_c08_score_sanity():
    inf, uni, ood = _aurocs("informative"), _aurocs("uninformative"), _aurocs("out_of_data")
    ok_inf = all(v >= 0.9 for v in inf.values())
    ok_uni = all(abs(v - 0.5) <= 0.02 for v in uni.values())
    ok_ood = all(ood[k] < inf[k] for k in SCORE_KINDS)
    fmt = lambda d: ", ".join(f"{k}={v:.3f}" for k, v in d.items())  # noqa: E731
    acceptance_line(8, ok_inf and ok_uni and ok_ood,
                    f"informative [{fmt(inf)}]; uninformative [{fmt(uni)}]; out_of_data [{fmt(ood)}]")
    assert ok_inf and ok_uni and ok_ood


def test_c09_solid_angle_closed_form():
    err = abs(solid_angle_cdf(4, math.pi / 4) - (0.5 - 1.0 / math.pi))
    ok = err <= 1e-9
    acceptance_line(9, ok, f"|F(pi/4) - (1/2 - 1/pi)| = {err:.1e} (<= 1e-9)")
    assert ok


def test_c10_cli_determinism(tmp_path):
    runs = {
        "sim_reg": ["simulate", "--task", "regression", "--regime", "fat_tailed", "--n", "2000", "--seed", "3", "--out", "{o}"],
        "sim_cls": ["simulate", "--task", "classification", "--regime", "informative", "--n", "500", "--seed", "3", "--out", "{o}"],
        "realism": ["regression-realism", "--input", "{reg}", "--out", "{o}"],
        "realism_csv": ["regression-realism", "--input", "{reg}", "--format", "csv_bundle", "--out", "{o}"],
        "auc": ["classification-auc", "--input", "{cls}", "--reject", "--out", "{o}"],
        "auc_csv": ["classification-auc", "--input", "{cls}", "--format", "csv_bundle", "--out", "{o}"],
        "nll": ["nll-grid", "--err-range", "0:3", "--sigma-range", "0.1:3", "--steps", "25", "--out", "{o}"],
    }
    same = {}
    for name, argv in runs.items():
        outs = []
        for rep in (1, 2):
            o = tmp_path / f"{name}.{rep}"
            args = [a.format(o=o, reg=tmp_path / "sim_reg.1", cls=tmp_path / "sim_cls.1") for a in argv]
            main(args)
            outs.append(o)
        if outs[0].is_dir():
            cmp = filecmp.dircmp(outs[0], outs[1])
            same[name] = not (cmp.diff_files or cmp.left_only or cmp.right_only) and all(
                filecmp.cmp(outs[0] / f, outs[1] / f, shallow=False) for f in cmp.common_files
            )
        else:
            same[name] = outs[0].exists() and filecmp.cmp(outs[0], outs[1], shallow=False)
    ok = all(same.values())
    acceptance_line(10, ok, "byte-identical reruns: " + ", ".join(f"{k}={'yes' if v else 'NO'}" for k, v in same.items()))
    assert ok


def test_c11_nll_realism_decoupled():
    grid = nll_grid((0.05, 5.0), (0.05, 5.0), 50)
    diag = grid[grid[:, 0] == grid[:, 1]]
    span = float(diag[:, 2].max() - diag[:, 2].min())
    ok = diag.shape[0] == 50 and np.all(diag[:, 3] == 0.0) and span >= 2.0
    acceptance_line(11, ok, f"{diag.shape[0]} diagonal points, max realism {diag[:, 3].max():.1g} (= 0), nll span {span:.3f} (>= 2)")
    assert ok
