import numpy as np
import pytest

from realcheck.classification import ClassificationBatch, score_batch, scored_set, roc_curve
from realcheck.errors import InvalidRegime, NeedsSamples
from realcheck.regression import mgt_set, realism_test
from realcheck.simulator import (
    ClassificationRegime,
    RegressionRegime,
    gen_classification,
    gen_regression,
    random_rotations,
)
from realcheck.statcore import describe
from realcheck import rng as rc_rng


class TestRegimes:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(kind="nope"),
            dict(kind="var_scaled", scale=0.0),
            dict(kind="fat_tailed", nu=1.5),
            dict(kind="calibrated", nu=2.0),
            dict(kind="calibrated", d=4, k=5),
            dict(kind="biased", bias=(1.0,)),
            dict(kind="misoriented", d=1, k=10),
            dict(kind="calibrated", seed=-1),
        ],
    )
    def test_invalid_regression(self, kw):
        with pytest.raises(InvalidRegime):
            gen_regression(RegressionRegime(**kw))

    @pytest.mark.parametrize("kw", [dict(kind="x"), dict(c=1), dict(k=0)])
    def test_invalid_classification(self, kw):
        with pytest.raises(InvalidRegime):
            gen_classification(ClassificationRegime(**kw))


class TestRegression:
    def test_deterministic(self):
        reg = RegressionRegime("fat_tailed", n=300, seed=123)
        a, b = gen_regression(reg), gen_regression(reg)
        assert np.array_equal(a.samples, b.samples) and np.array_equal(a.y_gt, b.y_gt)
        c = gen_regression(RegressionRegime("fat_tailed", n=300, seed=124))
        assert not np.array_equal(a.y_gt, c.y_gt)

    def test_records_independent_of_n(self):
        small = gen_regression(RegressionRegime("calibrated", n=50, seed=5))
        big = gen_regression(RegressionRegime("calibrated", n=25000, seed=5))
        assert np.array_equal(small.samples, big.samples[:50])
        assert np.array_equal(small.y_gt, big.y_gt[:50])

    def test_moment_matched(self):
        data, truth = gen_regression(RegressionRegime("calibrated", d=3, k=20, n=200, seed=2), with_truth=True)
        cov = np.stack([np.cov(s, rowvar=False) for s in data.samples])
        np.testing.assert_allclose(cov, truth, rtol=1e-9, atol=1e-12)
        w = np.linalg.eigvalsh(truth)
        assert np.all(w[:, -1] / w[:, 0] <= 100.0 * (1 + 1e-9))

    def test_var_scaled_cov(self):
        data, truth = gen_regression(RegressionRegime("var_scaled", scale=0.25, n=20, seed=2), with_truth=True)
        cov = np.stack([np.cov(s, rowvar=False) for s in data.samples])
        np.testing.assert_allclose(cov, 0.25 * truth, rtol=1e-9)

    def test_misoriented_swaps_axes(self):
        data, truth = gen_regression(RegressionRegime("misoriented", n=20, seed=2), with_truth=True)
        for s, t in zip(data.samples, truth):
            c = np.cov(s, rowvar=False)
            np.testing.assert_allclose(np.linalg.eigvalsh(c), np.linalg.eigvalsh(t), rtol=1e-8)
            top_t = np.linalg.eigh(t)[1][:, -1]
            low_c = np.linalg.eigh(c)[1][:, 0]
            assert abs(top_t @ low_c) == pytest.approx(1.0, abs=1e-8)

    def test_sample_mean_close_to_truth(self):
        # the emitted sample mean is mu_true itself, so errors have trace-scale size
        data, truth = gen_regression(RegressionRegime("calibrated", n=2000, seed=9), with_truth=True)
        mean = data.samples.mean(axis=1)
        err = np.linalg.norm(mean - data.y_gt, axis=1)
        assert np.median(err / np.sqrt(np.trace(truth, axis1=1, axis2=2))) < 1.0

    def test_calibrated_passes(self):
        data = gen_regression(RegressionRegime("calibrated", n=10000, k=50, seed=7))
        assert realism_test(mgt_set(data))[1] == "realistic"

    def test_var_scaled_fails(self):
        data = gen_regression(RegressionRegime("var_scaled", scale=0.01, n=10000, seed=7))
        assert realism_test(mgt_set(data))[0].p_value < 1e-10

    def test_fat_tail_kurtosis(self):
        data = gen_regression(RegressionRegime("fat_tailed", nu=3.0, n=10000, seed=7))
        assert describe(mgt_set(data).values)["kurtosis"] >= 6.0 + 2.0

    def test_bias_shifts_errors(self):
        b = (3.0, 0.0, -3.0, 0.0)
        data = gen_regression(RegressionRegime("biased", bias=b, n=5000, seed=1))
        err = data.y_gt - data.samples.mean(axis=1)
        np.testing.assert_allclose(err.mean(axis=0), b, atol=0.15)

    def test_rotations_orthonormal(self):
        z = rc_rng.normals(0, np.arange(30), 1, 25).reshape(30, 5, 5)
        q = random_rotations(z)
        np.testing.assert_allclose(np.einsum("nji,njk->nik", q, q), np.broadcast_to(np.eye(5), (30, 5, 5)), atol=1e-13)


class TestRng:
    def test_uniform_range_and_moments(self):
        u = rc_rng.uniforms(1, np.arange(2000), 0, 50)
        assert u.min() > 0.0 and u.max() < 1.0
        assert abs(u.mean() - 0.5) < 0.005

    def test_normals(self):
        z = rc_rng.normals(3, np.arange(4000), 2, 25).ravel()
        assert abs(z.mean()) < 0.01 and abs(z.std() - 1.0) < 0.01

    def test_gamma_moments(self):
        g = rc_rng.gammas(5, np.arange(100000), 16, 1.5)
        assert g.mean() == pytest.approx(1.5, rel=0.02)
        assert g.var() == pytest.approx(1.5, rel=0.05)

    def test_purposes_independent(self):
        a = rc_rng.uniforms(1, np.arange(5), 0, 4)
        b = rc_rng.uniforms(1, np.arange(5), 1, 4)
        assert not np.any(a == b)


class TestClassification:
    def test_row_sums(self):
        b = gen_classification(ClassificationRegime("out_of_data", n=500, seed=1))
        assert b.probs.shape == (500, 50, 19)
        assert np.max(np.abs(b.probs.sum(axis=2) - 1.0)) <= 1e-12

    def test_deterministic_and_prefix_stable(self):
        a = gen_classification(ClassificationRegime("informative", n=600, k=40, seed=3))
        b = gen_classification(ClassificationRegime("informative", n=200, k=40, seed=3))
        assert np.array_equal(a.probs[:200], b.probs) and np.array_equal(a.gt[:200], b.gt)

    def test_single_sample(self):
        b = gen_classification(ClassificationRegime("informative", n=100, k=1, seed=0))
        recs = b.records()
        assert len(recs) == 100
        score_batch(b, ("max_prob", "entropy"))
        with pytest.raises(NeedsSamples):
            score_batch(b, ("mi",))
        with pytest.raises(NeedsSamples):
            score_batch(b, ("win_var",))

    def test_informative_separates(self):
        b = gen_classification(ClassificationRegime("informative", n=5000, seed=2))
        aucs = [roc_curve(scored_set(b, k)).auc for k in ("max_prob", "entropy", "win_var", "mi")]
        assert min(aucs) >= 0.9
        assert max(aucs) - min(aucs) < 0.05

    def test_uninformative_accuracy(self):
        b = gen_classification(ClassificationRegime("uninformative", n=5000, seed=2))
        correct, _ = score_batch(b, ("max_prob",))
        assert correct.mean() == pytest.approx(0.7, abs=0.02)
        assert isinstance(b, ClassificationBatch)
