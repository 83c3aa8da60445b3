import numpy as np
import pytest

from r3lab.metrics import (
    GaussianSummary,
    classification_report,
    fit_gaussian,
    frechet_distance,
    mode_coverage,
    proxy_fd,
)
from r3lab.metrics import _sqrt_psd
from r3lab.testbeds import RingGmmSpec, sample_ring_gmm

RIDGE = 1e-6


def summary_1d(mean, var):
    return GaussianSummary(np.array([mean]), np.array([[var]]))


class TestFitGaussian:
    def test_two_point_moments(self):
        summary = fit_gaussian(np.array([[0.0, 0.0], [2.0, 0.0]]))
        np.testing.assert_allclose(summary.mean, [1.0, 0.0])
        np.testing.assert_allclose(summary.covariance, [[2.0 + RIDGE, 0.0], [0.0, RIDGE]])

    def test_degenerate_rows_leave_only_ridge(self):
        summary = fit_gaussian(np.tile([3.0, -1.0], (5, 1)))
        np.testing.assert_allclose(summary.covariance, RIDGE * np.eye(2))

    def test_concentration_to_identity(self):
        rng = np.random.default_rng(0)
        samples = rng.standard_normal((10_000, 3))
        summary = fit_gaussian(samples)
        assert np.max(np.abs(summary.covariance - np.eye(3))) < 0.1

    def test_needs_two_rows(self):
        with pytest.raises(ValueError):
            fit_gaussian(np.ones((1, 2)))


class TestFrechetDistance:
    def test_identical_is_zero(self):
        rng = np.random.default_rng(1)
        summary = fit_gaussian(rng.standard_normal((50, 4)))
        assert frechet_distance(summary, summary) == pytest.approx(0.0, abs=1e-9)

    def test_mean_shift_only(self):
        assert frechet_distance(summary_1d(0.0, 1.0), summary_1d(3.0, 1.0)) == pytest.approx(9.0, abs=1e-9)

    def test_variance_gap(self):
        assert frechet_distance(summary_1d(0.0, 1.0), summary_1d(0.0, 4.0)) == pytest.approx(1.0, abs=1e-9)

    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(2)
        a = fit_gaussian(rng.standard_normal((40, 4)))
        b = fit_gaussian(rng.standard_normal((40, 4)) * 2 + 1)
        assert frechet_distance(a, b) == pytest.approx(frechet_distance(b, a), rel=1e-9)
        assert frechet_distance(a, b) >= 0.0

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        xa = rng.standard_normal((60, 4))
        xb = rng.standard_normal((60, 4)) * 1.5
        shift = np.array([2.0, -1.0, 0.5, 3.0])
        base = frechet_distance(fit_gaussian(xa), fit_gaussian(xb))
        shifted = frechet_distance(fit_gaussian(xa + shift), fit_gaussian(xb + shift))
        assert shifted == pytest.approx(base, abs=1e-8)

    def test_quadratic_scaling(self):
        rng = np.random.default_rng(4)
        xa = rng.standard_normal((60, 4))
        xb = rng.standard_normal((60, 4)) + 0.5
        base = frechet_distance(fit_gaussian(xa), fit_gaussian(xb))
        for a in (2.0, 5.0):
            scaled = frechet_distance(fit_gaussian(a * xa), fit_gaussian(a * xb))
            # The additive ridge breaks exact a^2 homogeneity at this magnitude.
            assert scaled == pytest.approx(a * a * base, rel=1e-4)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            frechet_distance(summary_1d(0, 1), fit_gaussian(np.random.default_rng(0).standard_normal((5, 2))))

    def test_sqrt_psd_reconstructs(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            m = rng.standard_normal((6, 6))
            psd = m @ m.T
            root = _sqrt_psd(psd)
            assert np.max(np.abs(root @ root - psd)) < 1e-8


class TestProxyFd:
    def test_identical_sets(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((100, 2))
        assert proxy_fd(x, x, "points2d") == pytest.approx(0.0, abs=1e-9)

    def test_pure_translation(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((200, 2))
        shifted = x + np.array([10.0, 0.0])
        assert proxy_fd(x, shifted, "points2d") == pytest.approx(100.0, abs=1e-6)

    def test_collapse_scores_worse_than_faithful_sample(self):
        spec = RingGmmSpec()
        rng = np.random.default_rng(8)
        real = sample_ring_gmm(spec, 512, rng)
        faithful = sample_ring_gmm(spec, 512, rng)
        collapsed = np.tile(spec.centers()[0], (512, 1))
        good = proxy_fd(real, faithful, "points2d")
        bad = proxy_fd(real, collapsed, "points2d")
        assert bad > good
        # Regression pair locked from this exact configuration.
        assert bad > 1.0
        assert good < 0.01

    def test_image_domain_uses_fixed_projection(self):
        rng = np.random.default_rng(9)
        x = rng.random((64, 256))
        y = rng.random((64, 256))
        first = proxy_fd(x, y, "image16")
        again = proxy_fd(x, y, "image16")
        assert first == again
        assert proxy_fd(x, x, "image16") == pytest.approx(0.0, abs=1e-9)

    def test_unknown_domain(self):
        with pytest.raises(ValueError):
            proxy_fd(np.ones((4, 2)), np.ones((4, 2)), "points3d")


class TestModeCoverage:
    def test_samples_on_all_centers(self):
        spec = RingGmmSpec()
        modes, hq = mode_coverage(spec.centers(), spec)
        assert modes == 8
        assert hq == 1.0

    def test_collapse_signature(self):
        spec = RingGmmSpec()
        samples = np.tile(spec.centers()[3], (50, 1))
        modes, hq = mode_coverage(samples, spec)
        assert modes == 1
        assert hq == 1.0

    def test_far_samples_cover_nothing(self):
        spec = RingGmmSpec()
        rng = np.random.default_rng(10)
        angles = rng.uniform(0, 2 * np.pi, 100)
        samples = 100.0 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        modes, hq = mode_coverage(samples, spec)
        assert modes == 0
        assert hq == 0.0

    def test_row_permutation_invariance(self):
        spec = RingGmmSpec()
        rng = np.random.default_rng(11)
        samples = sample_ring_gmm(spec, 300, rng)
        base = mode_coverage(samples, spec)
        shuffled = mode_coverage(samples[rng.permutation(300)], spec)
        assert base == shuffled

    def test_ring_rotation_equivariance(self):
        spec = RingGmmSpec()
        rng = np.random.default_rng(12)
        samples = sample_ring_gmm(spec, 500, rng)
        angle = 2 * np.pi / spec.k
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        assert mode_coverage(samples @ rot.T, spec) == mode_coverage(samples, spec)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mode_coverage(np.empty((0, 2)), RingGmmSpec())


class TestClassificationReport:
    def test_hand_counted_example(self):
        report = classification_report([0, 0, 1, 1], [0, 1, 1, 1], 2)
        assert report.precision[0] == pytest.approx(1.0)
        assert report.recall[0] == pytest.approx(0.5)
        assert report.f1[0] == pytest.approx(0.6667, abs=1e-4)
        assert report.precision[1] == pytest.approx(0.6667, abs=1e-4)
        assert report.recall[1] == pytest.approx(1.0)
        assert report.f1[1] == pytest.approx(0.8)
        assert report.macro_f1 == pytest.approx(0.7333, abs=1e-4)

    def test_perfect_predictions(self):
        report = classification_report([0, 1, 2, 0], [0, 1, 2, 0], 3)
        assert np.all(report.precision == 1.0)
        assert np.all(report.recall == 1.0)
        assert report.macro_f1 == 1.0

    def test_reference_macro_values(self):
        # Macro mean of per-class F1 (0.98, 0.11, 0.85) and recall
        # (0.99, 0.06, 0.99) from the locked reference table.
        assert np.mean([0.98, 0.11, 0.85]) == pytest.approx(0.6467, abs=5e-5)
        assert np.mean([0.99, 0.06, 0.99]) == pytest.approx(0.68, abs=1e-12)

    def test_never_predicted_class_conventions(self):
        report = classification_report([0, 1, 1], [0, 0, 0], 2)
        assert report.precision[1] == 0.0
        assert report.recall[1] == 0.0
        assert report.f1[1] == 0.0

    def test_support_weighted_recall_is_accuracy(self):
        rng = np.random.default_rng(13)
        labels = rng.integers(0, 3, 500)
        preds = rng.integers(0, 3, 500)
        report = classification_report(labels, preds, 3)
        accuracy = float(np.mean(labels == preds))
        weighted = float(np.sum(report.recall * report.support) / report.support.sum())
        assert weighted == pytest.approx(accuracy, rel=1e-12)

    def test_macro_is_unweighted_mean(self):
        rng = np.random.default_rng(14)
        labels = rng.integers(0, 4, 200)
        preds = rng.integers(0, 4, 200)
        report = classification_report(labels, preds, 4)
        assert report.macro_precision == pytest.approx(report.precision.mean())
        assert report.macro_recall == pytest.approx(report.recall.mean())
        assert report.macro_f1 == pytest.approx(report.f1.mean())

    def test_errors(self):
        with pytest.raises(ValueError):
            classification_report([0, 1], [0], 2)
        with pytest.raises(ValueError):
            classification_report([0, 2], [0, 1], 2)

    def test_rows_table_form(self):
        report = classification_report([0, 1, 1], [0, 1, 0], 2)
        rows = report.rows()
        assert rows[0]["class"] == "0"
        assert rows[-1]["class"] == "macro"
        assert rows[-1]["support"] == 3
