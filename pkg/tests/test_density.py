"""Kernels, KDE, targets, sampling, whitening, and sample-set I/O."""

import struct

import numpy as np
import pytest

from genkde.density import (
    GaussianKde,
    SampleSet,
    TargetDistribution,
    log_gaussian_kernel,
    read_tensor,
    whiten,
    write_tensor,
)
from genkde.exceptions import NumericsError
from conftest import naive_kde_log_density

LOG_2PI = np.log(2.0 * np.pi)


class TestLogGaussianKernel:
    def test_zero_offset_normalizer_1d(self):
        np.testing.assert_allclose(log_gaussian_kernel(1.0, [0.0]), -0.5 * LOG_2PI)

    def test_zero_offset_normalizer_2d(self):
        np.testing.assert_allclose(log_gaussian_kernel(1.0, [0.0, 0.0]), -LOG_2PI)

    def test_matches_direct_gaussian_pdf(self):
        # product of per-coordinate normal pdfs with stddev h
        h, diff = 0.5, np.array([1.0, 0.0])
        direct = np.log(np.prod(np.exp(-diff ** 2 / (2 * h * h)) / np.sqrt(2 * np.pi * h * h)))
        np.testing.assert_allclose(log_gaussian_kernel(h, diff), direct, rtol=1e-12)

    @pytest.mark.parametrize("h", [0.0, -1.0, np.nan, np.inf])
    def test_invalid_bandwidth(self, h):
        with pytest.raises(ValueError):
            log_gaussian_kernel(h, [0.0])

    def test_finite_for_huge_offsets(self):
        assert np.isfinite(log_gaussian_kernel(0.1, np.full(10, 50.0)))


class TestKdeLogDensity:
    def test_single_point_support_is_the_kernel(self):
        kde = GaussianKde(SampleSet([[0.0]]), 1.0)
        np.testing.assert_allclose(kde.log_density([0.0]), -0.5 * LOG_2PI)

    def test_symmetric_pair(self):
        kde = GaussianKde(SampleSet([[-1.0], [1.0]]), 1.0)
        expected = -0.5 * LOG_2PI - 0.5  # log N(1; 0, 1)
        np.testing.assert_allclose(kde.log_density([0.0]), expected, rtol=1e-12)

    def test_matches_naive_double_loop(self, rng):
        support = rng.standard_normal((100, 2))
        kde = GaussianKde(SampleSet(support), 0.6)
        query = np.array([0.3, -0.4])
        expected = naive_kde_log_density(support, query, 0.6)
        assert abs(kde.log_density(query) - expected) <= 1e-10 * abs(expected)

    def test_dimension_mismatch(self):
        kde = GaussianKde(SampleSet([[0.0, 0.0]]), 1.0)
        with pytest.raises(ValueError):
            kde.log_density([0.0])

    def test_no_spurious_underflow(self, rng):
        # one support point within 37 bandwidths keeps the log density finite
        support = np.vstack([rng.standard_normal((20, 3)) + 100.0, [[3.0, 0.0, 0.0]]])
        kde = GaussianKde(SampleSet(support), 0.1)
        assert np.isfinite(kde.log_density([3.0, 0.0, 0.1]))

    def test_integrates_to_one_in_1d(self, rng):
        for m in (1, 4, 10):
            support = rng.standard_normal((m, 1)) * 2.0
            kde = GaussianKde(SampleSet(support), 0.5)
            grid = np.linspace(support.min() - 10.0, support.max() + 10.0, 20001)
            dens = np.exp(kde.log_density_batch(grid.reshape(-1, 1)))
            np.testing.assert_allclose(np.trapezoid(dens, grid), 1.0, atol=1e-4)

    def test_invalid_bandwidth(self):
        with pytest.raises(ValueError):
            GaussianKde(SampleSet([[0.0]]), 0.0)


class TestTargetDistribution:
    def test_standard_normal_origin(self):
        t = TargetDistribution.standard_normal(2)
        np.testing.assert_allclose(t.log_density([0.0, 0.0]), -LOG_2PI, rtol=1e-12)

    def test_single_component_mixture_equals_standard_normal(self, rng):
        normal = TargetDistribution.standard_normal(3)
        mog = TargetDistribution.mixture_of_gaussians([(1.0, np.zeros(3), 1.0)])
        queries = rng.standard_normal((50, 3)) * 3.0
        np.testing.assert_allclose(mog.log_density_batch(queries),
                                   normal.log_density_batch(queries), rtol=1e-14)

    def test_symmetric_two_component_midpoint(self):
        mog = TargetDistribution.mixture_of_gaussians([(0.5, [3.0], 1.0), (0.5, [-3.0], 1.0)])
        expected = -0.5 * LOG_2PI - 4.5  # log N(3; 0, 1)
        np.testing.assert_allclose(mog.log_density([0.0]), expected, rtol=1e-12)

    def test_matches_naive_mixture_sum(self, rng):
        comps = [(0.2, rng.standard_normal(2), 0.5),
                 (0.5, rng.standard_normal(2), 1.5),
                 (0.3, rng.standard_normal(2), 0.9)]
        mog = TargetDistribution.mixture_of_gaussians(comps)
        queries = rng.standard_normal((40, 2)) * 2.0
        naive = np.zeros(40)
        for w, mu, sd in comps:
            sq = ((queries - mu) ** 2).sum(axis=1)
            naive += w * np.exp(-sq / (2 * sd * sd)) / (2 * np.pi * sd * sd)
        np.testing.assert_allclose(mog.log_density_batch(queries), np.log(naive), atol=1e-12)

    def test_score_matches_finite_differences(self, rng):
        mog = TargetDistribution.mixture_of_gaussians(
            [(0.4, [1.0, 0.0], 0.7), (0.6, [-1.0, 0.5], 1.3)])
        q = rng.standard_normal((5, 2))
        score = mog.score_batch(q)
        eps = 1e-6
        for j in range(5):
            for k in range(2):
                up, dn = q[j].copy(), q[j].copy()
                up[k] += eps
                dn[k] -= eps
                fd = (mog.log_density(up) - mog.log_density(dn)) / (2 * eps)
                np.testing.assert_allclose(score[j, k], fd, rtol=1e-6, atol=1e-9)

    def test_weight_validation(self):
        with pytest.raises(ValueError):
            TargetDistribution.mixture_of_gaussians([(0.5, [0.0], 1.0), (0.6, [1.0], 1.0)])
        with pytest.raises(ValueError):
            TargetDistribution.mixture_of_gaussians([(1.0, [0.0], -1.0)])
        with pytest.raises(ValueError):
            TargetDistribution.mixture_of_gaussians(
                [(0.5, [0.0], 1.0), (0.5, [1.0, 1.0], 1.0)])

    def test_dim_mismatch(self):
        t = TargetDistribution.standard_normal(3)
        with pytest.raises(ValueError):
            t.log_density([0.0, 0.0])


class TestSampling:
    def test_standard_normal_moments(self):
        t = TargetDistribution.standard_normal(5)
        s = t.sample(10000, np.random.default_rng(0))
        assert np.all(np.abs(s.points.mean(axis=0)) < 0.05)
        assert np.all(np.abs(s.points.var(axis=0) - 1.0) < 0.05)

    def test_mixture_component_proportions(self):
        mog = TargetDistribution.mixture_of_gaussians(
            [(0.3, [3.0], 1.0), (0.7, [-3.0], 1.0)])
        _, labels = mog.sample(10000, np.random.default_rng(1), return_labels=True)
        props = np.bincount(labels, minlength=2) / 10000
        assert abs(props[0] - 0.3) < 0.02
        assert abs(props[1] - 0.7) < 0.02

    def test_same_seed_is_bitwise_identical(self):
        mog = TargetDistribution.mixture_of_gaussians(
            [(0.5, [2.0, 0.0], 1.0), (0.5, [-2.0, 0.0], 1.0)])
        a = mog.sample(500, np.random.default_rng(7))
        b = mog.sample(500, np.random.default_rng(7))
        assert np.array_equal(a.points, b.points)

    def test_invalid_count(self):
        t = TargetDistribution.standard_normal(1)
        with pytest.raises(ValueError):
            t.sample(0, np.random.default_rng(0))


class TestWhiten:
    def _sample_cov(self, pts):
        return np.atleast_2d(np.cov(pts, rowvar=False, ddof=1))

    def test_idempotent_on_white_data(self, rng):
        s = SampleSet(rng.standard_normal((500, 3)))
        out = whiten(s)
        np.testing.assert_allclose(self._sample_cov(out.points), np.eye(3), atol=1e-8)
        np.testing.assert_allclose(out.points.mean(axis=0), 0.0, atol=1e-12)

    def test_stretched_data_recovers_identity(self, rng):
        pts = rng.standard_normal((400, 2)) @ np.diag([3.0, 1.0])
        out = whiten(SampleSet(pts))
        np.testing.assert_allclose(self._sample_cov(out.points), np.eye(2), atol=1e-8)

    def test_affine_invariance(self, rng):
        base = rng.standard_normal((300, 3))
        a = rng.standard_normal((3, 3)) + 2.0 * np.eye(3)
        b = rng.standard_normal(3) * 5.0
        out = whiten(SampleSet(base @ a + b))
        np.testing.assert_allclose(self._sample_cov(out.points), np.eye(3), atol=1e-8)

    def test_constant_dataset_is_degenerate(self):
        with pytest.raises(NumericsError):
            whiten(SampleSet(np.ones((50, 2))))

    def test_needs_more_samples_than_dims(self, rng):
        with pytest.raises(ValueError):
            whiten(SampleSet(rng.standard_normal((3, 3))))


class TestSampleSetIO:
    def test_validation(self):
        with pytest.raises(ValueError):
            SampleSet(np.empty((0, 2)))
        with pytest.raises(ValueError):
            SampleSet([[np.nan, 0.0]])
        with pytest.raises(ValueError):
            SampleSet(np.zeros((2, 2, 2)))

    def test_points_are_read_only(self):
        s = SampleSet([[1.0, 2.0]])
        with pytest.raises(ValueError):
            s.points[0, 0] = 3.0

    def test_csv_round_trip(self, rng, tmp_path):
        s = SampleSet(rng.standard_normal((20, 4)))
        path = tmp_path / "samples.csv"
        s.to_csv(path)
        np.testing.assert_array_equal(SampleSet.from_csv(path).points, s.points)

    def test_binary_round_trip(self, rng, tmp_path):
        s = SampleSet(rng.standard_normal((17, 3)))
        path = tmp_path / "samples.gkde"
        s.to_binary(path)
        np.testing.assert_array_equal(SampleSet.from_binary(path).points, s.points)

    def test_binary_layout(self, tmp_path):
        path = tmp_path / "one.gkde"
        SampleSet([[1.5, -2.0]]).to_binary(path)
        raw = path.read_bytes()
        assert raw[:4] == b"GKDE"
        version, rows, cols = struct.unpack("<III", raw[4:16])
        assert (version, rows, cols) == (1, 1, 2)
        np.testing.assert_array_equal(np.frombuffer(raw[16:], dtype="<f8"), [1.5, -2.0])

    def test_binary_rejects_bad_magic_and_nan(self, tmp_path):
        path = tmp_path / "bad.gkde"
        path.write_bytes(b"NOPE" + struct.pack("<III", 1, 1, 1) + struct.pack("<d", 1.0))
        with pytest.raises(ValueError):
            SampleSet.from_binary(path)
        path.write_bytes(b"GKDE" + struct.pack("<III", 1, 1, 1) + struct.pack("<d", np.nan))
        with pytest.raises(ValueError):
            SampleSet.from_binary(path)
        path.write_bytes(b"GKDE" + struct.pack("<III", 2, 1, 1) + struct.pack("<d", 1.0))
        with pytest.raises(ValueError):
            SampleSet.from_binary(path)

    def test_csv_rejects_non_finite(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\nnan,0.0\n")
        with pytest.raises(ValueError):
            SampleSet.from_csv(path)

    def test_tensor_block_round_trip(self, rng, tmp_path):
        path = tmp_path / "blocks.bin"
        a = rng.standard_normal((3, 5))
        b = rng.standard_normal((1, 2))
        with open(path, "wb") as fh:
            write_tensor(fh, a)
            write_tensor(fh, b)
        with open(path, "rb") as fh:
            np.testing.assert_array_equal(read_tensor(fh), a)
            np.testing.assert_array_equal(read_tensor(fh), b)
