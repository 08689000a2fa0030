"""Parity and determinism checks between the compiled and numpy kernel cores."""

import numpy as np
import pytest

from genkde import _core_np, backend
from conftest import naive_kde_log_density

try:
    from genkde import _core
except ImportError:
    _core = None

needs_compiled = pytest.mark.skipif(_core is None, reason="compiled core not built")


def _random_panel_inputs(seed, m=400, n=250, dim=5):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((m, dim)), rng.standard_normal((n, dim))


class TestNumpyCoreAgainstNaiveOracle:
    def test_kde_panel_log_density(self):
        support, queries = _random_panel_inputs(0, m=100, n=20, dim=2)
        log_p, _, _ = _core_np.kde_panel(support, queries, 0.7)
        for j in range(queries.shape[0]):
            expected = naive_kde_log_density(support, queries[j], 0.7)
            assert abs(log_p[j] - expected) <= 1e-10 * max(1.0, abs(expected))

    def test_weighted_moments_match_direct_softmax(self):
        support, queries = _random_panel_inputs(1, m=60, n=15, dim=3)
        h = 0.4
        log_p, msd, wdiff = _core_np.kde_panel(support, queries, h,
                                               want_sqdist=True, want_diff=True)
        for j in range(queries.shape[0]):
            diff = queries[j] - support
            sq = (diff ** 2).sum(axis=1)
            logg = -sq / (2 * h * h)
            w = np.exp(logg - logg.max())
            w /= w.sum()
            np.testing.assert_allclose(msd[j], (w * sq).sum(), rtol=1e-10)
            np.testing.assert_allclose(wdiff[j], w @ diff, rtol=1e-9, atol=1e-13)

    def test_loo_panel_excludes_self(self):
        rng = np.random.default_rng(2)
        pts = rng.standard_normal((30, 2))
        h = 0.5
        log_p, msd = _core_np.loo_panel(pts, h, want_sqdist=True)
        for i in range(len(pts)):
            others = np.delete(pts, i, axis=0)
            expected = naive_kde_log_density(others, pts[i], h)
            assert abs(log_p[i] - expected) < 1e-10
            diff = pts[i] - others
            sq = (diff ** 2).sum(axis=1)
            w = np.exp(-sq / (2 * h * h))
            np.testing.assert_allclose(msd[i], (w * sq).sum() / w.sum(), rtol=1e-10)

    def test_underflow_guarded_moments(self):
        # all kernel exponents underflow in the linear domain; softmax stays finite
        support = np.zeros((5, 2))
        queries = np.full((1, 2), 100.0)
        log_p, msd, wdiff = _core_np.kde_panel(support, queries, 0.1,
                                               want_sqdist=True, want_diff=True)
        assert np.isfinite(log_p[0]) and log_p[0] < -1e5
        np.testing.assert_allclose(msd[0], 20000.0, rtol=1e-12)
        np.testing.assert_allclose(wdiff[0], [100.0, 100.0], rtol=1e-12)


@needs_compiled
class TestCompiledMatchesNumpy:
    @pytest.mark.parametrize("h", [0.05, 0.5, 3.0])
    def test_kde_panel_parity(self, h):
        support, queries = _random_panel_inputs(3)
        a = _core.kde_panel(support, queries, h, True, True, 0)
        b = _core_np.kde_panel(support, queries, h, True, True)
        np.testing.assert_allclose(a[0], b[0], rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(a[1], b[1], rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(a[2], b[2], rtol=1e-9, atol=1e-12)

    @pytest.mark.parametrize("h", [0.1, 0.8])
    def test_loo_panel_parity(self, h):
        support, _ = _random_panel_inputs(4, m=300)
        a = _core.loo_panel(support, h, True, 0)
        b = _core_np.loo_panel(support, h, True)
        np.testing.assert_allclose(a[0], b[0], rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(a[1], b[1], rtol=1e-10, atol=1e-12)

    def test_thread_count_does_not_change_results(self):
        support, queries = _random_panel_inputs(5)
        single = _core.kde_panel(support, queries, 0.6, True, True, 1)
        multi = _core.kde_panel(support, queries, 0.6, True, True, 2)
        # per-query reductions are sequential, so this is bitwise
        assert np.array_equal(single[0], multi[0])
        assert np.array_equal(single[1], multi[1])
        assert np.array_equal(single[2], multi[2])


class TestBackendSelection:
    def test_active_backend_reported(self):
        assert backend.backend_name() in ("compiled", "numpy")

    def test_threads_env(self, monkeypatch):
        monkeypatch.setenv("GENKDE_THREADS", "3")
        assert backend.thread_count() == 3
        monkeypatch.setenv("GENKDE_THREADS", "bad")
        with pytest.raises(ValueError):
            backend.thread_count()
        monkeypatch.setenv("GENKDE_THREADS", "-1")
        with pytest.raises(ValueError):
            backend.thread_count()

    def test_wrapper_accepts_readonly_arrays(self):
        support, queries = _random_panel_inputs(6, m=50, n=10)
        support.setflags(write=False)
        queries.setflags(write=False)
        log_p, _, _ = backend.kde_panel(support, queries, 0.5)
        assert log_p.shape == (10,)
