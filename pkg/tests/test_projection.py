import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expand_sparsify._rng import gaussians, row_keys, uniforms
from expand_sparsify.exceptions import ConfigurationError, InputError, ShapeError
from expand_sparsify.projection import (pairwise_coherence, project, project_batch, regenerate_rows,
                                        sample_projection)

from conftest import explicit


def naive_matvec(rows, u):
    out = []
    for row in rows:
        acc = 0.0
        for w, x in zip(row, u):
            acc += w * x
        out.append(acc)
    return np.array(out)


class TestSampling:
    def test_unit_sphere_rows_have_unit_norm(self):
        W = sample_projection(3, 5, "unit_sphere", seed=7)
        np.testing.assert_allclose(np.linalg.norm(W.rows, axis=1), 1.0, rtol=1e-12)

    def test_same_seed_same_matrix(self):
        a = sample_projection(2, 4, "gaussian", seed=1, sigma=1.0)
        b = sample_projection(2, 4, "gaussian", seed=1, sigma=1.0)
        assert np.array_equal(a.rows, b.rows)

    def test_different_seed_differs(self):
        a = sample_projection(4, 4, "gaussian", seed=1)
        b = sample_projection(4, 4, "gaussian", seed=2)
        assert not np.array_equal(a.rows, b.rows)

    def test_entry_mean_near_zero(self):
        sigma = 1.0
        W = sample_projection(100, 2000, "gaussian", seed=3, sigma=sigma)
        assert abs(W.rows.mean()) < 4 * sigma / np.sqrt(100 * 2000)

    def test_entry_variance_matches_sigma(self):
        W = sample_projection(50, 4000, "gaussian", seed=11, sigma=0.5)
        assert W.rows.var() == pytest.approx(0.25, rel=0.02)

    def test_default_sigma_is_inverse_sqrt_n(self):
        W = sample_projection(16, 10, "gaussian", seed=0)
        assert W.sigma == pytest.approx(0.25)

    def test_rows_depend_only_on_seed_and_index(self):
        small = sample_projection(6, 10, "gaussian", seed=99)
        large = sample_projection(6, 50, "gaussian", seed=99)
        assert np.array_equal(small.rows, large.rows[:10])

    def test_subset_regeneration(self):
        W = sample_projection(5, 30, "unit_sphere", seed=4)
        sub = W.select([3, 17, 29])
        assert np.array_equal(regenerate_rows(sub), W.rows[[3, 17, 29]])

    @pytest.mark.parametrize("n,d", [(0, 3), (3, 0), (-1, 2)])
    def test_bad_dimensions(self, n, d):
        with pytest.raises(ConfigurationError):
            sample_projection(n, d)

    @pytest.mark.parametrize("sigma", [0.0, -1.0])
    def test_bad_sigma(self, sigma):
        with pytest.raises(ConfigurationError):
            sample_projection(3, 3, "gaussian", sigma=sigma)

    def test_unknown_distribution(self):
        with pytest.raises(ConfigurationError):
            sample_projection(3, 3, "laplace")

    def test_rows_are_read_only(self):
        W = sample_projection(3, 3)
        with pytest.raises(ValueError):
            W.rows[0, 0] = 1.0


class TestRng:
    def test_uniforms_open_interval(self):
        u = uniforms(row_keys(5, np.arange(100)), 1000)
        assert u.min() > 0.0 and u.max() < 1.0
        assert u.mean() == pytest.approx(0.5, abs=0.005)

    def test_gaussian_moments(self):
        g = gaussians(row_keys(1, np.arange(200)), 1001)
        assert g.shape == (200, 1001)
        assert g.mean() == pytest.approx(0.0, abs=0.01)
        assert g.std() == pytest.approx(1.0, abs=0.01)

    def test_gaussian_tails(self):
        from scipy import stats
        g = gaussians(row_keys(8, np.arange(100)), 2000).ravel()
        assert stats.kstest(g, "norm").pvalue > 1e-3


class TestProject:
    def test_identity(self):
        assert np.array_equal(project(explicit(np.eye(2)), [1.0, 2.0]), [1.0, 2.0])

    def test_small_matrix_against_loop(self):
        rows = [[1, 0], [0, 1], [1, 1]]
        np.testing.assert_array_equal(project(explicit(rows), [1.0, 2.0]), naive_matvec(rows, [1.0, 2.0]))
        np.testing.assert_array_equal(project(explicit(rows), [1.0, 2.0]), [1.0, 2.0, 3.0])

    def test_zero_input(self):
        W = sample_projection(7, 13, seed=2)
        assert np.array_equal(project(W, np.zeros(7)), np.zeros(13))

    def test_matches_left_to_right_loop_exactly(self, rng):
        W = sample_projection(9, 40, seed=5)
        u = rng.normal(size=9)
        assert np.array_equal(project(W, u), naive_matvec(W.rows, u))

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            project(sample_projection(3, 4), np.ones(4))

    def test_non_finite_input(self):
        with pytest.raises(InputError):
            project(sample_projection(3, 4), [1.0, np.nan, 0.0])

    @settings(max_examples=50, deadline=None)
    @given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 2**32))
    def test_linearity(self, a, b, seed):
        W = sample_projection(6, 12, seed=seed)
        r = np.random.default_rng(seed)
        u, v = r.normal(size=6), r.normal(size=6)
        lhs = project(W, a * u + b * v)
        rhs = a * project(W, u) + b * project(W, v)
        scale = np.abs(a * project(W, u)).max() + np.abs(b * project(W, v)).max() + 1e-300
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * scale


class TestProjectBatch:
    def test_singleton(self, rng):
        W = sample_projection(5, 8, seed=1)
        u = rng.normal(size=5)
        assert np.array_equal(project_batch(W, u[None, :])[0], project(W, u))

    def test_rows_match_serial_calls(self, rng):
        W = sample_projection(5, 8, seed=1)
        U = rng.normal(size=(3, 5))
        batch = project_batch(W, U)
        for i in range(3):
            assert np.array_equal(batch[i], project(W, U[i]))

    def test_large_batch_bounded_inputs(self, rng):
        W = sample_projection(50, 5000, seed=3)
        U = rng.uniform(-1e3, 1e3, size=(1000, 50))
        P = project_batch(W, U)
        assert np.all(np.isfinite(P))
        for i in rng.choice(1000, size=5, replace=False):
            assert np.array_equal(P[i], project(W, U[i]))

    def test_chunk_boundaries_do_not_matter(self, rng, monkeypatch):
        import expand_sparsify.projection as pm
        W = sample_projection(4, 100, seed=8)
        U = rng.normal(size=(37, 4))
        full = project_batch(W, U)
        monkeypatch.setattr(pm, "_CHUNK_ELEMENTS", 300)
        assert np.array_equal(project_batch(W, U), full)


class TestCoherence:
    def test_identity_rows(self):
        assert pairwise_coherence(explicit(np.eye(4)))["max_abs_cosine"] == 0.0

    def test_parallel_rows(self):
        res = pairwise_coherence(explicit([[1.0, 2.0], [1.0, 2.0], [0.0, 1.0]]))
        assert res["max_abs_cosine"] == pytest.approx(1.0)

    def test_needs_two_rows(self):
        with pytest.raises(ConfigurationError):
            pairwise_coherence(explicit([[1.0, 0.0]]))

    def test_exhaustive_matches_brute_force(self, rng):
        W = explicit(rng.normal(size=(12, 5)))
        unit = W.rows / np.linalg.norm(W.rows, axis=1, keepdims=True)
        cos = [abs(unit[i] @ unit[j]) for i in range(12) for j in range(i + 1, 12)]
        res = pairwise_coherence(W, sample_pairs=10_000)
        assert res["pairs"] == 66
        assert res["max_abs_cosine"] == pytest.approx(max(cos), rel=1e-12)
        assert res["mean_abs_cosine"] == pytest.approx(np.mean(cos), rel=1e-12)

    def test_high_dimensional_rows_are_almost_orthogonal(self):
        W = sample_projection(1000, 5000, "unit_sphere", seed=9)
        res = pairwise_coherence(W, sample_pairs=20_000, seed=1)
        assert res["mean_abs_cosine"] < 0.05
        # random unit vectors: E|cos| = sqrt(2 / (pi n))
        assert res["mean_abs_cosine"] == pytest.approx(np.sqrt(2 / (np.pi * 1000)), rel=0.05)

    def test_smoke_almost_orthogonality(self):
        W = sample_projection(64, 2000, "unit_sphere", seed=10)
        assert pairwise_coherence(W, sample_pairs=10_000, seed=2)["max_abs_cosine"] < 0.9
