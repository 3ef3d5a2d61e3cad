import numpy as np
import pytest

from vecanon.statslinalg import (STD_FLOOR, denorm, fit_stats, project_2d, save_projection,
                                 sym_power, znorm)
from vecanon.vectorstore import SpeakerVector, VectorSet

from conftest import random_vector_set


def set_from_rows(rows, domain="d"):
    rows = np.asarray(rows, dtype=np.float64)
    vecs = tuple(SpeakerVector(f"u{i}", f"s{i}", domain, r) for i, r in enumerate(rows))
    return VectorSet(rows.shape[1], vecs)


class TestFitStats:
    def test_hand_case_with_floored_dimension(self):
        vs = set_from_rows([[1.0, 0.0], [-1.0, 0.0]])
        stats = fit_stats(vs, lam=0.0)
        assert np.allclose(stats.mean, [0.0, 0.0])
        assert stats.std[0] == pytest.approx(np.sqrt(2.0))
        assert stats.std[1] == STD_FLOOR
        # normalized data is ±1/sqrt(2) in dim 0, exactly 0 in dim 1
        assert np.allclose(stats.covariance, [[1.0, 0.0], [0.0, 0.0]])

    def test_ridge_bounds_diagonal(self, rng):
        vs = random_vector_set(rng, n=12, d=5)
        stats = fit_stats(vs, lam=1.0)
        assert np.all(np.diagonal(stats.covariance) >= 1.0)

    def test_self_znorm_is_standardized(self, rng):
        vs = random_vector_set(rng, n=40, d=6)
        stats = fit_stats(vs)
        z = znorm(vs.matrix, stats)
        assert np.max(np.abs(z.mean(axis=0))) < 1e-12
        assert np.max(np.abs(z.std(axis=0, ddof=1) - 1.0)) < 1e-9

    def test_permutation_invariant(self, rng):
        vs = random_vector_set(rng, n=15, d=4)
        perm = rng.permutation(len(vs))
        shuffled = VectorSet(vs.dimension, tuple(vs.vectors[i] for i in perm))
        a, b = fit_stats(vs, lam=0.5), fit_stats(shuffled, lam=0.5)
        assert np.allclose(a.mean, b.mean)
        assert np.allclose(a.covariance, b.covariance, atol=1e-12)

    def test_psd_without_ridge_pd_with_ridge(self, rng):
        vs = random_vector_set(rng, n=30, d=6)
        w0 = np.linalg.eigvalsh(fit_stats(vs, lam=0.0).covariance)
        assert w0.min() > -1e-10
        lam = 0.3
        w1 = np.linalg.eigvalsh(fit_stats(vs, lam=lam).covariance)
        assert w1.min() >= lam - 1e-10

    def test_needs_two_vectors(self, rng):
        vs = random_vector_set(rng, n=1, d=3)
        with pytest.raises(ValueError, match="at least 2"):
            fit_stats(vs)


class TestZnormDenorm:
    def test_mean_maps_to_zero(self, rng):
        vs = random_vector_set(rng, n=10, d=4)
        stats = fit_stats(vs)
        assert np.allclose(znorm(stats.mean, stats), 0.0)

    def test_zero_denorms_to_mean(self, rng):
        stats = fit_stats(random_vector_set(rng, n=10, d=4))
        assert np.array_equal(denorm(np.zeros(4), stats), stats.mean)

    def test_mutual_inverse(self, rng):
        stats = fit_stats(random_vector_set(rng, n=10, d=4))
        v = rng.normal(size=4) * 10
        assert np.allclose(denorm(znorm(v, stats), stats), v, rtol=1e-12)
        assert np.allclose(znorm(denorm(v, stats), stats), v, rtol=1e-12)

    def test_matches_formula(self, rng):
        stats = fit_stats(random_vector_set(rng, n=12, d=5))
        for _ in range(10):
            v = rng.normal(size=5)
            expected = np.array([(v[j] - stats.mean[j]) / stats.std[j] for j in range(5)])
            assert np.allclose(znorm(v, stats), expected, rtol=1e-15)
            expected_d = np.array([v[j] * stats.std[j] + stats.mean[j] for j in range(5)])
            assert np.allclose(denorm(v, stats), expected_d, rtol=1e-15)

    def test_dimension_mismatch(self, rng):
        stats = fit_stats(random_vector_set(rng, n=5, d=3))
        with pytest.raises(ValueError, match="mismatch"):
            znorm(np.ones(4), stats)


def random_spd(rng, d, jitter=0.1):
    a = rng.normal(size=(d, d))
    return a @ a.T + jitter * np.eye(d)


class TestSymPower:
    def test_identity(self):
        assert np.allclose(sym_power(np.eye(4), 0.5), np.eye(4))
        assert np.allclose(sym_power(np.eye(4), -0.5), np.eye(4))

    def test_analytic_diagonal(self):
        out = sym_power(np.diag([4.0, 9.0]), -0.5)
        assert np.allclose(out, np.diag([0.5, 1.0 / 3.0]))

    def test_square_of_half_power(self, rng):
        for _ in range(10):
            m = random_spd(rng, int(rng.integers(2, 9)))
            root = sym_power(m, 0.5)
            err = np.linalg.norm(root @ root - m) / np.linalg.norm(m)
            assert err < 1e-8

    def test_half_powers_mutually_inverse(self, rng):
        for _ in range(10):
            d = int(rng.integers(2, 9))
            m = random_spd(rng, d, jitter=0.5)
            prod = sym_power(m, 0.5) @ sym_power(m, -0.5)
            assert np.linalg.norm(prod - np.eye(d)) / np.sqrt(d) < 1e-8

    def test_rejects_asymmetric(self):
        m = np.array([[1.0, 2.0], [0.0, 1.0]])
        with pytest.raises(ValueError, match="symmetric"):
            sym_power(m, 0.5)

    def test_rejects_other_exponents(self):
        with pytest.raises(ValueError, match="exponent"):
            sym_power(np.eye(2), 1.0)

    def test_output_is_symmetric(self, rng):
        m = random_spd(rng, 6)
        out = sym_power(m, -0.5)
        assert np.array_equal(out, out.T)

    def test_eigen_floor_bounds_inverse(self):
        m = np.diag([1.0, 0.0])  # singular PSD
        out = sym_power(m, -0.5, eigen_floor=1e-10)
        assert np.isfinite(out).all()
        assert out[1, 1] == pytest.approx(1e5)


class TestProject2D:
    def test_2d_data_is_rotated_not_distorted(self, rng):
        rows = rng.normal(size=(20, 2)) @ np.diag([3.0, 1.0])
        vs = set_from_rows(rows)
        coords = np.array([(x, y) for _, _, x, y in project_2d([vs])])
        centered = rows - rows.mean(axis=0)
        orig = np.linalg.norm(centered[:, None, :] - centered[None, :, :], axis=2)
        proj = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=2)
        assert np.max(np.abs(orig - proj)) < 1e-9

    def test_rank_one_data_errors_with_rank(self, rng):
        base = rng.normal(size=5)
        rows = np.outer(np.arange(1.0, 7.0), base)
        with pytest.raises(ValueError, match="rank 1"):
            project_2d([set_from_rows(rows)])

    def test_reconstruction_error_matches_spectrum(self, rng):
        rows = rng.normal(size=(60, 7)) @ random_spd(rng, 7)
        vs = set_from_rows(rows)
        coords = np.array([(x, y) for _, _, x, y in project_2d([vs])])
        centered = rows - rows.mean(axis=0)
        cov = centered.T @ centered / (len(rows) - 1)
        w = np.sort(np.linalg.eigvalsh(cov))[::-1]
        total_var = np.trace(cov)
        captured = coords.var(axis=0, ddof=1).sum()
        assert abs((total_var - captured) - w[2:].sum()) < 1e-8

    def test_needs_three_vectors(self, rng):
        vs = set_from_rows(rng.normal(size=(2, 3)))
        with pytest.raises(ValueError, match="at least 3"):
            project_2d([vs])

    def test_mixed_sets_keep_order_and_domain(self, rng):
        a = random_vector_set(rng, n=4, d=3, domain="a", prefix="a")
        b = random_vector_set(rng, n=4, d=3, domain="b", prefix="b")
        rows = project_2d([a, b])
        assert [r[0] for r in rows] == a.utterance_ids() + b.utterance_ids()
        assert {r[1] for r in rows[:4]} == {"a"}
        assert {r[1] for r in rows[4:]} == {"b"}

    def test_deterministic_sign_convention(self, rng):
        vs = random_vector_set(rng, n=10, d=4)
        assert project_2d([vs]) == project_2d([vs])

    def test_projection_file(self, rng, tmp_path):
        vs = random_vector_set(rng, n=5, d=3)
        p = tmp_path / "proj.tsv"
        save_projection(project_2d([vs]), p, comments=["format_version=1"])
        lines = [l for l in p.read_text().splitlines() if not l.startswith("#")]
        assert len(lines) == 5
        assert len(lines[0].split("\t")) == 4
