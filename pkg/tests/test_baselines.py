import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chansim import (
    ChannelDataset,
    CovarianceModel,
    analytic_mmse,
    gaussian_generate,
    lmmse_estimate,
    lmmse_fit,
    nmse,
    normalize_dataset,
    pca_expected_nmse,
    pca_fit,
    pca_roundtrip,
    sample_mean_cov,
    snr_to_noise_var,
)
from chansim.baselines import gaussian_generator, sorted_eigh
from chansim.errors import ArgumentError, NumericalError, StructuralError
from chansim.stochastics import RngStream, sample_complex_gaussian, standard_complex_normal
from conftest import random_covariance, rel_fro


def model(c, mean=None):
    return CovarianceModel(np.zeros(len(c)) if mean is None else mean, c, source="analytic")


def draw(c, n, seed):
    lam, u = np.linalg.eigh(c)
    f = u * np.sqrt(np.clip(lam, 0, None))
    return sample_complex_gaussian(np.zeros(len(c)), f, n, RngStream(seed))


class TestCovarianceModel:
    def test_rejects_non_hermitian(self):
        with pytest.raises(StructuralError):
            CovarianceModel(np.zeros(2), np.array([[1, 1], [0, 1]]), "analytic")

    def test_rejects_mean_mismatch(self):
        with pytest.raises(StructuralError):
            CovarianceModel(np.zeros(3), np.eye(2), "analytic")

    def test_rejects_source(self):
        with pytest.raises(ArgumentError):
            CovarianceModel(np.zeros(2), np.eye(2), "guess")


class TestSampleStatistics:
    def test_single_sample(self):
        h = np.array([1 + 2j, -0.5j, 3.0])
        cov = sample_mean_cov(ChannelDataset(h[None, :]))
        assert np.allclose(cov.covariance, np.outer(h, h.conj()))
        assert np.allclose(cov.mean, h)
        assert not cov.centered

    def test_psd(self):
        x = standard_complex_normal(np.random.default_rng(0), (50, 8))
        assert np.linalg.eigvalsh(sample_mean_cov(x).covariance).min() >= -1e-12

    def test_concentration(self):
        c = random_covariance(32, 1)
        x = draw(c, 500 * 32, 2)
        assert rel_fro(sample_mean_cov(x).covariance, c) <= 0.1

    def test_centered(self):
        x = standard_complex_normal(np.random.default_rng(3), (4000, 3)) + np.array([1.0, 2j, -1.0])
        cov = sample_mean_cov(x, centered=True)
        assert np.allclose(cov.covariance, np.eye(3), atol=0.1)

    def test_empty(self):
        with pytest.raises(ArgumentError):
            sample_mean_cov(np.zeros((0, 3)))


class TestNormalize:
    def test_already_normalized(self):
        x = np.ones((4, 3), dtype=complex)
        ds, scale = normalize_dataset(ChannelDataset(x))
        assert scale == 1.0

    def test_scale_invariance(self):
        x = standard_complex_normal(np.random.default_rng(4), (10, 5))
        a, _ = normalize_dataset(ChannelDataset(x))
        b, _ = normalize_dataset(ChannelDataset(2 * x))
        assert np.allclose(a.samples, b.samples, rtol=1e-14)

    def test_target(self):
        x = standard_complex_normal(np.random.default_rng(5), (10, 672))
        ds, _ = normalize_dataset(ChannelDataset(x), 672)
        assert ds.mean_square_norm() == pytest.approx(672, rel=1e-12)

    def test_all_zero(self):
        with pytest.raises(ArgumentError):
            normalize_dataset(ChannelDataset(np.zeros((3, 2))))


class TestPca:
    def test_orthonormal_and_ordered(self):
        codec = pca_fit(model(random_covariance(16, 6)), 10)
        p = codec.basis
        assert np.allclose(p.conj().T @ p, np.eye(5), atol=1e-10)
        assert np.all(np.diff(codec.eigenvalues) <= 1e-12)

    def test_full_basis_is_identity(self):
        c = random_covariance(8, 7)
        h = draw(c, 5, 8)
        assert np.allclose(pca_roundtrip(pca_fit(model(c), 16), h), h, atol=1e-12)

    def test_rank_one(self):
        a = np.exp(1j * np.arange(6))
        c = np.outer(a, a.conj())
        h = standard_complex_normal(np.random.default_rng(9), (100, 1)) * a
        assert nmse(h, pca_roundtrip(pca_fit(model(c), 2), h)) <= 1e-28

    @pytest.mark.parametrize("bad", [3, 0, 34])
    def test_invalid_latent(self, bad):
        with pytest.raises(ArgumentError):
            pca_fit(model(np.eye(16)), bad)

    def test_expected_nmse_formula(self):
        c = random_covariance(32, 10)
        lam = np.sort(np.linalg.eigvalsh(c))[::-1]
        codec = pca_fit(model(c), 8)
        assert pca_expected_nmse(codec, model(c)) == pytest.approx(lam[4:].sum() / 32, rel=1e-10)

    def test_beats_random_projectors(self):
        c = random_covariance(16, 11)
        best = pca_expected_nmse(pca_fit(model(c), 8), model(c))
        rng = np.random.default_rng(12)
        for _ in range(50):
            q, _ = np.linalg.qr(rng.standard_normal((16, 4)) + 1j * rng.standard_normal((16, 4)))
            resid = (np.trace(c) - np.trace(q.conj().T @ c @ q)).real / 16
            assert resid >= best - 1e-12

    def test_eigh_phase_convention(self):
        lam, u = sorted_eigh(random_covariance(6, 13))
        first = u[np.argmax(np.abs(u) > 1e-12, axis=0), np.arange(6)]
        assert np.allclose(first.imag, 0, atol=1e-14) and np.all(first.real > 0)


class TestLmmse:
    def test_noiseless_identity(self):
        c = random_covariance(8, 14, decay=0.95)
        y = draw(c, 3, 15)
        assert np.allclose(lmmse_estimate(model(c), None, 0.0, y), y, atol=1e-8)

    def test_scalar_wiener(self):
        est = lmmse_estimate(model(np.eye(1)), np.eye(1), 1.0, np.array([2.0 + 4j]))
        assert est == pytest.approx(np.array([1.0 + 2j]))

    def test_singular_noiseless(self):
        with pytest.raises(NumericalError, match="noise"):
            lmmse_fit(model(np.diag([1.0, 0.0])), None, 0.0)

    def test_shape_mismatch(self):
        with pytest.raises(StructuralError):
            lmmse_fit(model(np.eye(3)), np.eye(2), 0.1)

    def test_mean_is_used(self):
        mu = np.array([1.0 + 1j, -2.0])
        est = lmmse_fit(model(np.eye(2) * 1e-12, mu), None, 1.0)
        assert np.allclose(est(np.zeros(2)), mu, atol=1e-9)

    def test_orthogonality(self):
        c = random_covariance(8, 16)
        a = standard_complex_normal(np.random.default_rng(17), (5, 8))
        n = 40000
        h = draw(c, n, 18)
        y = h @ a.T + np.sqrt(0.1) * standard_complex_normal(np.random.default_rng(19), (n, 5))
        err = h - lmmse_fit(model(c), a, 0.1)(y)
        cross = err.T @ y.conj() / n
        assert np.max(np.abs(cross)) <= 5 * np.sqrt(np.max(np.diag(c)).real * 10 / n)

    @given(st.floats(-20, 30), st.floats(-20, 30))
    @settings(max_examples=25, deadline=None)
    def test_mmse_monotone_in_snr(self, s1, s2):
        c = model(random_covariance(12, 20))
        lo, hi = sorted((s1, s2))
        assert analytic_mmse(c, None, snr_to_noise_var(hi)) <= analytic_mmse(c, None, snr_to_noise_var(lo)) + 1e-15


class TestGenerator:
    def test_identity(self):
        x = gaussian_generate(model(np.eye(4)), 100000, seed=21).samples
        assert np.max(np.abs(x.T @ x.conj() / len(x) - np.eye(4))) <= 0.05

    def test_zero_covariance(self):
        mu = np.array([1.0, 1j])
        x = gaussian_generate(model(np.zeros((2, 2)), mu), 5, seed=22).samples
        assert np.allclose(x, mu)

    def test_transform_reconstruction(self):
        c = random_covariance(40, 23, decay=0.5)
        f = gaussian_generator(model(c)).transform
        assert rel_fro(f @ f.conj().T, c) <= 1e-8

    def test_moment_convergence(self):
        c = random_covariance(16, 24)
        errs = [rel_fro(sample_mean_cov(gaussian_generate(model(c), n, seed=25)).covariance, c)
                for n in (500, 5000, 50000)]
        assert errs[0] > errs[1] > errs[2]

    def test_uncentered_model_generates_zero_mean(self):
        cov = CovarianceModel(np.ones(2), np.eye(2), "sample", centered=False)
        x = gaussian_generate(cov, 20000, seed=26).samples
        assert np.linalg.norm(x.mean(axis=0)) < 0.05


class TestMetrics:
    def test_nmse_values(self):
        assert nmse(np.array([[1.0, 0.0]]), np.zeros((1, 2))) == 0.5
        x = standard_complex_normal(np.random.default_rng(27), (4, 3))
        assert nmse(x, x) == 0.0

    def test_nmse_unitary_invariance(self):
        rng = np.random.default_rng(28)
        x, y = standard_complex_normal(rng, (20, 6)), standard_complex_normal(rng, (20, 6))
        q, _ = np.linalg.qr(rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
        assert nmse(x @ q.T, y @ q.T) == pytest.approx(nmse(x, y), rel=1e-12)

    def test_nmse_zero_estimate_on_normalized(self):
        x = standard_complex_normal(np.random.default_rng(29), (100, 16))
        ds, _ = normalize_dataset(ChannelDataset(x))
        assert nmse(ds, np.zeros_like(ds.samples)) == pytest.approx(1.0)

    def test_nmse_shape(self):
        with pytest.raises(ArgumentError):
            nmse(np.zeros((2, 3)), np.zeros((3, 2)))

    @pytest.mark.parametrize("db,var", [(0, 1.0), (10, 0.1), (20, 0.01)])
    def test_snr(self, db, var):
        assert snr_to_noise_var(db) == pytest.approx(var, rel=1e-15)
