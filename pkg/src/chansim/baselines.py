"""Linear methods that are optimal for Gaussian channels, and the metrics.

Sample statistics, PCA compression, LMMSE estimation, eigendecomposition-
based Gaussian generation, nMSE and the SNR convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
import scipy.linalg

from .dataset import ChannelDataset
from .errors import ArgumentError, NumericalError, StructuralError
from .stochastics import RngStream, check_hermitian, sample_complex_gaussian

__all__ = [
    "CovarianceModel",
    "PcaCodec",
    "LmmseEstimator",
    "GaussianGenerator",
    "sample_mean_cov",
    "normalize_dataset",
    "sorted_eigh",
    "pca_fit",
    "pca_roundtrip",
    "pca_expected_nmse",
    "lmmse_fit",
    "lmmse_estimate",
    "analytic_mmse",
    "gaussian_generator",
    "gaussian_generate",
    "nmse",
    "snr_to_noise_var",
]

_SCM_CHUNK = 4096


@dataclass(frozen=True)
class CovarianceModel:
    """Mean vector plus Hermitian PSD covariance.

    ``centered`` tells whether ``covariance`` is the centered covariance
    (``E[(h-mu)(h-mu)^H]``) or the uncentered second moment ``E[h h^H]``.
    Consumers treat uncentered models as zero-mean.
    """

    mean: np.ndarray
    covariance: np.ndarray
    source: str = "sample"
    centered: bool = True
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=complex)
        cov = check_hermitian(np.asarray(self.covariance, dtype=complex), rtol=1e-10)
        if mean.shape != (cov.shape[0],):
            raise StructuralError(f"mean shape {mean.shape} does not match covariance {cov.shape}")
        if self.source not in ("analytic", "sample", "monte-carlo"):
            raise ArgumentError(f"unknown covariance source {self.source!r}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    @property
    def effective_mean(self) -> np.ndarray:
        return self.mean if self.centered else np.zeros_like(self.mean)

    def scaled(self, factor: float) -> "CovarianceModel":
        """Model of ``factor * h``."""
        return CovarianceModel(self.mean * factor, self.covariance * factor ** 2, self.source,
                               self.centered, dict(self.metadata))


def _samples(x) -> np.ndarray:
    return x.samples if isinstance(x, ChannelDataset) else np.atleast_2d(np.asarray(x, dtype=complex))


def sample_mean_cov(dataset, centered: bool = False) -> CovarianceModel:
    """Sample mean and sample covariance ``(1/n) sum h_i h_i^H``.

    The covariance is uncentered unless ``centered=True``.
    """
    x = _samples(dataset)
    n = x.shape[0]
    if n < 1:
        raise ArgumentError("cannot estimate statistics of an empty dataset")
    dim = x.shape[1]
    acc = np.zeros((dim, dim), dtype=complex)
    for lo in range(0, n, _SCM_CHUNK):
        chunk = x[lo:lo + _SCM_CHUNK]
        acc += chunk.T @ chunk.conj()
    acc /= n
    mean = x.mean(axis=0)
    if centered:
        acc -= np.outer(mean, mean.conj())
    acc = 0.5 * (acc + acc.conj().T)
    return CovarianceModel(mean, acc, source="sample", centered=centered, metadata={"count": n})


def normalize_dataset(dataset: ChannelDataset, target_mean_square: float | None = None):
    """Rescale all samples by one scalar so ``(1/n) sum ||h||^2`` hits the target.

    The target defaults to the dimension. Returns ``(dataset, scale)``.
    """
    target = float(dataset.dim if target_mean_square is None else target_mean_square)
    if target <= 0:
        raise ArgumentError(f"target mean square must be positive, got {target}")
    ms = dataset.mean_square_norm()
    if ms == 0.0:
        raise ArgumentError("cannot normalize an all-zero dataset")
    scale = float(np.sqrt(target / ms))
    prov = dict(dataset.provenance, normalized_to=target)
    out = replace(dataset, samples=dataset.samples * scale, provenance=prov,
                  normalization_scale=dataset.normalization_scale * scale)
    return out, scale


def sorted_eigh(cov) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs ordered by descending eigenvalue with a fixed phase convention.

    Each eigenvector is rotated so that its first non-negligible entry is
    real and positive, which makes results reproducible.
    """
    c = cov.covariance if isinstance(cov, CovarianceModel) else np.asarray(cov)
    lam, u = np.linalg.eigh(c)
    order = np.argsort(-lam, kind="stable")
    lam, u = lam[order], u[:, order]
    mag = np.abs(u)
    first = np.argmax(mag > 1e-12 * mag.max(axis=0, keepdims=True), axis=0)
    pivot = u[first, np.arange(u.shape[1])]
    u = u * (np.abs(pivot) / pivot).conj()[None, :]
    return lam, u


@dataclass(frozen=True)
class PcaCodec:
    """Linear encoder ``z = P^H h`` and decoder ``h = P z``."""

    basis: np.ndarray
    latent_real_dim: int
    eigenvalues: np.ndarray

    def encode(self, h) -> np.ndarray:
        return np.asarray(h) @ self.basis.conj()

    def decode(self, z) -> np.ndarray:
        return np.asarray(z) @ self.basis.T


def pca_fit(cov: CovarianceModel, n_latent_real: int) -> PcaCodec:
    """Keep the ``n_latent_real/2`` leading eigenvectors (one complex latent = two reals)."""
    n_latent_real = int(n_latent_real)
    if n_latent_real < 2 or n_latent_real % 2:
        raise ArgumentError(f"latent dimension must be a positive even number, got {n_latent_real}")
    if n_latent_real > 2 * cov.dim:
        raise ArgumentError(f"latent dimension {n_latent_real} exceeds 2*N = {2 * cov.dim}")
    lam, u = sorted_eigh(cov)
    k = n_latent_real // 2
    return PcaCodec(basis=u[:, :k].copy(), latent_real_dim=n_latent_real, eigenvalues=lam)


def pca_roundtrip(codec: PcaCodec, h) -> np.ndarray:
    """``P P^H h`` for a single vector or for each row of a matrix / dataset."""
    x = h.samples if isinstance(h, ChannelDataset) else np.asarray(h)
    return codec.decode(codec.encode(x))


def pca_expected_nmse(codec: PcaCodec, cov: CovarianceModel) -> float:
    """Expected nMSE of ``codec`` on data with second moment ``cov``."""
    c = cov.covariance
    kept = np.einsum("ik,ij,jk->", codec.basis.conj(), c, codec.basis).real
    return float((np.trace(c).real - kept) / cov.dim)


@dataclass(frozen=True)
class LmmseEstimator:
    mean: np.ndarray
    gain: np.ndarray
    measurement: np.ndarray
    noise_var: float

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=complex)
        offset = self.measurement @ self.mean
        if y.ndim == 1:
            return self.mean + self.gain @ (y - offset)
        return self.mean + (y - offset) @ self.gain.T


def _observation_system(cov: CovarianceModel, a, noise_var):
    c = cov.covariance
    a = np.eye(cov.dim, dtype=complex) if a is None else np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[1] != cov.dim:
        raise StructuralError(f"measurement matrix shape {a.shape} incompatible with dim {cov.dim}")
    if noise_var < 0:
        raise ArgumentError(f"noise variance must be >= 0, got {noise_var}")
    ac = a @ c
    s = ac @ a.conj().T + noise_var * np.eye(a.shape[0])
    s = 0.5 * (s + s.conj().T)
    try:
        factor = scipy.linalg.cho_factor(s, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "observation covariance A C A^H + noise_var I is singular; use a positive noise_var"
        ) from exc
    if noise_var == 0:
        d = np.abs(np.diag(factor[0]))
        if d.min() <= 1e-7 * d.max():
            raise NumericalError(
                "observation covariance A C A^H is numerically singular at noise_var = 0; "
                "use a positive noise_var"
            )
    return a, ac, factor


def lmmse_fit(cov: CovarianceModel, a=None, noise_var: float = 0.0) -> LmmseEstimator:
    """Build ``h_hat = mu + C A^H (A C A^H + noise_var I)^{-1} (y - A mu)``.

    ``a=None`` means the identity. The inverse is applied through a Cholesky
    factorization.
    """
    a, ac, factor = _observation_system(cov, a, noise_var)
    gain = scipy.linalg.cho_solve(factor, ac).conj().T
    return LmmseEstimator(mean=cov.effective_mean, gain=gain, measurement=a, noise_var=float(noise_var))


def lmmse_estimate(cov: CovarianceModel, a, noise_var: float, y) -> np.ndarray:
    return lmmse_fit(cov, a, noise_var)(y)


def analytic_mmse(cov: CovarianceModel, a=None, noise_var: float = 0.0) -> float:
    """``(1/N) tr(C - C A^H (A C A^H + noise_var I)^{-1} A C)``."""
    a, ac, factor = _observation_system(cov, a, noise_var)
    reduction = np.einsum("ij,ij->", ac.conj(), scipy.linalg.cho_solve(factor, ac)).real
    return float((np.trace(cov.covariance).real - reduction) / cov.dim)


@dataclass(frozen=True)
class GaussianGenerator:
    """``h = mean + U sqrt(Lambda) z`` with ``z ~ CN(0, I)``."""

    transform: np.ndarray
    mean: np.ndarray

    def sample(self, count: int, seed: int, workers: int | None = None) -> np.ndarray:
        return sample_complex_gaussian(self.mean, self.transform, count, RngStream(seed, 0), workers)


_RANK_CUTOFF = 1e-13


def gaussian_generator(cov: CovarianceModel) -> GaussianGenerator:
    """Transform ``U sqrt(Lambda)`` restricted to the numerically nonzero spectrum.

    Dropping eigenvalues below ``1e-13 * lambda_max`` changes the
    reconstructed covariance by at most ``N * 1e-13`` relative, while the
    low effective rank of typical channel covariances makes sampling far cheaper.
    """
    lam, u = sorted_eigh(cov)
    lam = np.clip(lam, 0.0, None)
    keep = max(1, int(np.sum(lam > _RANK_CUTOFF * lam[0]))) if lam[0] > 0 else 1
    return GaussianGenerator(transform=u[:, :keep] * np.sqrt(lam[:keep])[None, :], mean=cov.effective_mean)


def gaussian_generate(cov: CovarianceModel, count: int, seed: int, workers: int | None = None) -> ChannelDataset:
    """Sample ``count`` channels from the Gaussian matched to ``cov``."""
    gen = gaussian_generator(cov)
    return ChannelDataset(
        samples=gen.sample(count, seed, workers),
        seed=int(seed),
        provenance={"generator": "gaussian", "covariance_source": cov.source},
    )


def nmse(reference, estimate) -> float:
    """``(1/(count*N)) sum ||h_n - h_hat_n||^2``."""
    r, e = _samples(reference), _samples(estimate)
    if r.shape != e.shape:
        raise ArgumentError(f"shape mismatch: {r.shape} vs {e.shape}")
    d = r - e
    return float(np.sum(d.real ** 2 + d.imag ** 2) / r.size)


def snr_to_noise_var(snr_db: float) -> float:
    """Noise variance for data normalized to ``E||h||^2 = N``: ``10^(-snr_db/10)``."""
    return float(10.0 ** (-snr_db / 10.0))
