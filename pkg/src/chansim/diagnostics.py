"""Realism and Gaussianity measures for channel datasets.

Spectral-efficiency CDFs and Kolmogorov-Smirnov distances, DFT-codebook
fingerprints with total variation, and a combined report that compares a
dataset against its best-fitting Gaussian using resampling noise floors.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .baselines import CovarianceModel, gaussian_generator, sample_mean_cov
from .dataset import ChannelDataset
from .errors import ArgumentError
from .stochastics import RngStream, derive_seed

__all__ = [
    "Pmf",
    "GaussianityReport",
    "CONSISTENT",
    "NON_GAUSSIAN",
    "spectral_efficiency",
    "empirical_cdf",
    "ks_distance",
    "dft_codebook",
    "fingerprint_indices",
    "fingerprint_pmf",
    "total_variation",
    "gaussianity_report",
    "write_cdf_csv",
]

CONSISTENT = "consistent-with-gaussian"
NON_GAUSSIAN = "non-gaussian"
MIN_REPORT_COUNT = 2000
_CHUNK = 4096


@dataclass(frozen=True)
class Pmf:
    """Probability masses over ``support_size`` outcomes, with the integer counts behind them."""

    masses: np.ndarray
    support_size: int
    counts: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if m.ndim != 1 or len(m) != int(self.support_size) or len(m) < 1:
            raise ArgumentError(f"masses must be a vector of length support_size={self.support_size}")
        if np.any(m < 0) or abs(math.fsum(m) - 1.0) > 1e-12:
            raise ArgumentError("masses must be nonnegative and sum to 1")
        object.__setattr__(self, "masses", m)

    @classmethod
    def from_counts(cls, counts) -> "Pmf":
        c = np.asarray(counts, dtype=np.int64)
        total = int(c.sum())
        if total <= 0:
            raise ArgumentError("cannot build a PMF from zero counts")
        return cls(c / total, len(c), c)


@dataclass(frozen=True)
class GaussianityReport:
    tv_vs_gaussian: float
    tv_noise_floor: float
    ks_spectral_efficiency: float
    ks_noise_floor: float
    verdict: str
    pmf_data: Pmf
    pmf_surrogate: Pmf
    config: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "tv_vs_gaussian": self.tv_vs_gaussian,
            "tv_noise_floor": self.tv_noise_floor,
            "ks_spectral_efficiency": self.ks_spectral_efficiency,
            "ks_noise_floor": self.ks_noise_floor,
            "verdict": self.verdict,
            "config": self.config,
            "pmf_data": self.pmf_data.masses.tolist(),
            "pmf_surrogate": self.pmf_surrogate.masses.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _rows(x) -> np.ndarray:
    if isinstance(x, ChannelDataset):
        return x.samples
    return np.asarray(x, dtype=complex)


def spectral_efficiency(h, noise_var: float):
    """``log2(1 + ||h||^2 / noise_var)``; a matrix or dataset gives one value per row."""
    if not noise_var > 0:
        raise ArgumentError(f"noise variance must be positive, got {noise_var}")
    x = _rows(h)
    energy = np.sum(x.real ** 2 + x.imag ** 2, axis=-1)
    out = np.log2(1.0 + energy / noise_var)
    return float(out) if np.ndim(out) == 0 else out


def empirical_cdf(values) -> tuple[np.ndarray, np.ndarray]:
    """Right-continuous ECDF as ``(distinct sorted values, F(value))``."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ArgumentError("empirical CDF needs at least one value")
    xs, counts = np.unique(v, return_counts=True)
    return xs, np.cumsum(counts) / v.size


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic ``sup |F_a - F_b|`` over the merged support."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ArgumentError("KS distance needs nonempty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def dft_codebook(n: int) -> np.ndarray:
    """Unitary DFT matrix; column ``k`` is ``exp(-j 2pi n k / N) / sqrt(N)``."""
    if int(n) < 1:
        raise ArgumentError(f"codebook size must be positive, got {n}")
    return np.fft.fft(np.eye(int(n))) / math.sqrt(int(n))


def fingerprint_indices(dataset, codebook=None) -> np.ndarray:
    """Best-matching codebook column per sample, ``argmax_k |c_k^H h|``, lowest index on ties.

    ``codebook=None`` uses the square DFT codebook, evaluated with an FFT.
    """
    x = _rows(dataset)
    if x.ndim != 2:
        raise ArgumentError("fingerprinting needs a (count, dim) matrix of samples")
    n = x.shape[1]
    if codebook is not None:
        cb = np.asarray(codebook, dtype=complex)
        if cb.ndim != 2 or cb.shape != (n, n):
            raise ArgumentError(f"codebook shape {cb.shape} does not match dim {n}")
    out = np.empty(x.shape[0], dtype=np.int64)
    for lo in range(0, x.shape[0], _CHUNK):
        chunk = x[lo:lo + _CHUNK]
        # c_k^H h for the DFT codebook is sqrt(N) * ifft(h)[k]; the scale does not move the argmax
        proj = np.fft.ifft(chunk, axis=1) if codebook is None else chunk @ cb.conj()
        out[lo:lo + _CHUNK] = np.argmax(np.abs(proj), axis=1)
    return out


def fingerprint_pmf(dataset, codebook=None) -> Pmf:
    x = _rows(dataset)
    idx = fingerprint_indices(x, codebook)
    return Pmf.from_counts(np.bincount(idx, minlength=x.shape[1]))


def total_variation(p: Pmf, q: Pmf) -> float:
    """``(1/2) sum_k |p_k - q_k|``."""
    if p.support_size != q.support_size:
        raise ArgumentError(f"support sizes differ: {p.support_size} vs {q.support_size}")
    return float(0.5 * np.sum(np.abs(p.masses - q.masses)))


def gaussianity_report(
    dataset: ChannelDataset,
    noise_var_for_se: float,
    seed: int,
    *,
    n_splits: int = 20,
    multiplier: float = 1.5,
    codebook=None,
    reference: CovarianceModel | None = None,
    workers: int | None = None,
) -> GaussianityReport:
    """Compare a dataset against the Gaussian with its sample mean and covariance.

    Every comparison is made at matched sample size. For each of
    ``n_splits`` random half splits ``(A, B)`` of the data:

    * the noise floors are ``TV(A, B)`` and ``KS(A, B)``;
    * the test statistics compare ``A`` with a fresh Gaussian surrogate of
      the same size as ``A``.

    ``reference`` replaces the fitted moments with a known model such as
    an analytic covariance. Medians over splits are reported. The verdict
    is consistent-with-gaussian iff both statistics stay within
    ``multiplier`` times their floors.
    """
    x = _rows(dataset)
    if x.shape[0] < MIN_REPORT_COUNT:
        raise ArgumentError(f"gaussianity report needs at least {MIN_REPORT_COUNT} samples, got {x.shape[0]}")
    if int(n_splits) < 5:
        raise ArgumentError(f"need at least 5 splits for a median noise floor, got {n_splits}")
    if not noise_var_for_se > 0:
        raise ArgumentError(f"noise variance must be positive, got {noise_var_for_se}")
    if reference is not None and reference.dim != x.shape[1]:
        raise ArgumentError(f"reference dim {reference.dim} does not match data dim {x.shape[1]}")
    cov = sample_mean_cov(x, centered=True) if reference is None else reference
    gen = gaussian_generator(cov)
    half = x.shape[0] // 2
    split_root = derive_seed(int(seed), "gaussianity-split")
    surrogate_root = derive_seed(int(seed), "gaussianity-surrogate")

    tv_floor, tv_gauss, ks_floor, ks_gauss = [], [], [], []
    pmf_a = pmf_s = None
    for j in range(int(n_splits)):
        perm = RngStream(split_root, j).generator().permutation(x.shape[0])
        a, b = x[perm[:half]], x[perm[half:2 * half]]
        s = gen.sample(half, RngStream(surrogate_root, j).key, workers)
        pa, pb, ps = fingerprint_pmf(a, codebook), fingerprint_pmf(b, codebook), fingerprint_pmf(s, codebook)
        tv_floor.append(total_variation(pa, pb))
        tv_gauss.append(total_variation(pa, ps))
        se_a, se_b, se_s = (spectral_efficiency(v, noise_var_for_se) for v in (a, b, s))
        ks_floor.append(ks_distance(se_a, se_b))
        ks_gauss.append(ks_distance(se_a, se_s))
        if j == 0:
            pmf_a, pmf_s = pa, ps

    tv, tv0 = float(np.median(tv_gauss)), float(np.median(tv_floor))
    ks, ks0 = float(np.median(ks_gauss)), float(np.median(ks_floor))
    ok = tv <= multiplier * tv0 and ks <= multiplier * ks0
    return GaussianityReport(
        tv_vs_gaussian=tv,
        tv_noise_floor=tv0,
        ks_spectral_efficiency=ks,
        ks_noise_floor=ks0,
        verdict=CONSISTENT if ok else NON_GAUSSIAN,
        pmf_data=pmf_a,
        pmf_surrogate=pmf_s,
        config={
            "count": int(x.shape[0]),
            "split_size": int(half),
            "n_splits": int(n_splits),
            "multiplier": float(multiplier),
            "noise_var_for_se": float(noise_var_for_se),
            "seed": int(seed),
            "codebook": "dft" if codebook is None else "custom",
            "surrogate": ("sample mean and centered sample covariance" if reference is None
                          else f"reference model ({reference.source})"),
            "tv_per_split": tv_gauss,
            "tv_floor_per_split": tv_floor,
            "ks_per_split": ks_gauss,
            "ks_floor_per_split": ks_floor,
        },
    )


def write_cdf_csv(path, values) -> None:
    """Two-column CSV ``value,cumulative_probability`` at 17 significant digits."""
    xs, fs = empirical_cdf(values)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", "cumulative_probability"])
        for x, f in zip(xs, fs):
            w.writerow([f"{x:.17g}", f"{f:.17g}"])
