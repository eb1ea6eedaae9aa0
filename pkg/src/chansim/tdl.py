"""Tapped-delay-line OFDM channels and their exact covariance.

A realization on an ``N_t x N_f`` OFDM grid is

    H = sum_l sqrt(p_l) a_t^(l) a_f^(l)^T

with Jakes-correlated Gaussian time processes ``a_t^(l)`` and frequency
phase ramps ``a_f^(l)``. Vectors are stacked time-major (index
``t * N_f + f``), which makes the covariance ``sum_l p_l C_Jakes kron a_f a_f^H``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .baselines import CovarianceModel
from .dataset import ChannelDataset
from .errors import ArgumentError, DomainError, StateError
from .profiles import LinkProfile
from .stochastics import (
    RngStream,
    jakes_covariance,
    map_row_blocks,
    psd_factorize,
    standard_complex_normal,
)

__all__ = [
    "GridConfig",
    "frequency_steering",
    "generate_tdl_dataset",
    "analytic_tdl_covariance",
]


@dataclass(frozen=True)
class GridConfig:
    """OFDM sampling grid.

    Parameters
    ----------
    n_subcarriers, n_symbols : int
        Grid size ``N_f`` and ``N_t``.
    subcarrier_spacing : float
        ``Delta f`` in Hz.
    symbol_duration : float
        ``Delta T`` in seconds.
    max_doppler : float
        ``f_D`` in Hz.
    """

    n_subcarriers: int
    n_symbols: int
    subcarrier_spacing: float
    symbol_duration: float
    max_doppler: float = 0.0

    def __post_init__(self):
        for name in ("n_subcarriers", "n_symbols"):
            if int(getattr(self, name)) < 1:
                raise DomainError(f"{name} must be a positive integer")
        for name in ("subcarrier_spacing", "symbol_duration"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive, got {v}")
        if not (self.max_doppler >= 0 and math.isfinite(self.max_doppler)):
            raise DomainError(f"max_doppler must be >= 0, got {self.max_doppler}")

    @property
    def dim(self) -> int:
        return self.n_subcarriers * self.n_symbols

    def time_covariance(self) -> np.ndarray:
        return jakes_covariance(self.max_doppler, self.symbol_duration, self.n_symbols)


def frequency_steering(tau: float, delta_f: float, n_f: int) -> np.ndarray:
    """Subcarrier phase ramp ``exp(-j 2 pi delta_f k tau)``, ``k = 0..n_f-1``."""
    return np.exp(-2j * math.pi * delta_f * tau * np.arange(int(n_f)))


def _tap_structures(profile: LinkProfile, grid: GridConfig):
    if not isinstance(profile, LinkProfile):
        raise ArgumentError(f"expected a TDL profile, got {type(profile).__name__}")
    if not profile.scaled:
        raise StateError(f"profile {profile.name!r} must be delay-scaled before generation")
    delays = profile.delays
    a_f = np.stack([frequency_steering(t, grid.subcarrier_spacing, grid.n_subcarriers) for t in delays])
    return delays, a_f, profile.fading_powers()


def _los_time_rotation(profile: LinkProfile, grid: GridConfig) -> np.ndarray:
    w = 2.0 * math.pi * profile.los_doppler_fraction * grid.max_doppler * grid.symbol_duration
    return np.exp(1j * w * np.arange(grid.n_symbols))


def generate_tdl_dataset(
    profile: LinkProfile,
    grid: GridConfig,
    count: int,
    seed: int,
    *,
    start_index: int = 0,
    workers: int | None = None,
) -> ChannelDataset:
    """Draw ``count`` independent OFDM channel realizations.

    Realization ``i`` uses random substream ``(seed, start_index + i)``, so
    disjoint index ranges give disjoint, reproducible datasets and the
    result does not depend on ``workers``.
    """
    if count < 1:
        raise ArgumentError(f"count must be >= 1, got {count}")
    _, a_f, p_fade = _tap_structures(profile, grid)
    n_t, n_f = grid.n_symbols, grid.n_subcarriers
    factor = psd_factorize(grid.time_covariance())
    rank = factor.shape[1]
    n_taps = len(p_fade)
    weighted_af = np.sqrt(p_fade)[:, None] * a_f  # (L, N_f)

    los = profile.has_los
    if los:
        i_los = next(i for i, t in enumerate(profile.taps) if t.is_los)
        los_pattern = math.sqrt(profile.los_power()) * np.outer(_los_time_rotation(profile, grid), a_f[i_los])

    def block(lo, hi):
        b = hi - lo
        z = np.empty((b, n_taps, rank), dtype=complex)
        psi = np.zeros(b)
        for i in range(lo, hi):
            rng = RngStream(seed, i).generator()
            z[i - lo] = standard_complex_normal(rng, (n_taps, rank))
            if los:
                psi[i - lo] = rng.uniform(-math.pi, math.pi)
        a_t = z @ factor.T  # (b, L, N_t)
        h = np.swapaxes(a_t, 1, 2) @ weighted_af  # (b, N_t, N_f)
        if los:
            h = h + np.exp(1j * psi)[:, None, None] * los_pattern
        return h.reshape(b, n_t * n_f)

    samples = map_row_blocks(block, int(start_index), int(count), grid.dim, workers)
    return ChannelDataset(
        samples=samples,
        seed=int(seed),
        provenance={
            "generator": "tdl",
            "profile": profile.name,
            "delay_spread_s": profile.delay_spread,
            "grid": {
                "n_subcarriers": n_f,
                "n_symbols": n_t,
                "subcarrier_spacing_hz": grid.subcarrier_spacing,
                "symbol_duration_s": grid.symbol_duration,
                "max_doppler_hz": grid.max_doppler,
            },
            "start_index": int(start_index),
            "layout": "time-major",
        },
    )


def analytic_tdl_covariance(profile: LinkProfile, grid: GridConfig, *, include_los: bool = False) -> CovarianceModel:
    """Exact covariance ``sum_l p_l (C_Jakes kron a_f a_f^H)`` of the fading part.

    For LOS profiles only the fading fraction of the LOS tap enters by
    default. With ``include_los=True`` the uniform-phase LOS term's rank-one
    contribution is added, giving the full second moment.
    """
    _, a_f, p_fade = _tap_structures(profile, grid)
    # C_Jakes is shared by all taps, so the tap sum collapses into the frequency factor
    c_f = np.einsum("l,lf,lg->fg", p_fade, a_f, a_f.conj())
    cov = np.kron(grid.time_covariance(), c_f)
    meta = {"profile": profile.name, "layout": "time-major"}
    if profile.has_los:
        i_los = next(i for i, t in enumerate(profile.taps) if t.is_los)
        rot = _los_time_rotation(profile, grid)
        v = math.sqrt(profile.los_power()) * np.kron(rot, a_f[i_los])
        meta["los_power"] = profile.los_power()
        meta["los_note"] = ("deterministic-magnitude LOS term with uniform phase adds the rank-one "
                            "matrix v v^H to the second moment" + ("" if include_los else " (excluded)"))
        if include_los:
            cov = cov + np.outer(v, v.conj())
    return CovarianceModel(
        mean=np.zeros(grid.dim, dtype=complex),
        covariance=cov,
        source="analytic",
        metadata=meta,
    )
