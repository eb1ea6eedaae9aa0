"""Clustered-delay-line MIMO channels in the spatial domain.

A realization is

    H = sum_l (1/sqrt(M)) sum_m rho_lm a_rx(lm) a_tx(lm)^T,

with ``rho_lm = sqrt(p_l) exp(j beta_lm)`` and i.i.d. uniform phases. Ray
angles are drawn once per link instance and then frozen, so the phases are
the only randomness between realizations. ``h`` stacks ``H`` row by row
(rx-major), i.e. each ray contributes ``rho_lm (a_rx kron a_tx)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.constants import speed_of_light

from .baselines import CovarianceModel
from .dataset import ChannelDataset
from .errors import ArgumentError, StructuralError
from .profiles import CdlCluster, CdlProfile
from .stochastics import RngStream, derive_seed, map_row_blocks

__all__ = [
    "ArrayConfig",
    "RayAngleSet",
    "CdlLink",
    "RAY_OFFSETS",
    "RAY_MODES",
    "steering_vector",
    "steering_matrix",
    "ula_config",
    "wavelength_for",
    "draw_ray_angles",
    "generate_cdl_dataset",
    "mc_cdl_covariance",
]

# Ray offset angles for unit RMS angle spread, 20 rays (TR 38.901 Table 7.5-3).
RAY_OFFSETS = np.array([
    0.0447, -0.0447, 0.1413, -0.1413, 0.2492, -0.2492, 0.3715, -0.3715, 0.5129, -0.5129,
    0.6797, -0.6797, 0.8844, -0.8844, 1.1481, -1.1481, 1.5195, -1.5195, 2.1551, -2.1551,
])

RAY_MODES = ("iid-laplacian", "fixed-offsets")


@dataclass(frozen=True)
class ArrayConfig:
    """Antenna element positions (meters, local frame) and carrier wavelength."""

    element_positions: np.ndarray
    wavelength: float

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.element_positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise StructuralError(f"element positions must be an (n, 3) array, got shape {pos.shape}")
        if not self.wavelength > 0:
            raise ArgumentError(f"wavelength must be positive, got {self.wavelength}")
        object.__setattr__(self, "element_positions", pos)

    @property
    def n_elements(self) -> int:
        return self.element_positions.shape[0]


def wavelength_for(carrier_hz: float) -> float:
    return speed_of_light / carrier_hz


def ula_config(n: int, spacing_wavelengths: float = 0.5, wavelength: float = 1.0) -> ArrayConfig:
    """Uniform linear array along the x axis, first element at the origin."""
    if int(n) < 1:
        raise ArgumentError(f"array needs at least one element, got {n}")
    if not spacing_wavelengths > 0:
        raise ArgumentError(f"spacing must be positive, got {spacing_wavelengths}")
    pos = np.zeros((int(n), 3))
    pos[:, 0] = np.arange(int(n)) * spacing_wavelengths * wavelength
    return ArrayConfig(pos, wavelength)


def _unit_vectors(azimuth, zenith) -> np.ndarray:
    az, ze = np.asarray(azimuth, dtype=float), np.asarray(zenith, dtype=float)
    return np.stack([np.sin(ze) * np.cos(az), np.sin(ze) * np.sin(az), np.cos(ze)], axis=-1)


def steering_matrix(array: ArrayConfig, azimuth, zenith) -> np.ndarray:
    """Steering vectors for many directions, one per row: shape ``(n_dirs, n_elements)``."""
    e = _unit_vectors(np.atleast_1d(azimuth), np.atleast_1d(zenith))
    return np.exp(1j * (2.0 * math.pi / array.wavelength) * (e @ array.element_positions.T))


def steering_vector(array: ArrayConfig, azimuth: float, zenith: float) -> np.ndarray:
    """``exp(j 2pi/lambda e(az, ze)^T d_i)`` with ``e = [sin ze cos az, sin ze sin az, cos ze]``."""
    return steering_matrix(array, azimuth, zenith)[0]


@dataclass(frozen=True)
class RayAngleSet:
    """Per-ray angles in radians, each an array of length ``M``."""

    aod: np.ndarray
    aoa: np.ndarray
    zod: np.ndarray
    zoa: np.ndarray

    @property
    def n_rays(self) -> int:
        return len(self.aod)


def _unit_offsets(m: int) -> np.ndarray:
    if m == len(RAY_OFFSETS):
        return RAY_OFFSETS
    # symmetric Laplacian quantiles with unit standard deviation
    q = (np.arange(m) + 0.5) / m
    b = 1.0 / math.sqrt(2.0)
    return np.where(q < 0.5, b * np.log(2 * q), -b * np.log(2 * (1 - q)))


def draw_ray_angles(
    cluster: CdlCluster,
    spreads_deg,
    mode: str,
    rng: np.random.Generator,
    n_rays: int = 20,
) -> RayAngleSet:
    """Sub-path angles around the cluster's mean angles.

    ``spreads_deg`` are the per-dimension angular standard deviations
    ``(ASD, ASA, ZSD, ZSA)``. In ``iid-laplacian`` mode every angle is an
    independent Laplacian draw with scale ``spread/sqrt(2)``; in
    ``fixed-offsets`` mode the tabulated offsets are scaled by the spread
    and randomly permuted per dimension.
    """
    if mode not in RAY_MODES:
        raise ArgumentError(f"unknown ray mode {mode!r}; expected one of {RAY_MODES}")
    if int(n_rays) < 1:
        raise ArgumentError(f"need at least one ray, got {n_rays}")
    means = cluster.angles_rad
    spreads = np.deg2rad(np.asarray(spreads_deg, dtype=float))
    out = []
    for k in range(4):
        if mode == "iid-laplacian":
            draw = rng.laplace(0.0, 1.0, int(n_rays)) * (spreads[k] / math.sqrt(2.0))
        else:
            draw = rng.permutation(_unit_offsets(int(n_rays))) * spreads[k]
        out.append(means[k] + draw)
    out[2] = np.clip(out[2], 0.0, math.pi)
    out[3] = np.clip(out[3], 0.0, math.pi)
    return RayAngleSet(*out)


def _ray_steering(angles: RayAngleSet, tx: ArrayConfig, rx: ArrayConfig) -> np.ndarray:
    a_tx = steering_matrix(tx, angles.aod, angles.zod)
    a_rx = steering_matrix(rx, angles.aoa, angles.zoa)
    return (a_rx[:, :, None] * a_tx[:, None, :]).reshape(angles.n_rays, -1)


class CdlLink:
    """One instantiation of a CDL profile between two arrays.

    Ray angles are drawn from ``angle_seed`` at construction and then fixed.
    """

    def __init__(self, profile: CdlProfile, tx: ArrayConfig, rx: ArrayConfig,
                 ray_mode: str = "iid-laplacian", angle_seed: int = 0):
        if not isinstance(profile, CdlProfile):
            raise ArgumentError(f"expected a CDL profile, got {type(profile).__name__}")
        if ray_mode not in RAY_MODES:
            raise ArgumentError(f"unknown ray mode {ray_mode!r}; expected one of {RAY_MODES}")
        self.profile = profile
        self.tx = tx
        self.rx = rx
        self.ray_mode = ray_mode
        self.angle_seed = int(angle_seed)
        root = derive_seed(self.angle_seed, "ray-angles")
        self.ray_angles = [
            draw_ray_angles(c, profile.spreads_deg, ray_mode, RngStream(root, i).generator(), profile.rays_per_cluster)
            for i, c in enumerate(profile.clusters)
        ]

    @property
    def dim(self) -> int:
        return self.tx.n_elements * self.rx.n_elements

    @cached_property
    def ray_steering(self) -> np.ndarray:
        """``(L*M, N)`` matrix of ``a_rx kron a_tx`` rows, cluster-major."""
        return np.concatenate([_ray_steering(a, self.tx, self.rx) for a in self.ray_angles])

    @cached_property
    def ray_weights(self) -> np.ndarray:
        m = self.profile.rays_per_cluster
        return np.repeat(np.sqrt(self.profile.fading_powers() / m), m)

    @cached_property
    def los_vector(self) -> np.ndarray | None:
        """Deterministic-magnitude LOS contribution (before its random phase)."""
        if not self.profile.has_los:
            return None
        i, c = next((i, c) for i, c in enumerate(self.profile.clusters) if c.is_los)
        k = self.profile.k_factor
        mean = RayAngleSet(*[np.array([v]) for v in c.angles_rad])
        return math.sqrt(c.power * k / (k + 1.0)) * _ray_steering(mean, self.tx, self.rx)[0]

    def covariance(self) -> CovarianceModel:
        """Exact covariance of this frozen link (expectation over phases only)."""
        s = self.ray_steering * self.ray_weights[:, None]
        cov = s.T @ s.conj()
        if self.los_vector is not None:
            cov = cov + np.outer(self.los_vector, self.los_vector.conj())
        cov = 0.5 * (cov + cov.conj().T)
        return CovarianceModel(np.zeros(self.dim, dtype=complex), cov, source="analytic",
                               metadata={"profile": self.profile.name, "angle_seed": self.angle_seed,
                                         "ray_mode": self.ray_mode, "layout": "rx-major"})

    def generate(self, count: int, seed: int, *, start_index: int = 0, redraw_angles: bool = False,
                 workers: int | None = None) -> ChannelDataset:
        """Draw ``count`` realizations; realization ``i`` uses substream ``(seed, start_index + i)``.

        With ``redraw_angles`` every realization also draws fresh ray angles
        (a scenario-style ablation of the link-level model).
        """
        if count < 1:
            raise ArgumentError(f"count must be >= 1, got {count}")
        n_rays = len(self.ray_weights)
        los = self.los_vector
        weights = self.ray_weights
        steering = self.ray_steering
        profile = self.profile

        def block(lo, hi):
            b = hi - lo
            coeff = np.empty((b, n_rays), dtype=complex)
            psi = np.zeros(b)
            out = np.empty((b, self.dim), dtype=complex) if redraw_angles else None
            for i in range(lo, hi):
                rng = RngStream(seed, i).generator()
                coeff[i - lo] = weights * np.exp(1j * rng.uniform(-math.pi, math.pi, n_rays))
                if los is not None:
                    psi[i - lo] = rng.uniform(-math.pi, math.pi)
                if redraw_angles:
                    s = np.concatenate([
                        _ray_steering(draw_ray_angles(c, profile.spreads_deg, self.ray_mode, rng,
                                                      profile.rays_per_cluster), self.tx, self.rx)
                        for c in profile.clusters
                    ])
                    out[i - lo] = coeff[i - lo] @ s
            h = out if redraw_angles else coeff @ steering
            if los is not None:
                h = h + np.exp(1j * psi)[:, None] * los[None, :]
            return h

        samples = map_row_blocks(block, int(start_index), int(count), self.dim, workers)
        return ChannelDataset(
            samples=samples,
            seed=int(seed),
            provenance={
                "generator": "cdl",
                "profile": profile.name,
                "n_tx": self.tx.n_elements,
                "n_rx": self.rx.n_elements,
                "wavelength_m": self.tx.wavelength,
                "ray_mode": self.ray_mode,
                "angle_seed": self.angle_seed,
                "redraw_angles": bool(redraw_angles),
                "start_index": int(start_index),
                "layout": "rx-major",
            },
        )


def generate_cdl_dataset(
    profile: CdlProfile,
    tx: ArrayConfig,
    rx: ArrayConfig,
    count: int,
    seed: int,
    ray_mode: str = "iid-laplacian",
    *,
    angle_seed: int = 0,
    redraw_angles: bool = False,
    start_index: int = 0,
    workers: int | None = None,
) -> ChannelDataset:
    link = CdlLink(profile, tx, rx, ray_mode=ray_mode, angle_seed=angle_seed)
    return link.generate(count, seed, start_index=start_index, redraw_angles=redraw_angles, workers=workers)


def mc_cdl_covariance(
    profile: CdlProfile,
    tx: ArrayConfig,
    rx: ArrayConfig,
    n_draws: int,
    seed: int,
    ray_mode: str = "iid-laplacian",
) -> CovarianceModel:
    """Monte-Carlo estimate of ``sum_l E[p_l (a_rx a_rx^H) kron (a_tx a_tx^H)]`` over ray angles.

    Each of the ``n_draws`` draws is a full set of ``M`` ray angles per
    cluster. The LOS ray of a LOS cluster sits at the cluster mean angles
    and contributes its rank-one term exactly.
    """
    if int(n_draws) < 1:
        raise ArgumentError(f"n_draws must be >= 1, got {n_draws}")
    n = tx.n_elements * rx.n_elements
    cov = np.zeros((n, n), dtype=complex)
    p_fade = profile.fading_powers()
    m = profile.rays_per_cluster
    root = derive_seed(int(seed), "mc-covariance")
    for l, cluster in enumerate(profile.clusters):
        rng = RngStream(root, l).generator()
        acc = np.zeros((n, n), dtype=complex)
        for _ in range(int(n_draws)):
            s = _ray_steering(draw_ray_angles(cluster, profile.spreads_deg, ray_mode, rng, m), tx, rx)
            acc += s.T @ s.conj()
        cov += (p_fade[l] / (m * int(n_draws))) * acc
    if profile.has_los:
        c = next(c for c in profile.clusters if c.is_los)
        k = profile.k_factor
        mean = RayAngleSet(*[np.array([v]) for v in c.angles_rad])
        v = _ray_steering(mean, tx, rx)[0]
        cov += (c.power * k / (k + 1.0)) * np.outer(v, v.conj())
    cov = 0.5 * (cov + cov.conj().T)
    return CovarianceModel(np.zeros(n, dtype=complex), cov, source="monte-carlo",
                           metadata={"profile": profile.name, "n_draws": int(n_draws), "ray_mode": ray_mode,
                                     "layout": "rx-major"})
