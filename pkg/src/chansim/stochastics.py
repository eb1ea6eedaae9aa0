"""Numerical primitives shared by the channel generators.

Bessel evaluation, Jakes autocovariance matrices, PSD factorization and
seeded circularly-symmetric complex Gaussian sampling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, StructuralError

__all__ = [
    "RngStream",
    "mix64",
    "derive_seed",
    "bessel_j0",
    "jakes_covariance",
    "check_hermitian",
    "psd_factorize",
    "sample_complex_gaussian",
    "standard_complex_normal",
    "resolve_workers",
    "map_row_blocks",
]

_MASK64 = (1 << 64) - 1

# Row-block size for parallel generation. Fixed so that block boundaries (and
# therefore every floating-point operation) do not depend on the worker count.
ROW_BLOCK = 1024


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit mixing function."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, tag: str) -> int:
    """Derive an independent 64-bit root seed for a named purpose."""
    h = 0
    for ch in tag.encode("utf-8"):
        h = mix64(h ^ ch)
    return mix64((seed & _MASK64) ^ h)


@dataclass(frozen=True)
class RngStream:
    """Identifies one reproducible random substream.

    The Philox key is ``mix64(mix64(root_seed) ^ stream_index)``. Since
    ``mix64`` is a bijection, distinct stream indices under one root map to
    distinct keys.
    """

    root_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("root_seed", "stream_index"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= _MASK64:
                raise DomainError(f"{name} must be a 64-bit unsigned integer, got {v!r}")

    @property
    def key(self) -> int:
        return mix64(mix64(int(self.root_seed)) ^ int(self.stream_index))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key))

    def substream(self, index: int) -> "RngStream":
        """Child stream rooted at this stream's key."""
        return RngStream(self.key, index)


def standard_complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) draws: independent real and imaginary parts, each N(0, 1/2)."""
    shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
    z = rng.standard_normal((*shape, 2))
    return (z[..., 0] + 1j * z[..., 1]) * math.sqrt(0.5)


# ---------------------------------------------------------------------------
# Bessel J0

_SERIES_TERMS = 40
_ASYMPTOTIC_SWITCH = 12.0
_ASYMPTOTIC_TERMS = 24  # terms keep shrinking up to k ~ 2|x|, i.e. beyond 23 at |x| = 12


def _asymptotic_coefficients(n):
    # a_k = prod_{j=1..k} (2j-1)^2 / (k! 8^k)
    a = [1.0]
    for k in range(1, n):
        a.append(a[-1] * (2 * k - 1) ** 2 / (8.0 * k))
    return np.array(a)


_ASYM_A = _asymptotic_coefficients(_ASYMPTOTIC_TERMS)


def _j0_series(x):
    u = -0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _SERIES_TERMS):
        term = term * u / (k * k)
        total = total + term
    return total


def _j0_asymptotic(x):
    inv = 1.0 / x
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    power = np.ones_like(x)
    for k in range(_ASYMPTOTIC_TERMS):
        t = _ASYM_A[k] * power
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            p = p + sign * t
        else:
            q = q + sign * t
        power = power * inv
    phase = x - 0.25 * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(phase) + q * np.sin(phase))


def bessel_j0(x):
    """Zeroth-order Bessel function of the first kind.

    Power series below ``|x| = 12``, Hankel asymptotic expansion above.
    Accepts scalars or arrays; returns the same kind.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("bessel_j0 requires finite input")
    ax = np.abs(arr)
    out = np.empty_like(ax)
    small = ax < _ASYMPTOTIC_SWITCH
    out[small] = _j0_series(ax[small])
    out[~small] = _j0_asymptotic(ax[~small])
    if np.ndim(x) == 0:
        return float(out)
    return out


def jakes_covariance(f_d: float, delta_t: float, n: int) -> np.ndarray:
    """Jakes autocovariance of ``n`` samples spaced ``delta_t`` apart.

    Entry ``(i, j)`` is ``J0(2*pi*f_d*delta_t*|i-j|)``.
    """
    if not (f_d >= 0 and math.isfinite(f_d)):
        raise DomainError(f"max Doppler must be finite and >= 0, got {f_d}")
    if not (delta_t > 0 and math.isfinite(delta_t)):
        raise DomainError(f"sample spacing must be > 0, got {delta_t}")
    if int(n) < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    lags = bessel_j0(2.0 * math.pi * f_d * delta_t * np.arange(int(n)))
    idx = np.arange(int(n))
    return lags[np.abs(idx[:, None] - idx[None, :])]


# ---------------------------------------------------------------------------
# factorization and sampling


def check_hermitian(c, rtol: float = 1e-12) -> np.ndarray:
    """Validate a square conjugate-symmetric matrix and return it as an array."""
    c = np.asarray(c)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] == 0:
        raise StructuralError(f"expected a non-empty square matrix, got shape {c.shape}")
    scale = np.max(np.abs(c)) if c.size else 0.0
    if np.max(np.abs(c - c.conj().T)) > rtol * max(scale, np.finfo(float).tiny):
        raise StructuralError("matrix is not Hermitian")
    return c


def psd_factorize(c) -> np.ndarray:
    """Return ``F`` (dim x r) with ``F @ F^H`` reproducing the PSD matrix ``c``.

    Tries a jittered Cholesky first; falls back to an eigendecomposition with
    negative eigenvalues clamped to zero.
    """
    c = check_hermitian(c)
    dim = c.shape[0]
    # mean |diagonal| equals trace/dim for a PSD input but cannot vanish for an indefinite one
    level = float(np.mean(np.abs(np.diag(c))))
    if level == 0.0 and not np.any(c):
        return np.zeros((dim, 1), dtype=complex)
    jitter = 1e-10 * level
    try:
        return np.linalg.cholesky(c + jitter * np.eye(dim)).astype(complex, copy=False)
    except np.linalg.LinAlgError:
        pass
    lam, u = np.linalg.eigh(c)
    if lam[0] < -jitter:
        raise StructuralError(f"matrix is not positive semidefinite (min eigenvalue {lam[0]:.3e})")
    keep = lam > 0
    if not np.any(keep):
        return np.zeros((dim, 1), dtype=complex)
    return (u[:, keep] * np.sqrt(lam[keep])).astype(complex, copy=False)


def resolve_workers(workers: int | None = None) -> int:
    """Worker count, capped by the ``CHANSIM_THREADS`` environment variable."""
    n = workers if workers is not None else (os.cpu_count() or 1)
    cap = os.environ.get("CHANSIM_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, int(n))


def map_row_blocks(fn, start: int, count: int, width: int, workers: int | None = None) -> np.ndarray:
    """Fill a ``(count, width)`` complex array from ``fn(lo, hi)`` over fixed row blocks.

    Blocks cover absolute row indices ``[start, start + count)`` with
    boundaries on multiples of ``ROW_BLOCK``, so results are identical for
    any worker count.
    """
    edges = [start]
    b = (start // ROW_BLOCK + 1) * ROW_BLOCK
    while b < start + count:
        edges.append(b)
        b += ROW_BLOCK
    edges.append(start + count)
    spans = list(zip(edges[:-1], edges[1:]))
    out = np.empty((count, width), dtype=complex)

    def run(span):
        lo, hi = span
        out[lo - start:hi - start] = fn(lo, hi)

    n = resolve_workers(workers)
    if n == 1 or len(spans) == 1:
        for span in spans:
            run(span)
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            list(pool.map(run, spans))
    return out


def sample_complex_gaussian(mean, factor, count: int, stream: RngStream, workers: int | None = None) -> np.ndarray:
    """Draw ``count`` rows i.i.d. from ``CN(mean, factor @ factor^H)``.

    Row ``i`` uses the substream ``stream.substream(i)``.
    """
    factor = np.asarray(factor)
    mean = np.asarray(mean, dtype=complex)
    if factor.ndim != 2 or mean.ndim != 1 or factor.shape[0] != mean.shape[0]:
        raise StructuralError(f"mean shape {mean.shape} incompatible with factor shape {factor.shape}")
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    r = factor.shape[1]
    ft = factor.T

    def block(lo, hi):
        z = np.empty((hi - lo, r), dtype=complex)
        for i in range(lo, hi):
            z[i - lo] = standard_complex_normal(stream.substream(i).generator(), (r,))
        return mean + z @ ft

    return map_row_blocks(block, 0, int(count), mean.shape[0], workers)
