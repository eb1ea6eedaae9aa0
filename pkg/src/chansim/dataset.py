"""Container for a collection of vectorized complex channel realizations."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .errors import StructuralError

__all__ = ["ChannelDataset"]


@dataclass(frozen=True)
class ChannelDataset:
    """``count`` complex channel vectors of length ``dim``, stored row-wise.

    ``normalization_scale`` is the factor already applied to the samples
    (1.0 for raw generator output).
    """

    samples: np.ndarray
    seed: int = 0
    normalization_scale: float = 1.0
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 2:
            raise StructuralError(f"samples must be a (count, dim) matrix, got shape {s.shape}")
        if s.shape[1] < 1:
            raise StructuralError("dim must be positive")
        if s.dtype != np.complex128:
            s = s.astype(np.complex128)
        object.__setattr__(self, "samples", s)

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def mean_square_norm(self) -> float:
        """``(1/count) * sum ||h_i||^2``."""
        return float(np.sum(self.samples.real ** 2 + self.samples.imag ** 2) / self.count)

    def subset(self, index) -> "ChannelDataset":
        return replace(self, samples=self.samples[index])

    def with_samples(self, samples, **provenance) -> "ChannelDataset":
        prov = dict(self.provenance)
        prov.update(provenance)
        return replace(self, samples=samples, provenance=prov)

    def __len__(self):
        return self.count
