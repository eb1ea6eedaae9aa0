"""CHDS binary dataset files and plain-text import/export.

Layout (little-endian): magic ``b"CHDS"``, version u32 = 1, dim u32,
count u64, seed u64, normalization_scale f64, then ``count * dim``
complex values as float64 real/imag pairs, row-major. Metadata lives in an
optional ``<path>.json`` sidecar.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .dataset import ChannelDataset
from .errors import ValidationError

__all__ = [
    "MAGIC",
    "VERSION",
    "HEADER",
    "sidecar_path",
    "encode_chds",
    "decode_chds",
    "write_chds",
    "read_chds",
    "read_csv_complex",
    "read_raw_interleaved",
    "write_csv_complex",
    "write_raw_interleaved",
]

MAGIC = b"CHDS"
VERSION = 1
HEADER = struct.Struct("<4sIIQQd")


def sidecar_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".json")


def encode_chds(dataset: ChannelDataset) -> bytes:
    head = HEADER.pack(MAGIC, VERSION, dataset.dim, dataset.count, int(dataset.seed), float(dataset.normalization_scale))
    return head + np.ascontiguousarray(dataset.samples, dtype="<c16").tobytes()


def decode_chds(blob: bytes, provenance: dict | None = None) -> ChannelDataset:
    if len(blob) < HEADER.size:
        raise ValidationError(f"file is {len(blob)} bytes, shorter than the {HEADER.size}-byte header", "header")
    magic, version, dim, count, seed, scale = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValidationError(f"expected {MAGIC!r}, got {magic!r}", "magic")
    if version != VERSION:
        raise ValidationError(f"unsupported version {version}", "version")
    if dim < 1:
        raise ValidationError("dim must be positive", "dim")
    expected = count * dim * 16
    if len(blob) - HEADER.size != expected:
        raise ValidationError(f"expected {expected} payload bytes, found {len(blob) - HEADER.size}", "payload")
    samples = np.frombuffer(blob, dtype="<c16", offset=HEADER.size).reshape(count, dim).astype(np.complex128)
    return ChannelDataset(samples, seed=seed, normalization_scale=scale, provenance=dict(provenance or {}))


def write_chds(path, dataset: ChannelDataset, *, sidecar: bool = True) -> None:
    path = Path(path)
    path.write_bytes(encode_chds(dataset))
    if sidecar:
        meta = {"provenance": dataset.provenance, "count": dataset.count, "dim": dataset.dim}
        sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def read_chds(path) -> ChannelDataset:
    path = Path(path)
    side = sidecar_path(path)
    prov = {}
    if side.exists():
        prov = json.loads(side.read_text(encoding="utf-8")).get("provenance", {})
    return decode_chds(path.read_bytes(), prov)


def read_csv_complex(path, dim: int) -> np.ndarray:
    """Rows of ``re,im,re,im,...``; each row holds one or more whole channel vectors."""
    dim = int(dim)
    if dim < 1:
        raise ValidationError("dim must be positive", "dim")
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                row = [float(t) for t in text.split(",")]
            except ValueError as exc:
                raise ValidationError(f"line {lineno}: {exc}", "csv") from None
            if len(row) % (2 * dim):
                raise ValidationError(
                    f"line {lineno}: {len(row)} reals is not a multiple of 2*dim = {2 * dim}", "csv")
            values.extend(row)
    if not values:
        raise ValidationError("no data rows", "csv")
    arr = np.asarray(values, dtype=float)
    return (arr[0::2] + 1j * arr[1::2]).reshape(-1, dim)


def read_raw_interleaved(path, dim: int) -> np.ndarray:
    """Little-endian float64 ``re, im`` pairs with no header."""
    dim = int(dim)
    if dim < 1:
        raise ValidationError("dim must be positive", "dim")
    blob = Path(path).read_bytes()
    if len(blob) == 0 or len(blob) % (16 * dim):
        raise ValidationError(f"{len(blob)} bytes is not a positive multiple of 16*dim = {16 * dim}", "raw")
    return np.frombuffer(blob, dtype="<c16").reshape(-1, dim).astype(np.complex128)


def write_csv_complex(path, samples) -> None:
    x = np.asarray(samples, dtype=complex)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for row in x:
            inter = np.empty(2 * len(row))
            inter[0::2], inter[1::2] = row.real, row.imag
            fh.write(",".join(f"{v:.17g}" for v in inter) + "\n")


def write_raw_interleaved(path, samples) -> None:
    Path(path).write_bytes(np.ascontiguousarray(samples, dtype="<c16").tobytes())
