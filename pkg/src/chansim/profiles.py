"""Link-level model parameter tables: data model, validation, serialization.

Profiles are stored as JSON documents (see ``data/profiles``). Tap and
cluster powers are linear and are normalized to unit sum on load. The
LOS tap/cluster carries its total power; the K-factor splits it into a
deterministic part ``K/(K+1)`` and a fading part ``1/(K+1)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import StateError, ValidationError

__all__ = [
    "TapEntry",
    "LinkProfile",
    "CdlCluster",
    "CdlProfile",
    "load_profile",
    "serialize_profile",
    "dump_profile",
    "scale_delays",
    "get_profile",
    "list_profiles",
]

DEFAULT_LOS_DOPPLER_FRACTION = 0.7
DEFAULT_RAYS_PER_CLUSTER = 20
_NORM_TOL = 1e-12


@dataclass(frozen=True)
class TapEntry:
    normalized_delay: float
    power: float
    is_los: bool = False


@dataclass(frozen=True)
class LinkProfile:
    """Tapped-delay-line profile.

    ``delays`` returns physical seconds once the profile has been passed
    through :func:`scale_delays`; before that only ``normalized_delay`` is
    meaningful.
    """

    name: str
    taps: tuple[TapEntry, ...]
    k_factor_db: float | None = None
    los_doppler_fraction: float = DEFAULT_LOS_DOPPLER_FRACTION
    delay_unit_s: float | None = None
    delay_spread: float | None = None
    metadata: Mapping[str, Any] = field(default_factory=dict, compare=False)

    @property
    def k_factor(self) -> float:
        return 0.0 if self.k_factor_db is None else 10.0 ** (self.k_factor_db / 10.0)

    @property
    def scaled(self) -> bool:
        return self.delay_spread is not None

    @property
    def has_los(self) -> bool:
        return any(t.is_los for t in self.taps) and self.k_factor > 0

    @property
    def powers(self) -> np.ndarray:
        return np.array([t.power for t in self.taps])

    @property
    def delays(self) -> np.ndarray:
        if not self.scaled:
            raise StateError(f"profile {self.name!r} has normalized delays; call scale_delays first")
        return np.array([t.normalized_delay for t in self.taps]) * self.delay_spread

    def fading_powers(self) -> np.ndarray:
        """Per-tap power of the random (Rayleigh) part."""
        p = self.powers.copy()
        k = self.k_factor
        for i, t in enumerate(self.taps):
            if t.is_los:
                p[i] /= k + 1.0
        return p

    def los_power(self) -> float:
        """Power of the deterministic-magnitude LOS component (0 without LOS)."""
        k = self.k_factor
        return sum(t.power * k / (k + 1.0) for t in self.taps if t.is_los)

    @property
    def kind(self) -> str:
        return "tdl"


@dataclass(frozen=True)
class CdlCluster:
    power: float
    aod_deg: float
    aoa_deg: float
    zod_deg: float
    zoa_deg: float
    is_los: bool = False

    @property
    def angles_rad(self) -> np.ndarray:
        """Cluster mean angles ``(aod, aoa, zod, zoa)`` in radians."""
        return np.deg2rad([self.aod_deg, self.aoa_deg, self.zod_deg, self.zoa_deg])


@dataclass(frozen=True)
class CdlProfile:
    name: str
    clusters: tuple[CdlCluster, ...]
    spreads_deg: tuple[float, float, float, float]
    rays_per_cluster: int = DEFAULT_RAYS_PER_CLUSTER
    k_factor_db: float | None = None
    metadata: Mapping[str, Any] = field(default_factory=dict, compare=False)

    @property
    def k_factor(self) -> float:
        return 0.0 if self.k_factor_db is None else 10.0 ** (self.k_factor_db / 10.0)

    @property
    def has_los(self) -> bool:
        return any(c.is_los for c in self.clusters) and self.k_factor > 0

    @property
    def powers(self) -> np.ndarray:
        return np.array([c.power for c in self.clusters])

    @property
    def spreads_rad(self) -> np.ndarray:
        return np.deg2rad(np.asarray(self.spreads_deg, dtype=float))

    def fading_powers(self) -> np.ndarray:
        p = self.powers.copy()
        k = self.k_factor
        for i, c in enumerate(self.clusters):
            if c.is_los:
                p[i] /= k + 1.0
        return p

    @property
    def kind(self) -> str:
        return "cdl"


# ---------------------------------------------------------------------------
# validation helpers

_TOP_TDL = {"kind", "name", "taps", "k_factor_db", "los_doppler_fraction", "delay_unit_s"}
_TOP_CDL = {"kind", "name", "clusters", "k_factor_db", "spreads_deg", "rays_per_cluster"}
_TAP_FIELDS = {"normalized_delay", "power", "is_los"}
_CLUSTER_FIELDS = {"power", "aod_deg", "aoa_deg", "zod_deg", "zoa_deg", "is_los"}
_SPREAD_KEYS = ("asd", "asa", "zsd", "zsa")


def _reject_unknown(obj: Mapping, allowed: set, where: str):
    for key in obj:
        if key not in allowed and not str(key).startswith("x-"):
            raise ValidationError("unknown field", f"{where}.{key}" if where else key)


def _number(obj: Mapping, key: str, where: str, *, required=True, default=None) -> float:
    if key not in obj:
        if required:
            raise ValidationError("missing required field", f"{where}.{key}")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ValidationError(f"expected a finite number, got {v!r}", f"{where}.{key}")
    return float(v)


def _bool(obj: Mapping, key: str, where: str) -> bool:
    v = obj.get(key, False)
    if not isinstance(v, bool):
        raise ValidationError(f"expected a boolean, got {v!r}", f"{where}.{key}")
    return v


def _k_factor_db(doc: Mapping) -> float | None:
    if "k_factor_db" not in doc:
        raise ValidationError("missing required field", "k_factor_db")
    v = doc["k_factor_db"]
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or math.isnan(v) or v == math.inf:
        raise ValidationError(f"expected a number or null, got {v!r}", "k_factor_db")
    return None if v == -math.inf else float(v)


def _normalize(powers: list[float]) -> tuple[list[float], float]:
    total = math.fsum(powers)
    if total <= 0:
        raise ValidationError("total power must be positive", "power")
    if abs(total - 1.0) <= _NORM_TOL:
        return powers, 1.0
    return [p / total for p in powers], 1.0 / total


def _wrap_azimuth(deg: float) -> float:
    w = math.fmod(deg, 360.0)
    if w > 180.0:
        w -= 360.0
    elif w <= -180.0:
        w += 360.0
    return w


def _check_los(flags: Sequence[bool], delays: Sequence[float] | None, what: str):
    n_los = sum(flags)
    if n_los > 1:
        raise ValidationError(f"more than one LOS {what}", f"{what}s.is_los")
    if n_los == 1 and delays is not None:
        i = flags.index(True)
        if delays[i] > min(delays):
            raise ValidationError(f"LOS {what} must have the smallest delay", f"{what}s[{i}].normalized_delay")


def _load_tdl(doc: Mapping) -> LinkProfile:
    _reject_unknown(doc, _TOP_TDL, "")
    taps_doc = doc.get("taps")
    if not isinstance(taps_doc, list) or not taps_doc:
        raise ValidationError("expected a non-empty array", "taps")
    raw = []
    for i, t in enumerate(taps_doc):
        where = f"taps[{i}]"
        if not isinstance(t, Mapping):
            raise ValidationError("expected an object", where)
        _reject_unknown(t, _TAP_FIELDS, where)
        d = _number(t, "normalized_delay", where)
        p = _number(t, "power", where)
        if d < 0:
            raise ValidationError(f"negative delay {d}", f"{where}.normalized_delay")
        if p <= 0:
            raise ValidationError(f"power must be positive, got {p}", f"{where}.power")
        raw.append((d, p, _bool(t, "is_los", where)))
    _check_los([r[2] for r in raw], [r[0] for r in raw], "tap")
    # standard tables list taps out of delay order; sort (stable) so delays are nondecreasing
    raw.sort(key=lambda r: r[0])
    powers, factor = _normalize([r[1] for r in raw])
    k_db = _k_factor_db(doc)
    frac = _number(doc, "los_doppler_fraction", "", required=False, default=DEFAULT_LOS_DOPPLER_FRACTION)
    if not -1.0 <= frac <= 1.0:
        raise ValidationError(f"must lie in [-1, 1], got {frac}", "los_doppler_fraction")
    unit = doc.get("delay_unit_s")
    if unit is not None:
        unit = _number(doc, "delay_unit_s", "")
        if unit <= 0:
            raise ValidationError("must be positive", "delay_unit_s")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ValidationError("expected a non-empty string", "name")
    taps = tuple(TapEntry(d, p, los) for (d, _, los), p in zip(raw, powers))
    if k_db is not None and not any(t.is_los for t in taps):
        raise ValidationError("K-factor given but no tap is marked is_los", "k_factor_db")
    return LinkProfile(name=name, taps=taps, k_factor_db=k_db, los_doppler_fraction=frac,
                       delay_unit_s=unit, metadata={"normalization_factor": factor})


def _load_cdl(doc: Mapping) -> CdlProfile:
    _reject_unknown(doc, _TOP_CDL, "")
    cl_doc = doc.get("clusters")
    if not isinstance(cl_doc, list) or not cl_doc:
        raise ValidationError("expected a non-empty array", "clusters")
    raw = []
    for i, c in enumerate(cl_doc):
        where = f"clusters[{i}]"
        if not isinstance(c, Mapping):
            raise ValidationError("expected an object", where)
        _reject_unknown(c, _CLUSTER_FIELDS, where)
        p = _number(c, "power", where)
        if p <= 0:
            raise ValidationError(f"power must be positive, got {p}", f"{where}.power")
        ang = {}
        for key in ("aod_deg", "aoa_deg", "zod_deg", "zoa_deg"):
            ang[key] = _number(c, key, where)
        for key in ("zod_deg", "zoa_deg"):
            if not 0.0 <= ang[key] <= 180.0:
                raise ValidationError(f"zenith angle must lie in [0, 180], got {ang[key]}", f"{where}.{key}")
        for key in ("aod_deg", "aoa_deg"):
            ang[key] = _wrap_azimuth(ang[key])
        raw.append((p, ang, _bool(c, "is_los", where)))
    _check_los([r[2] for r in raw], None, "cluster")
    powers, factor = _normalize([r[0] for r in raw])
    sp = doc.get("spreads_deg")
    if not isinstance(sp, Mapping):
        raise ValidationError("expected an object with keys asd, asa, zsd, zsa", "spreads_deg")
    _reject_unknown(sp, set(_SPREAD_KEYS), "spreads_deg")
    spreads = tuple(_number(sp, k, "spreads_deg") for k in _SPREAD_KEYS)
    if any(s < 0 for s in spreads):
        raise ValidationError("spreads must be >= 0", "spreads_deg")
    m = doc.get("rays_per_cluster", DEFAULT_RAYS_PER_CLUSTER)
    if isinstance(m, bool) or not isinstance(m, int) or m < 1:
        raise ValidationError(f"expected a positive integer, got {m!r}", "rays_per_cluster")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ValidationError("expected a non-empty string", "name")
    k_db = _k_factor_db(doc)
    clusters = tuple(CdlCluster(p, is_los=los, **ang) for (_, ang, los), p in zip(raw, powers))
    if k_db is not None and not any(c.is_los for c in clusters):
        raise ValidationError("K-factor given but no cluster is marked is_los", "k_factor_db")
    return CdlProfile(name=name, clusters=clusters, spreads_deg=spreads, rays_per_cluster=m,
                      k_factor_db=k_db, metadata={"normalization_factor": factor})


def load_profile(document) -> LinkProfile | CdlProfile:
    """Validate and load a profile from a JSON string, bytes, path or mapping."""
    if isinstance(document, Path):
        document = document.read_text(encoding="utf-8")
    if isinstance(document, (bytes, bytearray)):
        document = document.decode("utf-8")
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from exc
    if not isinstance(document, Mapping):
        raise ValidationError("profile document must be a JSON object")
    kind = document.get("kind")
    if kind == "tdl":
        return _load_tdl(document)
    if kind == "cdl":
        return _load_cdl(document)
    raise ValidationError(f"unknown kind {kind!r} (expected 'tdl' or 'cdl')", "kind")


def serialize_profile(profile: LinkProfile | CdlProfile) -> dict:
    """Inverse of :func:`load_profile` (for unscaled profiles)."""
    if isinstance(profile, LinkProfile):
        if profile.scaled:
            raise StateError("only unscaled profiles can be serialized")
        doc = {"kind": "tdl", "name": profile.name, "k_factor_db": profile.k_factor_db,
               "los_doppler_fraction": profile.los_doppler_fraction}
        if profile.delay_unit_s is not None:
            doc["delay_unit_s"] = profile.delay_unit_s
        doc["taps"] = [{"normalized_delay": t.normalized_delay, "power": t.power, "is_los": t.is_los}
                       for t in profile.taps]
        return doc
    return {
        "kind": "cdl",
        "name": profile.name,
        "k_factor_db": profile.k_factor_db,
        "spreads_deg": dict(zip(_SPREAD_KEYS, profile.spreads_deg)),
        "rays_per_cluster": profile.rays_per_cluster,
        "clusters": [{"power": c.power, "aod_deg": c.aod_deg, "aoa_deg": c.aoa_deg, "zod_deg": c.zod_deg,
                      "zoa_deg": c.zoa_deg, "is_los": c.is_los} for c in profile.clusters],
    }


def dump_profile(profile: LinkProfile | CdlProfile) -> str:
    return json.dumps(serialize_profile(profile), indent=2)


def scale_delays(profile: LinkProfile, delay_spread: float | None = None) -> LinkProfile:
    """Convert normalized delays to seconds: ``tau = normalized_delay * delay_spread``.

    When ``delay_spread`` is omitted the profile's own ``delay_unit_s`` is
    used (tables given in absolute units).
    """
    if profile.scaled:
        raise StateError(f"profile {profile.name!r} is already scaled to physical delays")
    if delay_spread is None:
        delay_spread = profile.delay_unit_s
        if delay_spread is None:
            raise ValidationError("a delay spread is required for normalized-delay profiles", "delay_spread")
    if not (delay_spread > 0 and math.isfinite(delay_spread)):
        raise ValidationError(f"must be positive, got {delay_spread}", "delay_spread")
    return replace(profile, delay_spread=float(delay_spread))


# ---------------------------------------------------------------------------
# registry


def _profile_dir():
    return resources.files("chansim") / "data" / "profiles"


def list_profiles() -> list[str]:
    return sorted(p.name[:-5] for p in _profile_dir().iterdir() if p.name.endswith(".json"))


def get_profile(name: str) -> LinkProfile | CdlProfile:
    """Load a bundled profile by name (e.g. ``"tdl-a"``) or from a JSON file path."""
    key = name.lower()
    res = _profile_dir() / f"{key}.json"
    if res.is_file():
        return load_profile(res.read_text(encoding="utf-8"))
    path = Path(name)
    if path.suffix == ".json" and path.is_file():
        return load_profile(path)
    raise KeyError(f"unknown profile {name!r}; bundled: {', '.join(list_profiles())}")
