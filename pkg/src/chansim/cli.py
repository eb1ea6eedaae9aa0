"""Command-line front end: dataset generation, experiments, import and export.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O failure,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .baselines import (
    gaussian_generate,
    lmmse_fit,
    nmse,
    normalize_dataset,
    pca_fit,
    pca_roundtrip,
    sample_mean_cov,
    snr_to_noise_var,
)
from .cdl import RAY_MODES, generate_cdl_dataset, ula_config, wavelength_for
from .chds import (
    read_chds,
    read_csv_complex,
    read_raw_interleaved,
    write_chds,
    write_csv_complex,
    write_raw_interleaved,
)
from .dataset import ChannelDataset
from .diagnostics import gaussianity_report, spectral_efficiency, write_cdf_csv
from .errors import ChansimError, NumericalError
from .profiles import CdlProfile, LinkProfile, get_profile, list_profiles, scale_delays
from .stochastics import RngStream, derive_seed, standard_complex_normal
from .tdl import GridConfig, generate_tdl_dataset

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERICAL = 0, 2, 3, 4
EXPERIMENTS = ("compression", "estimation", "generation")
IMPORT_FORMATS = ("csv-complex", "raw-interleaved-f64")


class UsageError(ChansimError, ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def parse_sweep(text: str, kind=float) -> list:
    """``"4,8,16"`` or an inclusive range ``"start:stop:step"``."""
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            if step <= 0 or stop < start:
                raise UsageError(f"bad sweep range {text!r}")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(n)]
        else:
            values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"bad sweep {text!r}: {exc}") from None
    if not values:
        raise UsageError("sweep must not be empty")
    if kind is int:
        if any(v != int(v) for v in values):
            raise UsageError(f"sweep {text!r} must contain integers")
        values = [int(v) for v in values]
    return values


# ---------------------------------------------------------------------------
# generation


def _tdl_grid(args) -> GridConfig:
    return GridConfig(
        n_subcarriers=args.subcarriers,
        n_symbols=args.symbols,
        subcarrier_spacing=args.scs_khz * 1e3,
        symbol_duration=args.duration_ms * 1e-3 / args.symbols,
        max_doppler=args.doppler_hz,
    )


def _load_link(name: str, kind: type):
    try:
        profile = get_profile(name)
    except KeyError:
        raise UsageError(f"unknown profile {name!r}; available: {', '.join(list_profiles())}") from None
    if not isinstance(profile, kind):
        want = "tdl" if kind is LinkProfile else "cdl"
        raise UsageError(f"profile {name!r} is a {profile.kind} profile, expected {want}")
    return profile


def _tdl_profile(args) -> LinkProfile:
    profile = _load_link(args.profile, LinkProfile)
    if args.los_doppler_fraction is not None:
        profile = replace(profile, los_doppler_fraction=args.los_doppler_fraction)
    if profile.delay_unit_s is not None:
        return scale_delays(profile)
    return scale_delays(profile, args.delay_spread_ns * 1e-9)


def _generate(args, count: int, start_index: int) -> ChannelDataset:
    workers = args.threads
    if args.generator == "tdl":
        return generate_tdl_dataset(_tdl_profile(args), _tdl_grid(args), count, args.seed,
                                    start_index=start_index, workers=workers)
    profile = _load_link(args.profile, CdlProfile)
    lam = wavelength_for(args.fc_ghz * 1e9)
    tx = ula_config(args.tx, args.spacing, lam)
    rx = ula_config(args.rx, args.spacing, lam)
    return generate_cdl_dataset(profile, tx, rx, count, args.seed, args.ray_mode, angle_seed=args.angle_seed,
                                redraw_angles=args.redraw_angles, start_index=start_index, workers=workers)


def cmd_generate(args) -> int:
    ds = _generate(args, args.count, args.start_index)
    if not args.no_normalize:
        ds, _ = normalize_dataset(ds)
    write_chds(args.out, ds)
    print(f"wrote {args.out}: count={ds.count} dim={ds.dim} scale={ds.normalization_scale:.17g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentConfig:
    """Everything an experiment run needs; mirrors the ``experiment`` flags."""

    experiment: str
    out: str
    sweep: list = field(default_factory=list)
    train: str | None = None
    val: str | None = None
    train_count: int = 60000
    val_count: int = 10000
    seed: int = 0
    centered: bool = False
    splits: int = 20
    multiplier: float = 1.5

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if not self.sweep:
            raise UsageError("sweep must not be empty")
        if self.train_count < 1 or self.val_count < 1:
            raise UsageError("counts must be >= 1")
        if self.experiment == "compression" and any(int(v) != v or v < 2 or v % 2 for v in self.sweep):
            raise UsageError("compression sweep values (N_L) must be positive even integers")
        if self.experiment == "generation" and len(self.sweep) != 1:
            raise UsageError("generation takes exactly one SNR value")


def _experiment_data(args, cfg: ExperimentConfig) -> tuple[ChannelDataset, ChannelDataset | None]:
    if cfg.train:
        train = read_chds(cfg.train)
        val = read_chds(cfg.val) if cfg.val else None
        if val is not None and val.dim != train.dim:
            raise UsageError(f"train dim {train.dim} and validation dim {val.dim} differ")
        return train, val
    if not args.profile:
        raise UsageError("either --train or --profile is required")
    # disjoint realization indices give independent train and validation sets
    train = _generate(args, cfg.train_count, 0)
    val = _generate(args, cfg.val_count, cfg.train_count)
    train, scale = normalize_dataset(train)
    val = replace(val, samples=val.samples * scale, normalization_scale=val.normalization_scale * scale)
    return train, val


def run_compression(cfg, train, val, out: Path) -> list[tuple]:
    cov = sample_mean_cov(train, centered=cfg.centered)
    rows = []
    for n_latent in cfg.sweep:
        if n_latent > 2 * cov.dim:
            raise UsageError(f"N_L = {n_latent} exceeds 2*dim = {2 * cov.dim}")
        codec = pca_fit(cov, int(n_latent))
        x = val.samples - cov.effective_mean
        est = pca_roundtrip(codec, x) + cov.effective_mean
        analytic = float(np.sum(np.clip(codec.eigenvalues[int(n_latent) // 2:], 0, None)) / cov.dim)
        rows.append((int(n_latent), nmse(val.samples, est), analytic))
    _write_rows(out / "compression.csv", ("n_latent", "pca_nmse", "analytic_nmse"), rows)
    return rows


def _noise(shape, noise_var: float, seed: int, tag: str) -> np.ndarray:
    rng = RngStream(derive_seed(seed, tag)).generator()
    return np.sqrt(noise_var) * standard_complex_normal(rng, shape)


def run_estimation(cfg, train, val, out: Path) -> list[tuple]:
    from .baselines import analytic_mmse

    cov = sample_mean_cov(train, centered=cfg.centered)
    unit = _noise(val.samples.shape, 1.0, cfg.seed, "estimation-noise")
    rows = []
    for snr in cfg.sweep:
        var = snr_to_noise_var(snr)
        est = lmmse_fit(cov, None, var)(val.samples + np.sqrt(var) * unit)
        rows.append((float(snr), nmse(val.samples, est), analytic_mmse(cov, None, var)))
    _write_rows(out / "estimation.csv", ("snr_db", "lmmse_nmse", "analytic_mmse"), rows)
    return rows


def run_generation(cfg, train, val, out: Path):
    gt = val if val is not None else train
    var = snr_to_noise_var(cfg.sweep[0])
    surrogate = gaussian_generate(sample_mean_cov(train, centered=True), gt.count,
                                  derive_seed(cfg.seed, "generation-surrogate"))
    write_cdf_csv(out / "se_cdf_ground_truth.csv", spectral_efficiency(gt, var))
    write_cdf_csv(out / "se_cdf_gaussian.csv", spectral_efficiency(surrogate, var))
    report = gaussianity_report(gt, var, cfg.seed, n_splits=cfg.splits, multiplier=cfg.multiplier)
    (out / "gaussianity_report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    return report


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args)
    cfg.validate()
    args.seed = cfg.seed
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    train, val = _experiment_data(args, cfg)
    if val is None and cfg.experiment != "generation":
        raise UsageError(f"{cfg.experiment} needs a validation set (--val)")
    if cfg.experiment == "compression":
        for row in run_compression(cfg, train, val, out):
            print("N_L={} pca_nmse={:.6g} analytic_nmse={:.6g}".format(*row))
    elif cfg.experiment == "estimation":
        for row in run_estimation(cfg, train, val, out):
            print("snr_db={:g} lmmse_nmse={:.6g} analytic_mmse={:.6g}".format(*row))
    else:
        rep = run_generation(cfg, train, val, out)
        print(f"verdict={rep.verdict} tv={rep.tv_vs_gaussian:.4g} floor={rep.tv_noise_floor:.4g} "
              f"ks={rep.ks_spectral_efficiency:.4g} ks_floor={rep.ks_noise_floor:.4g}")
    return EXIT_OK


_DEFAULT_SWEEPS = {"compression": "4,8,16,32", "estimation": "-10:30:5", "generation": "20"}


def _experiment_config(args) -> ExperimentConfig:
    values: dict[str, Any] = {}
    if args.config:
        try:
            values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config}: {exc}") from None
        if not isinstance(values, dict):
            raise UsageError("config must be a JSON object")
        # generation parameters in the file fill in the matching flags
        for key in list(values):
            attr = key.replace("-", "_")
            if attr not in ExperimentConfig.__dataclass_fields__:
                if not hasattr(args, attr):
                    raise UsageError(f"config: unknown key {key!r}")
                setattr(args, attr, values.pop(key))
    for key in ("out", "train", "val", "train_count", "val_count", "seed", "splits", "multiplier"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if args.centered:
        values["centered"] = True
    values.setdefault("experiment", args.experiment)
    if "out" not in values:
        raise UsageError("an output directory is required (--out)")
    kind = int if values["experiment"] == "compression" else float
    sweep = args.sweep if args.sweep is not None else values.get("sweep")
    if sweep is None:
        sweep = _DEFAULT_SWEEPS.get(values["experiment"], "")
    values["sweep"] = parse_sweep(sweep, kind) if isinstance(sweep, str) else [kind(v) for v in sweep]
    if args.profile:
        args.generator = "cdl" if isinstance(get_profile_safe(args.profile), CdlProfile) else "tdl"
    return ExperimentConfig(**values)


def get_profile_safe(name):
    try:
        return get_profile(name)
    except KeyError:
        raise UsageError(f"unknown profile {name!r}; available: {', '.join(list_profiles())}") from None


# ---------------------------------------------------------------------------
# import / export


def cmd_import(args) -> int:
    if args.format == "csv-complex":
        samples = read_csv_complex(args.input, args.dim)
    else:
        samples = read_raw_interleaved(args.input, args.dim)
    ds = ChannelDataset(samples, seed=args.seed,
                        provenance={"source": str(Path(args.input).resolve()), "format": args.format})
    if not args.no_normalize:
        ds, _ = normalize_dataset(ds)
    write_chds(args.out, ds)
    print(f"wrote {args.out}: count={ds.count} dim={ds.dim}")
    return EXIT_OK


def cmd_export(args) -> int:
    ds = read_chds(args.input)
    if args.format == "csv-complex":
        write_csv_complex(args.out, ds.samples)
    else:
        write_raw_interleaved(args.out, ds.samples)
    return EXIT_OK


def cmd_profiles(args) -> int:
    for name in list_profiles():
        print(name)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_tdl_flags(p):
    g = p.add_argument_group("TDL grid")
    g.add_argument("--subcarriers", type=int, default=48)
    g.add_argument("--symbols", type=int, default=14)
    g.add_argument("--scs-khz", type=float, default=60.0, help="subcarrier spacing in kHz")
    g.add_argument("--duration-ms", type=float, default=0.25, help="grid duration; symbol spacing is duration/symbols")
    g.add_argument("--doppler-hz", type=float, default=800.0)
    g.add_argument("--delay-spread-ns", type=float, default=30.0)
    g.add_argument("--los-doppler-fraction", type=float, default=None)


def _add_cdl_flags(p):
    g = p.add_argument_group("CDL arrays")
    g.add_argument("--tx", type=int, default=16, help="transmit ULA elements")
    g.add_argument("--rx", type=int, default=8, help="receive ULA elements")
    g.add_argument("--fc-ghz", type=float, default=3.5)
    g.add_argument("--spacing", type=float, default=0.5, help="element spacing in wavelengths")
    g.add_argument("--ray-mode", choices=RAY_MODES, default="iid-laplacian")
    g.add_argument("--angle-seed", type=int, default=0, help="seed of the frozen ray-angle draw")
    g.add_argument("--redraw-angles", action="store_true", help="draw new ray angles for every realization")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chansim", description="Link-level TDL/CDL channel simulation toolkit.")
    parser.add_argument("--version", action="version", version=f"chansim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, flags in (("gen-tdl", _add_tdl_flags), ("gen-cdl", _add_cdl_flags)):
        p = sub.add_parser(name, help=f"generate a {name[4:].upper()} dataset")
        p.add_argument("--profile", required=True)
        p.add_argument("--count", type=int, required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--start-index", type=int, default=0)
        p.add_argument("--no-normalize", action="store_true")
        _add_common(p)
        flags(p)
        p.set_defaults(func=cmd_generate, generator=name[4:])

    p = sub.add_parser("experiment", help="run a classical-method experiment and write CSV results")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="JSON file with experiment settings")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--train", default=None, help="training CHDS file")
    p.add_argument("--val", default=None, help="validation CHDS file")
    p.add_argument("--profile", default=None, help="generate train/validation data from this profile instead")
    p.add_argument("--train-count", type=int, default=None)
    p.add_argument("--val-count", type=int, default=None)
    p.add_argument("--sweep", default=None, help="N_L list or SNR dB list, e.g. 4,8,16 or -10:30:5")
    p.add_argument("--centered", action="store_true", help="use the centered covariance")
    p.add_argument("--splits", type=int, default=None, help="half-splits for the noise floor")
    p.add_argument("--multiplier", type=float, default=None, help="verdict threshold relative to the floor")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    _add_tdl_flags(p)
    _add_cdl_flags(p)
    p.set_defaults(func=cmd_experiment, generator=None)

    p = sub.add_parser("import", help="convert external data to CHDS")
    p.add_argument("input")
    p.add_argument("--format", choices=IMPORT_FORMATS, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-normalize", action="store_true")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("export", help="convert CHDS to text or raw data")
    p.add_argument("input")
    p.add_argument("--format", choices=IMPORT_FORMATS, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("profiles", help="list bundled profiles")
    p.set_defaults(func=cmd_profiles)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"chansim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"chansim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ChansimError, ValueError, TypeError) as exc:
        print(f"chansim: {exc}", file=sys.stderr)
        return EXIT_USAGE


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
