"""Rate-distortion sweep harness.

Runs a set of codec configurations over a directory of images, verifies
every bitstream by decoding it, measures PSNR / MS-SSIM, and collects
per-point rate audits (estimated vs actual bits). Row order is
deterministic: sorted by image filename, then configuration order, then
rate point order. The CSV schema is fixed:

    config, image, bpp, psnr_db, msssim, est_bits, actual_bits

where `config` is "<name>:<point label>" so one file carries whole
curves. The summary aggregates each configuration into an averaged
R-D curve, its worst per-image audit error, and optionally a BD-rate
against a named reference configuration.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

from .bdrate import RdPoint, bd_rate
from .container import decode_array, encode_array, load_image
from .errors import DegenerateInput, IoError
from .metrics import ms_ssim, psnr
from .wavelets import WaveletKind

CSV_FIELDS = ("config", "image", "bpp", "psnr_db", "msssim",
              "est_bits", "actual_bits")

DEFAULT_QSTEPS = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)


@dataclass(frozen=True)
class SweepConfig:
    """One codec configuration: a named family of rate points."""

    name: str
    mode: str = "classical"
    wavelet: WaveletKind = WaveletKind.CDF53
    levels: int = 3
    qsteps: tuple = DEFAULT_QSTEPS
    models: tuple = field(default_factory=tuple)  # neural rate points

    def points(self):
        """Yield (label, model, encode options) per rate point."""
        if self.mode == "classical":
            for q in self.qsteps:
                yield (f"q{q:g}", None,
                       {"mode": "classical", "qstep": float(q),
                        "levels": self.levels, "wavelet": self.wavelet})
        elif self.mode == "neural":
            for i, model in enumerate(self.models):
                yield f"m{i}", model, {"mode": "neural"}
        else:
            raise DegenerateInput(f"unknown sweep mode {self.mode!r}")


def list_images(image_dir) -> list:
    try:
        names = sorted(os.listdir(image_dir))
    except OSError as e:
        raise IoError(f"cannot list image directory {image_dir}: {e}") \
            from e
    paths = [os.path.join(image_dir, n) for n in names
             if n.lower().endswith((".png", ".ppm"))]
    if not paths:
        raise IoError(f"no PNG/PPM images in {image_dir}")
    return paths


def rd_sweep(image_dir, configs, csv_path=None, reference=None):
    """Sweep configs over a directory; returns (rows, summary)."""
    configs = list(configs)
    if not configs:
        raise DegenerateInput("no configurations to sweep")
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise DegenerateInput("configuration names must be unique")
    if reference is not None and reference not in names:
        raise DegenerateInput(f"reference config {reference!r} is not in "
                              f"the sweep")

    paths = list_images(image_dir)
    rows = []
    for path in paths:
        image = load_image(path)
        fname = os.path.basename(path)
        for cfg in configs:
            for label, model, options in cfg.points():
                data, report = encode_array(image, model, **options)
                rec = decode_array(data, model)
                rows.append({
                    "config": f"{cfg.name}:{label}",
                    "image": fname,
                    "bpp": report.bpp,
                    "psnr_db": psnr(rec, image),
                    "msssim": ms_ssim(rec, image),
                    "est_bits": report.est_bits,
                    "actual_bits": report.actual_bits,
                })

    summary = {"images": [os.path.basename(p) for p in paths],
               "reference": reference, "configs": {}}
    for cfg in configs:
        labels = [label for label, _, _ in cfg.points()]
        curve = [_mean_point(rows, f"{cfg.name}:{label}")
                 for label in labels]
        audits = [_audit(r) for r in rows
                  if r["config"].split(":", 1)[0] == cfg.name]
        summary["configs"][cfg.name] = {
            "curve": curve, "max_audit": max(audits)}
    if reference is not None:
        ref_curve = summary["configs"][reference]["curve"]
        for cfg in configs:
            entry = summary["configs"][cfg.name]
            entry["bd_rate_vs_ref"] = bd_rate(ref_curve, entry["curve"])

    if csv_path is not None:
        write_csv(rows, csv_path)
    return rows, summary


def _audit(row) -> float:
    return abs(row["actual_bits"] - row["est_bits"]) / row["est_bits"]


def _mean_point(rows, config_cell) -> RdPoint:
    sel = [r for r in rows if r["config"] == config_cell]
    n = len(sel)
    return RdPoint(bpp=sum(r["bpp"] for r in sel) / n,
                   psnr_db=sum(r["psnr_db"] for r in sel) / n,
                   msssim=sum(r["msssim"] for r in sel) / n)


def write_csv(rows, path):
    try:
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
            writer.writeheader()
            for row in rows:
                writer.writerow({
                    "config": row["config"],
                    "image": row["image"],
                    "bpp": f"{row['bpp']:.6f}",
                    "psnr_db": f"{row['psnr_db']:.4f}",
                    "msssim": f"{row['msssim']:.6f}",
                    "est_bits": f"{row['est_bits']:.1f}",
                    "actual_bits": row["actual_bits"],
                })
    except OSError as e:
        raise IoError(f"cannot write CSV {path}: {e}") from e
    return path


def read_csv(path) -> list:
    """Load sweep rows back; numeric fields become floats/ints."""
    try:
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != CSV_FIELDS:
                raise IoError(f"{path}: not a sweep table "
                              f"(columns {reader.fieldnames})")
            rows = []
            for raw in reader:
                rows.append({
                    "config": raw["config"],
                    "image": raw["image"],
                    "bpp": float(raw["bpp"]),
                    "psnr_db": float(raw["psnr_db"]),
                    "msssim": float(raw["msssim"]),
                    "est_bits": float(raw["est_bits"]),
                    "actual_bits": int(raw["actual_bits"]),
                })
            return rows
    except OSError as e:
        raise IoError(f"cannot read CSV {path}: {e}") from e


def curve_from_rows(rows, config_name) -> list:
    """Averaged R-D curve of one configuration from sweep rows."""
    labels = []
    for row in rows:
        name, _, label = row["config"].partition(":")
        if name == config_name and label not in labels:
            labels.append(label)
    if not labels:
        raise DegenerateInput(f"no rows for config {config_name!r}")
    return [_mean_point(rows, f"{config_name}:{label}")
            for label in labels]
