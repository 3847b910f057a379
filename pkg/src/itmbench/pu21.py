"""Perceptually uniform encoding and the benchmark scoring metrics.

The encoding maps absolute luminance (cd/m^2) through a rational-power fit
into units where equal steps are roughly equally visible; PSNR and SSIM
computed in that space are the benchmark's quality scores. Coefficients are
configuration, loaded from a committed JSON file.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .color import DisplayMapping, luminance, to_display_luminance
from .errors import DomainError, ItmError, ShapeError
from .image_io import LinearImage, read_hdr, read_pfm

SCHEMA_VERSION = 1

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class PuEncoding:
    """Rational-power perceptual encoding V = p7*(((p1+p2*Y^p3)/(1+p4*Y^p3))^p5 - p6)."""

    p: tuple
    y_min: float = 0.005
    y_max: float = 10000.0
    name: str = "custom"

    def __post_init__(self):
        if len(self.p) != 7:
            raise DomainError("PU encoding needs exactly 7 coefficients")
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        if not (0 < self.y_min < self.y_max):
            raise DomainError("require 0 < y_min < y_max")
        grid = np.logspace(np.log10(self.y_min), np.log10(self.y_max), 256)
        vals = _pu_forward(grid, self.p)
        if not (np.diff(vals) > 0).all():
            raise DomainError("PU encoding must be strictly increasing on its range")
        if abs(vals[0]) > 1e-3:
            raise DomainError("PU encoding must be anchored near 0 at y_min")

    @staticmethod
    def from_json(path) -> "PuEncoding":
        doc = json.loads(Path(path).read_text())
        return PuEncoding(
            p=tuple(doc["p"]),
            y_min=float(doc["y_min"]),
            y_max=float(doc["y_max"]),
            name=str(doc.get("name", "custom")),
        )

    @staticmethod
    def default() -> "PuEncoding":
        global _DEFAULT_ENCODING
        if _DEFAULT_ENCODING is None:
            with resources.files("itmbench.data").joinpath("pu_banding_glare.json").open() as fh:
                doc = json.load(fh)
            _DEFAULT_ENCODING = PuEncoding(
                p=tuple(doc["p"]), y_min=doc["y_min"], y_max=doc["y_max"], name=doc["name"]
            )
        return _DEFAULT_ENCODING


_DEFAULT_ENCODING = None


def _pu_forward(y: np.ndarray, p: tuple) -> np.ndarray:
    z = np.power(y, p[2])
    return p[6] * (((p[0] + p[1] * z) / (1.0 + p[3] * z)) ** p[4] - p[5])


def pu_encode(y, encoding: PuEncoding | None = None):
    """Encode absolute luminance (cd/m^2) to PU units; input clamped to the fit range."""
    enc = encoding or PuEncoding.default()
    arr = np.asarray(y, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise DomainError("luminance must be finite")
    clamped = np.clip(arr, enc.y_min, enc.y_max)
    out = _pu_forward(clamped, enc.p)
    return out if out.ndim else float(out)


def pu_decode(v, encoding: PuEncoding | None = None):
    """Inverse of pu_encode on the encoding's output range (used by the SDE demo)."""
    enc = encoding or PuEncoding.default()
    p = enc.p
    arr = np.asarray(v, dtype=np.float64)
    lo = _pu_forward(np.asarray(enc.y_min), p)
    hi = _pu_forward(np.asarray(enc.y_max), p)
    arr = np.clip(arr, lo, hi)
    ratio = (arr / p[6] + p[5]) ** (1.0 / p[4])
    z = (ratio - p[0]) / (p[1] - ratio * p[3])
    y = np.maximum(z, 0.0) ** (1.0 / p[2])
    out = np.clip(y, enc.y_min, enc.y_max)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# SSIM / PSNR kernels


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _windowed_mean(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    # separable valid-mode correlation with the normalized 1-D window
    from numpy.lib.stride_tricks import sliding_window_view

    out = sliding_window_view(a, len(w), axis=0) @ w
    return sliding_window_view(out, len(w), axis=1) @ w


def ssim_mean(x: np.ndarray, y: np.ndarray, data_range: float) -> float:
    """Mean local SSIM over two 2-D fields (11x11 Gaussian window, sigma 1.5)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"SSIM inputs differ in shape: {x.shape} vs {y.shape}")
    if x.ndim != 2 or min(x.shape) < SSIM_WINDOW:
        raise ShapeError(f"SSIM needs a 2-D image at least {SSIM_WINDOW} px per side")
    w = _gaussian_window()
    mx = _windowed_mean(x, w)
    my = _windowed_mean(y, w)
    mxx = _windowed_mean(x * x, w)
    myy = _windowed_mean(y * y, w)
    mxy = _windowed_mean(x * y, w)
    vx = mxx - mx * mx
    vy = myy - my * my
    cov = mxy - mx * my
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    ssim_map = ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    return float(ssim_map.mean())


def _image_pair(pred, gt):
    a = np.asarray(getattr(pred, "data", pred), dtype=np.float64)
    b = np.asarray(getattr(gt, "data", gt), dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def pu_psnr(pred, gt, encoding: PuEncoding | None = None,
            mapping: DisplayMapping = DisplayMapping()) -> float:
    """PSNR in PU space; peak is the PU value of the display peak. inf when identical."""
    a, b = _image_pair(pred, gt)
    enc = encoding or PuEncoding.default()
    pa = pu_encode(to_display_luminance(a, mapping), enc)
    pb = pu_encode(to_display_luminance(b, mapping), enc)
    peak = pu_encode(mapping.peak_luminance, enc)
    mse = float(np.mean((pa - pb) ** 2))
    if mse == 0.0:
        return float("inf")
    return 20.0 * np.log10(peak / np.sqrt(mse))


def pu_ssim(pred, gt, encoding: PuEncoding | None = None,
            mapping: DisplayMapping = DisplayMapping()) -> float:
    """Mean SSIM of PU-encoded display luminance (single channel)."""
    a, b = _image_pair(pred, gt)
    enc = encoding or PuEncoding.default()
    la = pu_encode(luminance(to_display_luminance(a, mapping)), enc)
    lb = pu_encode(luminance(to_display_luminance(b, mapping)), enc)
    peak = pu_encode(mapping.peak_luminance, enc)
    return ssim_mean(la, lb, data_range=peak)


def rmse_linear(pred, gt) -> float:
    """Root mean square error in the linear HDR domain."""
    a, b = _image_pair(pred, gt)
    return float(np.sqrt(np.mean((a - b) ** 2)))


# ---------------------------------------------------------------------------
# Dataset scoring and report


@dataclass
class PerImageScore:
    image: str
    pu_psnr: float
    pu_ssim: float
    rmse_linear: float


@dataclass
class MetricReport:
    per_image: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    runtime_ms_per_image: float = 0.0

    @property
    def aggregate(self) -> dict:
        if not self.per_image:
            return {"pu_psnr": None, "pu_ssim": None, "rmse_linear": None}
        return {
            "pu_psnr": float(np.mean([r.pu_psnr for r in self.per_image])),
            "pu_ssim": float(np.mean([r.pu_ssim for r in self.per_image])),
            "rmse_linear": float(np.mean([r.rmse_linear for r in self.per_image])),
        }

    def to_json(self) -> str:
        def num(v):
            if v is None:
                return None
            if np.isnan(v):
                return None
            if np.isinf(v):
                return "inf" if v > 0 else "-inf"
            return float(v)

        doc = {
            "schema": SCHEMA_VERSION,
            "per_image": [
                {
                    "image": r.image,
                    "pu_psnr": num(r.pu_psnr),
                    "pu_ssim": num(r.pu_ssim),
                    "rmse_linear": num(r.rmse_linear),
                }
                for r in self.per_image
            ],
            "aggregate": {k: num(v) for k, v in self.aggregate.items()},
            "runtime_ms_per_image": float(self.runtime_ms_per_image),
            "errors": list(self.errors),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        # column order is frozen: image,psnr,ssim,rmse (schema version 1)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["image", "psnr", "ssim", "rmse"])
        for r in self.per_image:
            psnr = "inf" if np.isinf(r.pu_psnr) else repr(r.pu_psnr)
            writer.writerow([r.image, psnr, repr(r.pu_ssim), repr(r.rmse_linear)])
        return buf.getvalue()


_HDR_READERS = {".hdr": read_hdr, ".pfm": read_pfm}


def _load_any(path: Path) -> LinearImage:
    reader = _HDR_READERS.get(path.suffix.lower())
    if reader is None:
        raise DomainError(f"no HDR reader for {path.suffix!r}")
    return reader(path)


def _index_dir(directory: Path) -> dict:
    out = {}
    for path in sorted(directory.iterdir()):
        if path.suffix.lower() in _HDR_READERS:
            out[path.stem] = path
    return out


def score_dataset(pred_dir, gt_dir, encoding: PuEncoding | None = None,
                  mapping: DisplayMapping = DisplayMapping(), jobs: int = 1) -> MetricReport:
    """Score every prediction against its ground truth, matching files by stem.

    Missing or unreadable predictions become error entries rather than silent
    skips; report ordering is sorted by stem so output is independent of
    scheduling.
    """
    enc = encoding or PuEncoding.default()
    preds = _index_dir(Path(pred_dir))
    gts = _index_dir(Path(gt_dir))
    report = MetricReport()
    if not gts:
        report.errors.append("no ground-truth images found")
    for stem in sorted(set(preds) - set(gts)):
        report.errors.append(f"unmatched prediction: {stem}")

    def score_one(stem):
        if stem not in preds:
            return stem, None, f"missing prediction: {stem}"
        try:
            pred = _load_any(preds[stem])
            gt = _load_any(gts[stem])
            row = PerImageScore(
                image=stem,
                pu_psnr=pu_psnr(pred, gt, enc, mapping),
                pu_ssim=pu_ssim(pred, gt, enc, mapping),
                rmse_linear=rmse_linear(pred, gt),
            )
            return stem, row, None
        except ItmError as exc:
            return stem, None, f"{stem}: {exc}"

    stems = sorted(gts)
    start = time.perf_counter()
    if jobs > 1 and len(stems) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(score_one, stems))
    else:
        results = [score_one(s) for s in stems]
    elapsed_ms = (time.perf_counter() - start) * 1000.0

    results.sort(key=lambda t: t[0])
    for _, row, err in results:
        if row is not None:
            report.per_image.append(row)
        if err is not None:
            report.errors.append(err)
    report.errors.sort()
    if stems:
        report.runtime_ms_per_image = elapsed_ms / len(stems)
    return report


# ---------------------------------------------------------------------------
# Leaderboard


def rank_teams(rows) -> list:
    """Sort (team, psnr, ssim) rows: PSNR desc, then SSIM desc, then name."""
    return sorted(rows, key=lambda r: (-float(r[1]), -float(r[2]), str(r[0])))


def format_leaderboard(rows) -> str:
    ranked = rank_teams(rows)
    name_w = max([len(str(r[0])) for r in ranked] + [len("Team")])
    lines = [f"{'Rank':>4}  {'Team':<{name_w}}  {'PU-PSNR (dB)':>12}  {'PU-SSIM':>8}"]
    for i, (team, psnr, ssim) in enumerate(ranked, start=1):
        lines.append(f"{i:>4}  {team:<{name_w}}  {float(psnr):>12.2f}  {float(ssim):>8.2f}")
    return "\n".join(lines) + "\n"
