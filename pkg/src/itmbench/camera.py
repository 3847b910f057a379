"""Virtual camera: turn HDR sources into degraded 8-bit LDR inputs.

Pipeline order is fixed: scale by 2^ev, add Gaussian read noise, clip to
[0, 1], apply the camera response curve, quantize to 8 bits (round half up).
Dataset generation derives one seed per output pair from the master seed so
results are identical regardless of worker count or iteration order.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .color import luminance
from .errors import DomainError, ItmError, RangeError
from .image_io import LinearImage, Ldr8Image, read_hdr, read_pfm, write_hdr, write_ldr8, write_pfm

# Exposure clamp when an image has too few bright/dark pixels to pin a bound.
_EV_LIMIT = 30.0


@dataclass(frozen=True)
class Crf:
    """Monotone camera response curve on [0, 1] with an analytic inverse.

    Families: power (f = x^g), sigmoid (f = (1+c) x^n / (x^n + c)), and a
    256-entry monotone table interpolated linearly. All satisfy f(0) = 0 and
    f(1) = 1.
    """

    family: str
    gamma: float = 1.0
    n: float = 1.0
    sigma_c: float = 1.0
    table: tuple = ()

    def __post_init__(self):
        if self.family == "gamma":
            if not (self.gamma > 0):
                raise DomainError("gamma must be positive")
        elif self.family == "sigmoid":
            if not (self.n > 0 and self.sigma_c > 0):
                raise DomainError("sigmoid needs n > 0 and sigma_c > 0")
        elif self.family == "table":
            t = np.asarray(self.table, dtype=np.float64)
            if t.shape != (256,):
                raise DomainError("table CRF needs exactly 256 entries")
            if not (np.diff(t) > 0).all():
                raise DomainError("table CRF must be strictly increasing")
            t = (t - t[0]) / (t[-1] - t[0])  # normalize to f(0)=0, f(1)=1
            object.__setattr__(self, "table", tuple(t))
        else:
            raise DomainError(f"unknown CRF family {self.family!r}")

    @staticmethod
    def identity() -> "Crf":
        return Crf("gamma", gamma=1.0)

    @staticmethod
    def power(gamma: float) -> "Crf":
        return Crf("gamma", gamma=float(gamma))

    @staticmethod
    def sigmoid(n: float, sigma_c: float) -> "Crf":
        return Crf("sigmoid", n=float(n), sigma_c=float(sigma_c))

    @staticmethod
    def from_table(values) -> "Crf":
        return Crf("table", table=tuple(float(v) for v in values))

    def apply(self, v):
        x = _unit(v, "CRF input")
        if self.family == "gamma":
            out = x**self.gamma
        elif self.family == "sigmoid":
            xn = x**self.n
            out = (1.0 + self.sigma_c) * xn / (xn + self.sigma_c)
        else:
            out = np.interp(x, np.linspace(0.0, 1.0, 256), np.asarray(self.table))
        return out if out.ndim else float(out)

    def inverse(self, v):
        y = _unit(v, "CRF inverse input")
        if self.family == "gamma":
            out = y ** (1.0 / self.gamma)
        elif self.family == "sigmoid":
            xn = y * self.sigma_c / (1.0 + self.sigma_c - y)
            out = np.maximum(xn, 0.0) ** (1.0 / self.n)
        else:
            out = np.interp(y, np.asarray(self.table), np.linspace(0.0, 1.0, 256))
        return out if out.ndim else float(out)

    def as_dict(self) -> dict:
        if self.family == "gamma":
            return {"family": "gamma", "gamma": self.gamma}
        if self.family == "sigmoid":
            return {"family": "sigmoid", "n": self.n, "sigma_c": self.sigma_c}
        return {"family": "table", "table": list(self.table)}

    @staticmethod
    def from_dict(doc: dict) -> "Crf":
        family = doc.get("family")
        if family == "gamma":
            return Crf.power(doc["gamma"])
        if family == "sigmoid":
            return Crf.sigmoid(doc["n"], doc["sigma_c"])
        if family == "table":
            return Crf.from_table(doc["table"])
        raise DomainError(f"unknown CRF family {family!r}")

    @staticmethod
    def from_spec(spec: str) -> "Crf":
        """Parse CLI syntax: 'identity', 'gamma:G', 'sigmoid:N,C', 'table:PATH'."""
        name, _, args = spec.partition(":")
        try:
            if name == "identity":
                return Crf.identity()
            if name == "gamma":
                return Crf.power(float(args))
            if name == "sigmoid":
                n, c = (float(v) for v in args.split(","))
                return Crf.sigmoid(n, c)
            if name == "table":
                values = [float(line) for line in Path(args).read_text().split()]
                return Crf.from_table(values)
        except (ValueError, OSError) as exc:
            raise DomainError(f"bad CRF spec {spec!r}: {exc}") from None
        raise DomainError(f"unknown CRF spec {spec!r}")


def _unit(v, name: str) -> np.ndarray:
    x = np.asarray(v, dtype=np.float64)
    if not np.isfinite(x).all() or (x < 0).any() or (x > 1).any():
        raise DomainError(f"{name} must lie in [0, 1]")
    return x


@dataclass(frozen=True)
class ExposureRange:
    ev_min: float
    ev_max: float

    def __post_init__(self):
        if self.ev_min > self.ev_max:
            raise DomainError("require ev_min <= ev_max")


@dataclass(frozen=True)
class NoiseParams:
    """Gaussian read-noise level in linear [0, 1] units.

    sigma_read drives a single simulation; sigma_range is the sampling
    interval used per generated pair.
    """

    sigma_read: float = 0.0
    sigma_range: tuple = (0.0, 0.01)

    def __post_init__(self):
        lo, hi = self.sigma_range
        if self.sigma_read < 0 or lo < 0 or hi < lo:
            raise DomainError("noise levels must be non-negative with lo <= hi")


def estimate_exposure_range(image, sat_frac: float = 0.05, dark_frac: float = 0.10) -> ExposureRange:
    """Largest exposure window keeping clipping fractions within budget.

    ev_max is the largest ev whose saturated fraction (luminance scaled above
    1.0) stays <= sat_frac; ev_min the smallest ev whose dark fraction (below
    2^-8) stays <= dark_frac. Both are exact order statistics of the sorted
    luminances (the limit of bisecting the step-shaped constraint). When
    zeros exhaust the dark budget the threshold falls back to the smallest
    positive luminance; if the two bounds cross (inner band wider than 8
    stops) both collapse to their midpoint.
    """
    if not (0 < sat_frac < 1 and 0 < dark_frac < 1):
        raise DomainError("sat_frac and dark_frac must lie in (0, 1)")
    lum = np.sort(luminance(np.asarray(image.data, dtype=np.float64)).ravel())
    n = lum.size
    if lum[-1] <= 0:
        raise RangeError("cannot estimate exposure range of an all-zero image")

    k_sat = int(np.floor(sat_frac * n))
    bright = lum[n - 1 - k_sat]
    ev_max = -np.log2(bright) if bright > 0 else _EV_LIMIT

    k_dark = int(np.floor(dark_frac * n))
    dark = lum[min(k_dark, n - 1)]
    if dark <= 0:
        dark = lum[lum > 0][0]
    ev_min = -8.0 - np.log2(dark)

    ev_max = float(np.clip(ev_max, -_EV_LIMIT, _EV_LIMIT))
    ev_min = float(np.clip(ev_min, -_EV_LIMIT, _EV_LIMIT))
    if ev_min > ev_max:
        ev_min = ev_max = 0.5 * (ev_min + ev_max)
    return ExposureRange(ev_min=ev_min, ev_max=ev_max)


def quantize8(v) -> np.ndarray:
    """Quantize [0, 1] values to uint8 with round-half-up (documented tie break)."""
    return np.floor(np.asarray(v, dtype=np.float64) * 255.0 + 0.5).astype(np.uint8)


def simulate_ldr_stages(hdr, ev: float, crf: Crf, noise: NoiseParams = NoiseParams(),
                        seed: int = 0) -> dict:
    """Run the virtual camera, exposing intermediates for invariant checks.

    Returns 'exposed' (pre-clip), 'clipped', 'encoded' float fields plus the
    quantized 'ldr'.
    """
    data = np.asarray(hdr.data, dtype=np.float64)
    exposed = data * (2.0**ev)
    if noise.sigma_read > 0:
        rng = np.random.Generator(np.random.Philox(key=seed))
        exposed = exposed + noise.sigma_read * rng.standard_normal(data.shape)
    clipped = np.clip(exposed, 0.0, 1.0)
    encoded = crf.apply(clipped)
    return {
        "exposed": exposed,
        "clipped": clipped,
        "encoded": encoded,
        "ldr": Ldr8Image(quantize8(encoded)),
    }


def simulate_ldr(hdr, ev: float, crf: Crf, noise: NoiseParams = NoiseParams(),
                 seed: int = 0) -> Ldr8Image:
    """Virtual camera: 2^ev scaling, Gaussian noise, clip, CRF, 8-bit quantization."""
    return simulate_ldr_stages(hdr, ev, crf, noise, seed)["ldr"]


# ---------------------------------------------------------------------------
# Dataset generation


@dataclass(frozen=True)
class SynthesisSettings:
    sat_frac: float = 0.05
    dark_frac: float = 0.10
    sigma_range: tuple = (0.0, 0.01)
    crf_family: str = "sigmoid"  # sigmoid | gamma | identity
    gamma_range: tuple = (0.35, 0.6)
    sigmoid_n_range: tuple = (0.7, 1.1)
    sigmoid_c_range: tuple = (0.4, 0.8)
    crop: int = 0  # 0 disables cropping
    crop_mode: str = "random"  # random | center
    ldr_format: str = "png"  # png | ppm | jpg (jpg needs a codec)
    hdr_format: str = "hdr"  # hdr | pfm
    jpeg_quality: int = 90


@dataclass(frozen=True)
class SynthesisRecord:
    """Everything needed to reproduce one LDR/HDR pair bit-exactly."""

    source: str
    index: int
    seed: int
    ev: float
    crf: dict
    noise_sigma: float
    crop: tuple | None
    ldr_file: str
    hdr_file: str

    def to_json_line(self) -> str:
        doc = {
            "source": self.source,
            "index": self.index,
            "seed": self.seed,
            "ev": self.ev,
            "crf": self.crf,
            "noise_sigma": self.noise_sigma,
            "crop": list(self.crop) if self.crop is not None else None,
            "ldr_file": self.ldr_file,
            "hdr_file": self.hdr_file,
        }
        return json.dumps(doc, sort_keys=True)


def derive_seed(master_seed: int, source_id: str, index: int) -> int:
    """Stable 63-bit per-pair seed; independent of iteration order and parallelism."""
    digest = hashlib.sha256(f"{master_seed}:{source_id}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def sample_crf(rng: np.random.Generator, settings: SynthesisSettings) -> Crf:
    if settings.crf_family == "identity":
        return Crf.identity()
    if settings.crf_family == "gamma":
        lo, hi = settings.gamma_range
        return Crf.power(rng.uniform(lo, hi))
    if settings.crf_family == "sigmoid":
        n = rng.uniform(*settings.sigmoid_n_range)
        c = rng.uniform(*settings.sigmoid_c_range)
        return Crf.sigmoid(n, c)
    raise DomainError(f"unknown crf_family {settings.crf_family!r}")


def _synthesize_pair(source: LinearImage, name: str, index: int, seed: int,
                     ev_range: ExposureRange, settings: SynthesisSettings,
                     out_dir: Path, codec=None) -> SynthesisRecord:
    rng = np.random.Generator(np.random.Philox(key=seed))
    # draw order is part of the reproducibility contract: ev, crf, sigma, crop
    ev = float(rng.uniform(ev_range.ev_min, ev_range.ev_max))
    crf = sample_crf(rng, settings)
    lo, hi = settings.sigma_range
    sigma = float(rng.uniform(lo, hi))
    crop = None
    data = source.data
    if settings.crop:
        c = settings.crop
        if source.height < c or source.width < c:
            raise RangeError(f"source {name} is smaller than the {c}px crop")
        if settings.crop_mode == "center":
            y0, x0 = (source.height - c) // 2, (source.width - c) // 2
        else:
            y0 = int(rng.integers(0, source.height - c + 1))
            x0 = int(rng.integers(0, source.width - c + 1))
        data = data[y0:y0 + c, x0:x0 + c]
        crop = (y0, x0, c, c)

    stem = f"{Path(name).stem}_{index:04d}"
    ldr_file = f"{stem}.{settings.ldr_format}"
    hdr_file = f"{stem}.{settings.hdr_format}"
    cropped = LinearImage(data)
    ldr = simulate_ldr(cropped, ev, crf, NoiseParams(sigma_read=sigma), seed=seed)
    write_ldr8(ldr, out_dir / ldr_file, codec=codec, quality=settings.jpeg_quality)
    # ground truth is exposure-aligned: LDR == quantize(crf(clip(gt)))
    gt = LinearImage(data.astype(np.float64) * (2.0**ev))
    if settings.hdr_format == "pfm":
        write_pfm(gt, out_dir / hdr_file)
    else:
        write_hdr(gt, out_dir / hdr_file)
    return SynthesisRecord(
        source=name, index=index, seed=seed, ev=ev, crf=crf.as_dict(),
        noise_sigma=sigma, crop=crop, ldr_file=ldr_file, hdr_file=hdr_file,
    )


def generate_dataset(hdr_dir, out_dir, count_per_image: int = 1,
                     settings: SynthesisSettings = SynthesisSettings(),
                     master_seed: int = 0, jobs: int = 1, codec=None) -> tuple:
    """Synthesize LDR/HDR pairs plus a JSONL manifest of SynthesisRecord rows.

    Unreadable or degenerate sources are recorded in the returned error list
    and generation continues. Output is byte-identical for any `jobs`.
    `codec` is only consulted for ldr_format 'jpg'.
    """
    hdr_dir = Path(hdr_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    errors = []
    tasks = []
    readers = {".hdr": read_hdr, ".pfm": read_pfm}
    for path in sorted(hdr_dir.iterdir()):
        reader = readers.get(path.suffix.lower())
        if reader is None:
            continue
        try:
            source = reader(path)
            ev_range = estimate_exposure_range(source, settings.sat_frac, settings.dark_frac)
        except ItmError as exc:
            errors.append(f"{path.name}: {exc}")
            continue
        for index in range(count_per_image):
            seed = derive_seed(master_seed, path.name, index)
            tasks.append((source, path.name, index, seed, ev_range))

    def run(task):
        source, name, index, seed, ev_range = task
        try:
            pair = _synthesize_pair(source, name, index, seed, ev_range,
                                    settings, out_dir, codec)
            return pair, None
        except ItmError as exc:
            return None, f"{name}[{index}]: {exc}"

    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    records = sorted((r for r, _ in results if r is not None),
                     key=lambda r: (r.source, r.index))
    errors.extend(sorted(e for _, e in results if e is not None))
    manifest = out_dir / "manifest.jsonl"
    with open(manifest, "w") as fh:
        for record in records:
            fh.write(record.to_json_line() + "\n")
    return records, errors
