"""Key = value configuration files with [section] headers.

Unknown sections or keys are hard errors so typos surface immediately.
Blank lines and full-line # comments are allowed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .camera import SynthesisSettings
from .color import DisplayMapping
from .errors import ConfigError
from .pu21 import PuEncoding

_SCHEMA = {
    "display": {"peak_luminance": float, "black_floor": float, "reference_white": float},
    "synth": {
        "sat_frac": float,
        "dark_frac": float,
        "sigma_lo": float,
        "sigma_hi": float,
        "crf_family": str,
        "gamma_lo": float,
        "gamma_hi": float,
        "sigmoid_n_lo": float,
        "sigmoid_n_hi": float,
        "sigmoid_c_lo": float,
        "sigmoid_c_hi": float,
        "crop": int,
        "crop_mode": str,
        "ldr_format": str,
        "hdr_format": str,
        "jpeg_quality": int,
    },
    "score": {"pu_coefficients": str},
    "seeds": {"master": int},
}


@dataclass
class Config:
    display: DisplayMapping = field(default_factory=DisplayMapping)
    synth: SynthesisSettings = field(default_factory=SynthesisSettings)
    pu_coefficients: str = ""
    master_seed: int = 0

    def encoding(self) -> PuEncoding:
        if self.pu_coefficients:
            return PuEncoding.from_json(self.pu_coefficients)
        return PuEncoding.default()


def parse_config_text(text: str) -> Config:
    values: dict = {section: {} for section in _SCHEMA}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        caster = _SCHEMA[section][key]
        try:
            values[section][key] = caster(value)
        except ValueError:
            raise ConfigError(
                f"line {lineno}: cannot parse {value!r} as {caster.__name__}"
            ) from None
    return _build(values)


def parse_config(path) -> Config:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)


def _build(values: dict) -> Config:
    disp = values["display"]
    synth = values["synth"]
    defaults_disp = DisplayMapping()
    defaults_synth = SynthesisSettings()
    display = DisplayMapping(
        peak_luminance=disp.get("peak_luminance", defaults_disp.peak_luminance),
        black_floor=disp.get("black_floor", defaults_disp.black_floor),
        reference_white=disp.get("reference_white", defaults_disp.reference_white),
    )
    settings = SynthesisSettings(
        sat_frac=synth.get("sat_frac", defaults_synth.sat_frac),
        dark_frac=synth.get("dark_frac", defaults_synth.dark_frac),
        sigma_range=(
            synth.get("sigma_lo", defaults_synth.sigma_range[0]),
            synth.get("sigma_hi", defaults_synth.sigma_range[1]),
        ),
        crf_family=synth.get("crf_family", defaults_synth.crf_family),
        gamma_range=(
            synth.get("gamma_lo", defaults_synth.gamma_range[0]),
            synth.get("gamma_hi", defaults_synth.gamma_range[1]),
        ),
        sigmoid_n_range=(
            synth.get("sigmoid_n_lo", defaults_synth.sigmoid_n_range[0]),
            synth.get("sigmoid_n_hi", defaults_synth.sigmoid_n_range[1]),
        ),
        sigmoid_c_range=(
            synth.get("sigmoid_c_lo", defaults_synth.sigmoid_c_range[0]),
            synth.get("sigmoid_c_hi", defaults_synth.sigmoid_c_range[1]),
        ),
        crop=synth.get("crop", defaults_synth.crop),
        crop_mode=synth.get("crop_mode", defaults_synth.crop_mode),
        ldr_format=synth.get("ldr_format", defaults_synth.ldr_format),
        hdr_format=synth.get("hdr_format", defaults_synth.hdr_format),
        jpeg_quality=synth.get("jpeg_quality", defaults_synth.jpeg_quality),
    )
    if settings.crop_mode not in ("random", "center"):
        raise ConfigError("crop_mode must be 'random' or 'center'")
    if settings.ldr_format not in ("png", "ppm", "jpg"):
        raise ConfigError("ldr_format must be 'png', 'ppm', or 'jpg'")
    if settings.hdr_format not in ("hdr", "pfm"):
        raise ConfigError("hdr_format must be 'hdr' or 'pfm'")
    if settings.crf_family not in ("sigmoid", "gamma", "identity"):
        raise ConfigError("crf_family must be 'sigmoid', 'gamma', or 'identity'")
    return Config(
        display=display,
        synth=settings,
        pu_coefficients=values["score"].get("pu_coefficients", ""),
        master_seed=values["seeds"].get("master", 0),
    )
