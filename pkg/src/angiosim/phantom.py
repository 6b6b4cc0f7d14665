"""Canonical vessel image model: configuration, labels, thickness profiles.

A rendered image shows a single vessel of nominal thickness 20 px.  With a
configured prevalence the vessel carries an aneurysm: a localized thickening
anchored to the image center whose peak value is drawn from a normal
distribution and tapers back to the nominal thickness along arc length.
Independent Gaussian "edge noise" roughens the thickness profile sample by
sample.  Over many images the center thickness is bimodal, with one mode at
the nominal thickness and one at the aneurysm mean.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalError, ValidationError

__all__ = [
    "SimConfig",
    "PhantomLabel",
    "PRESET_NAMES",
    "preset",
    "perturbed",
    "draw_label",
    "thickness_profile",
    "config_to_text",
    "config_from_text",
    "save_config",
    "load_config",
    "config_digest",
]


@dataclass(frozen=True)
class SimConfig:
    """All parameters of the stochastic vessel image model.

    ``image_size`` is (width, height).  Curve parameters feed the centerline
    integrator; ``threshold`` is the default binarization level used when the
    model's own images are re-analyzed.
    """

    t0: float
    nominal_thickness: float = 20.0
    sigma_an: float = 1.0
    taper_width: float = 15.0
    edge_noise_sigma: float = 0.25
    thickness_floor: float = 2.0
    aneurysm_prevalence: float = 0.5
    image_size: tuple[int, int] = (256, 256)
    kappa_range: tuple[float, float] = (0.0, 0.002)
    tau_range: tuple[float, float] = (-0.002, 0.002)
    segment_length: float = 20.0
    total_length: float = 600.0
    step: float = 1.0
    threshold: float = 0.5

    def __post_init__(self):
        if not self.nominal_thickness > 0:
            raise ValidationError("nominal_thickness must be > 0")
        if not self.t0 > self.nominal_thickness:
            raise ValidationError(
                f"t0 ({self.t0}) must exceed nominal_thickness ({self.nominal_thickness})"
            )
        if self.sigma_an < 0:
            raise ValidationError("sigma_an must be >= 0")
        if not self.taper_width > 0:
            raise ValidationError("taper_width must be > 0")
        if self.edge_noise_sigma < 0:
            raise ValidationError("edge_noise_sigma must be >= 0")
        if not self.thickness_floor > 0:
            raise ValidationError("thickness_floor must be > 0")
        if not 0.0 <= self.aneurysm_prevalence <= 1.0:
            raise ValidationError("aneurysm_prevalence must lie in [0, 1]")
        w, h = self.image_size
        if w < 64 or h < 64:
            raise ValidationError("image_size components must be >= 64")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValidationError("threshold must lie in [0, 1]")
        if not self.step > 0 or not self.total_length >= 2 * self.step:
            raise ValidationError("need step > 0 and total_length >= 2 * step")


PRESET_NAMES = ("sim23", "sim27", "sim33")

_PRESET_T0 = {"sim23": 23.0, "sim27": 27.0, "sim33": 33.0}


def preset(name: str) -> SimConfig:
    """One of the three built-in models; they differ only in aneurysm mean."""
    try:
        t0 = _PRESET_T0[name]
    except KeyError:
        raise ValidationError(
            f"unknown preset {name!r}; expected one of {', '.join(PRESET_NAMES)}"
        ) from None
    return SimConfig(t0=t0)


def perturbed(
    config: SimConfig,
    t0_shift: float = 0.0,
    prevalence_shift: float = 0.0,
    edge_noise_shift: float = 0.0,
) -> SimConfig:
    """Copy of ``config`` with shifted parameters.

    Stands in for an imperfect learned model when exercising the evaluation
    pipeline: the shifted model is compared against the original as if it
    were externally generated data.
    """
    return dataclasses.replace(
        config,
        t0=config.t0 + t0_shift,
        aneurysm_prevalence=config.aneurysm_prevalence + prevalence_shift,
        edge_noise_sigma=config.edge_noise_sigma + edge_noise_shift,
    )


@dataclass(frozen=True)
class PhantomLabel:
    """Per-image ground truth: aneurysm flag and the drawn peak thickness."""

    has_aneurysm: bool
    thickness: float
    seed: int = 0

    def __post_init__(self):
        if not self.thickness > 0:
            raise ValidationError("label thickness must be > 0")


def draw_label(config: SimConfig, rng: np.random.Generator, seed: int = 0) -> PhantomLabel:
    """Draw the aneurysm flag and peak thickness for one image.

    The aneurysm flag is Bernoulli(prevalence).  When set, the peak thickness
    is normal (t0, sigma_an) truncated below at the nominal thickness, so an
    "aneurysm" can never be thinner than the vessel itself.  Without an
    aneurysm the thickness equals the nominal value.
    """
    has_aneurysm = bool(rng.random() < config.aneurysm_prevalence)
    if not has_aneurysm:
        return PhantomLabel(False, float(config.nominal_thickness), seed)
    if config.sigma_an == 0.0:
        return PhantomLabel(True, float(config.t0), seed)
    for _ in range(10000):
        t = rng.normal(config.t0, config.sigma_an)
        if t >= config.nominal_thickness:
            return PhantomLabel(True, float(t), seed)
    raise NumericalError(
        "truncated aneurysm draw did not terminate; t0 is too far below nominal_thickness"
    )


def thickness_profile(
    label: PhantomLabel,
    config: SimConfig,
    arc_lengths: np.ndarray,
    anchor: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Thickness at each arc-length sample.

    The noiseless profile is a Gaussian bump on a constant base,

        base(s) = nominal + (t - nominal) * exp(-(s - anchor)^2 / (2 * taper_width^2)),

    which equals the drawn peak exactly at the anchor and returns to the
    nominal thickness away from it.  IID Gaussian edge noise is added per
    sample and the result is floored at ``thickness_floor``.
    """
    s = np.asarray(arc_lengths, dtype=float)
    if s.size == 0:
        raise ValidationError("arc_lengths must be non-empty")
    if s.size > 1 and not np.all(np.diff(s) > 0):
        raise ValidationError("arc_lengths must be strictly ascending")
    if not (s[0] - 1e-9 <= anchor <= s[-1] + 1e-9):
        raise ValidationError(f"anchor {anchor} outside sampled arc range")
    bump = (label.thickness - config.nominal_thickness) * np.exp(
        -((s - anchor) ** 2) / (2.0 * config.taper_width**2)
    )
    noise = rng.normal(0.0, config.edge_noise_sigma, size=s.size)
    return np.maximum(config.nominal_thickness + bump + noise, config.thickness_floor)


# Plain-text config files: one "key = value" per line, keys below, in order.
# Tuples are flattened into scalar keys so every value is a number.
_CONFIG_KEYS = (
    ("t0", float),
    ("nominal_thickness", float),
    ("sigma_an", float),
    ("taper_width", float),
    ("edge_noise_sigma", float),
    ("thickness_floor", float),
    ("aneurysm_prevalence", float),
    ("image_width", int),
    ("image_height", int),
    ("kappa_min", float),
    ("kappa_max", float),
    ("tau_min", float),
    ("tau_max", float),
    ("segment_length", float),
    ("total_length", float),
    ("step", float),
    ("threshold", float),
)


def _config_scalars(config: SimConfig) -> dict:
    return {
        "t0": config.t0,
        "nominal_thickness": config.nominal_thickness,
        "sigma_an": config.sigma_an,
        "taper_width": config.taper_width,
        "edge_noise_sigma": config.edge_noise_sigma,
        "thickness_floor": config.thickness_floor,
        "aneurysm_prevalence": config.aneurysm_prevalence,
        "image_width": config.image_size[0],
        "image_height": config.image_size[1],
        "kappa_min": config.kappa_range[0],
        "kappa_max": config.kappa_range[1],
        "tau_min": config.tau_range[0],
        "tau_max": config.tau_range[1],
        "segment_length": config.segment_length,
        "total_length": config.total_length,
        "step": config.step,
        "threshold": config.threshold,
    }


def config_to_text(config: SimConfig) -> str:
    scalars = _config_scalars(config)
    return "".join(f"{key} = {scalars[key]!r}\n" for key, _ in _CONFIG_KEYS)


def config_from_text(text: str) -> SimConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno} is not 'key = value': {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    parsed = {}
    for key, caster in _CONFIG_KEYS:
        if key not in values:
            raise ValidationError(f"config file is missing key {key!r}")
        try:
            parsed[key] = caster(float(values[key]) if caster is int else values[key])
        except ValueError:
            raise ValidationError(f"config key {key!r} has non-numeric value {values[key]!r}")
    unknown = set(values) - {key for key, _ in _CONFIG_KEYS}
    if unknown:
        raise ValidationError(f"config file has unknown keys: {sorted(unknown)}")
    return SimConfig(
        t0=parsed["t0"],
        nominal_thickness=parsed["nominal_thickness"],
        sigma_an=parsed["sigma_an"],
        taper_width=parsed["taper_width"],
        edge_noise_sigma=parsed["edge_noise_sigma"],
        thickness_floor=parsed["thickness_floor"],
        aneurysm_prevalence=parsed["aneurysm_prevalence"],
        image_size=(parsed["image_width"], parsed["image_height"]),
        kappa_range=(parsed["kappa_min"], parsed["kappa_max"]),
        tau_range=(parsed["tau_min"], parsed["tau_max"]),
        segment_length=parsed["segment_length"],
        total_length=parsed["total_length"],
        step=parsed["step"],
        threshold=parsed["threshold"],
    )


def save_config(config: SimConfig, path) -> None:
    Path(path).write_text(config_to_text(config), encoding="utf-8")


def load_config(path) -> SimConfig:
    return config_from_text(Path(path).read_text(encoding="utf-8"))


def config_digest(config: SimConfig) -> str:
    """Short content hash identifying a configuration."""
    return hashlib.sha256(config_to_text(config).encode("utf-8")).hexdigest()[:16]
