"""Projection and rasterization of vessel curves into binary images.

Spheres of diameter equal to the local vessel thickness sit at every curve
sample; under orthographic projection along z each sphere becomes a disk of
the same diameter, so the image is the union of disks.  A pixel is foreground
iff its center lies inside at least one disk, giving a strictly binary image.

Image arrays are (height, width), indexed [row, col]; a disk (x, y, r) covers
pixel (col=i, row=j) iff (i - x)^2 + (j - y)^2 <= r^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .curve import CurvatureTorsionProcess, VesselCurve, integrate_frenet_serret, random_rotation, recenter_curve
from .errors import ValidationError
from .phantom import PhantomLabel, SimConfig, config_digest, draw_label, thickness_profile

__all__ = ["Angiogram", "project_orthographic", "rasterize_disks", "render"]


@dataclass
class Angiogram:
    """Binary vessel image plus the metadata needed to reproduce it."""

    pixels: np.ndarray
    width: int
    height: int
    label: PhantomLabel
    config_digest: str
    seed: int


def project_orthographic(curve: VesselCurve) -> np.ndarray:
    """Drop z and pair each sample with its disk radius.

    Returns an (n, 3) array with columns (x, y, radius), one disk per curve
    sample; radius is half the local thickness.
    """
    if curve.thickness is None:
        raise ValidationError("curve has no thickness values; cannot project")
    disks = np.empty((curve.n_samples, 3))
    disks[:, 0] = curve.positions[:, 0]
    disks[:, 1] = curve.positions[:, 1]
    disks[:, 2] = curve.thickness / 2.0
    return disks


@njit(cache=True)
def _fill_disks(grid, disks):  # pragma: no cover - jitted
    height, width = grid.shape
    for d in range(disks.shape[0]):
        x = disks[d, 0]
        y = disks[d, 1]
        r = disks[d, 2]
        if r <= 0.0:
            continue
        r2 = r * r
        j0 = int(math.ceil(y - r))
        j1 = int(math.floor(y + r))
        if j0 < 0:
            j0 = 0
        if j1 > height - 1:
            j1 = height - 1
        for j in range(j0, j1 + 1):
            dy = j - y
            rem = r2 - dy * dy
            if rem < 0.0:
                continue
            half = math.sqrt(rem)
            i0 = int(math.ceil(x - half))
            i1 = int(math.floor(x + half))
            if i0 < 0:
                i0 = 0
            if i1 > width - 1:
                i1 = width - 1
            for i in range(i0, i1 + 1):
                grid[j, i] = 255


def rasterize_disks(disks: np.ndarray, width: int, height: int) -> np.ndarray:
    """Union of disks as a uint8 image with values {0, 255}.

    Disks wholly outside the frame contribute nothing; an empty disk list
    gives an all-zero image.
    """
    if width <= 0 or height <= 0:
        raise ValidationError("width and height must be > 0")
    grid = np.zeros((height, width), dtype=np.uint8)
    disks = np.asarray(disks, dtype=float)
    if disks.size:
        if disks.ndim != 2 or disks.shape[1] != 3:
            raise ValidationError("disks must be an (n, 3) array of (x, y, radius)")
        _fill_disks(grid, np.ascontiguousarray(disks))
    return grid


def render(config: SimConfig, seed: int) -> Angiogram:
    """Generate one binary vessel image, deterministic in (config, seed).

    Pipeline: draw the label, integrate the centerline, translate its
    midpoint to the image-center pixel, rotate uniformly at random about that
    point, evaluate the thickness profile, project, and rasterize.  The
    anchored sample guarantees foreground at the image center.
    """
    rng = np.random.default_rng(int(seed))
    label = draw_label(config, rng, seed=int(seed))
    process = CurvatureTorsionProcess(
        kappa_range=config.kappa_range,
        tau_range=config.tau_range,
        segment_length=config.segment_length,
        rng=rng,
    )
    curve = integrate_frenet_serret(process, config.total_length, config.step)
    width, height = config.image_size
    target = np.array([width // 2, height // 2, 0.0])
    curve = recenter_curve(curve, config.total_length / 2.0, target)
    curve = random_rotation(curve, rng)
    anchor_s = float(curve.arc_lengths[curve.center_index])
    curve = curve.with_thickness(
        thickness_profile(label, config, curve.arc_lengths, anchor_s, rng)
    )
    grid = rasterize_disks(project_orthographic(curve), width, height)
    return Angiogram(
        pixels=grid,
        width=width,
        height=height,
        label=label,
        config_digest=config_digest(config),
        seed=int(seed),
    )
