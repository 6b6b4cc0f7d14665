"""Vessel thickness recovery from binary images.

The task statistic is the thickness of the vessel at the image center,
measured as the diameter of the largest disk that fits inside the vessel
while covering the center pixel.  The disk need not be centered at the image
center; requiring only coverage makes the estimate robust to boundary noise.
Implementation: exact Euclidean distance transform, then a constrained
maximum over nearby foreground pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import BatchError, ValidationError

__all__ = [
    "binarize",
    "distance_transform",
    "estimate_center_thickness",
    "estimate_batch",
    "ThicknessEstimate",
    "ThicknessSamples",
    "FileEstimate",
    "BatchEstimateResult",
    "write_thickness_csv",
    "read_thickness_csv",
]

IMAGE_SUFFIXES = (".pgm", ".png")


def binarize(image: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Boolean mask: intensity / full-scale >= threshold.

    Full scale is the dtype maximum for integer images (255 for uint8) and
    1.0 for float images, so a mid-gray 100 on uint8 sits below a 0.5
    threshold while 200 sits above it.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError("threshold must lie in [0, 1]")
    arr = np.asarray(image)
    if arr.ndim != 2 or arr.size == 0:
        raise ValidationError("image must be a non-empty 2D array")
    if np.issubdtype(arr.dtype, np.integer):
        scale = float(np.iinfo(arr.dtype).max)
    else:
        scale = 1.0
    return arr.astype(float) / scale >= threshold


def distance_transform(mask: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from each foreground pixel to background.

    Background pixels map to 0.  A mask with no background at all is treated
    as if background sat just outside the frame, so the transform stays
    finite on pathological all-foreground inputs.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or mask.size == 0:
        raise ValidationError("mask must be a non-empty 2D array")
    if mask.all():
        h, w = mask.shape
        rows = np.minimum(np.arange(h) + 1, h - np.arange(h))[:, None]
        cols = np.minimum(np.arange(w) + 1, w - np.arange(w))[None, :]
        return np.minimum(rows, cols).astype(float) + np.zeros(mask.shape)
    return ndimage.distance_transform_edt(mask)


@dataclass(frozen=True)
class ThicknessEstimate:
    """Result of the inscribed-disk search.

    ``valid`` is False when no qualifying disk exists (then thickness is 0).
    ``center`` is the (x, y) pixel of the winning disk.
    """

    thickness: float
    valid: bool
    center: tuple[int, int]


def estimate_center_thickness(
    mask: np.ndarray, search_radius: float = 40.0
) -> ThicknessEstimate:
    """Diameter of the largest inscribed disk that covers the center pixel.

    Over foreground pixels p within ``search_radius`` of the image center c,
    maximize the distance-transform value D(p) subject to |p - c| <= D(p)
    (the disk inscribed at p reaches the center).  Thickness is twice the
    maximum; an empty candidate set yields an invalid estimate.
    """
    if not search_radius > 0:
        raise ValidationError("search_radius must be > 0")
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or mask.size == 0:
        raise ValidationError("mask must be a non-empty 2D array")
    h, w = mask.shape
    cx, cy = w // 2, h // 2
    dist = distance_transform(mask)
    xs = np.arange(w)[None, :] - cx
    ys = np.arange(h)[:, None] - cy
    d2_center = xs * xs + ys * ys
    # 1e-6 slack absorbs sqrt round-off: both distances square to integers,
    # so ties are exact in integer arithmetic but not always in floats.
    qualifies = mask & (d2_center <= search_radius**2) & (d2_center <= dist * dist + 1e-6)
    if not qualifies.any():
        return ThicknessEstimate(0.0, False, (cx, cy))
    scored = np.where(qualifies, dist, -1.0)
    j, i = np.unravel_index(int(np.argmax(scored)), scored.shape)
    return ThicknessEstimate(float(2.0 * dist[j, i]), True, (int(i), int(j)))


@dataclass(frozen=True)
class ThicknessSamples:
    """Per-image thickness estimates (pixels) with a provenance tag."""

    values: np.ndarray
    source_tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).ravel())
        if self.values.size and not np.all(self.values >= 0):
            raise ValidationError("thickness samples must be >= 0")

    @property
    def count(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class FileEstimate:
    filename: str
    thickness: float
    valid: bool


@dataclass
class BatchEstimateResult:
    """Estimates for a directory of images, in sorted filename order."""

    samples: ThicknessSamples
    records: list[FileEstimate]
    errors: list[tuple[str, str]] = field(default_factory=list)

    @property
    def invalid_count(self) -> int:
        return sum(1 for r in self.records if not r.valid)


def _image_files(directory: Path) -> list[Path]:
    return sorted(
        p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def _estimate_files(paths: list[str], threshold: float, search_radius: float):
    from .dataset import decode_image  # local import to keep modules acyclic

    out = []
    for path in map(Path, paths):
        try:
            grid = decode_image(path)
        except Exception as exc:
            out.append((path.name, None, False, str(exc)))
            continue
        est = estimate_center_thickness(binarize(grid, threshold), search_radius)
        out.append((path.name, est.thickness, est.valid, None))
    return out


def estimate_batch(
    directory, threshold: float = 0.5, search_radius: float = 40.0
) -> BatchEstimateResult:
    """Estimate center thickness for every image file in a directory.

    Considers ``*.pgm`` and ``*.png`` files in sorted order.  Unreadable
    files are recorded as errors and skipped; invalid estimates stay in the
    per-file records but are excluded from the sample set.  Work spreads over
    ANGIOSIM_THREADS workers; output order follows the file order regardless.
    """
    from .parallel import chunked, resolve_threads, run_chunks

    directory = Path(directory)
    if not directory.is_dir():
        raise BatchError(f"not a directory: {directory}")
    files = _image_files(directory)
    if not files:
        raise BatchError(f"no image files (*.pgm, *.png) in {directory}")
    threads = resolve_threads()
    chunks = chunked([str(p) for p in files], max(1, min(256, len(files) // threads + 1)))
    results = run_chunks(
        _estimate_files, [(chunk, threshold, search_radius) for chunk in chunks], threads
    )
    records: list[FileEstimate] = []
    errors: list[tuple[str, str]] = []
    values: list[float] = []
    for name, thickness, valid, error in (item for chunk in results for item in chunk):
        if error is not None:
            errors.append((name, error))
            continue
        records.append(FileEstimate(name, thickness, valid))
        if valid:
            values.append(thickness)
    if not records:
        raise BatchError(
            f"all {len(files)} image files in {directory} were unreadable; "
            f"first error: {errors[0][1]}"
        )
    return BatchEstimateResult(
        samples=ThicknessSamples(np.array(values), source_tag=str(directory)),
        records=records,
        errors=errors,
    )


def write_thickness_csv(result: BatchEstimateResult, path) -> None:
    """CSV with header ``filename,thickness_px,valid``, one row per image."""
    lines = ["filename,thickness_px,valid"]
    lines += [
        f"{r.filename},{r.thickness!r},{'true' if r.valid else 'false'}"
        for r in result.records
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_thickness_csv(path) -> list[FileEstimate]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln]
    if not lines or lines[0] != "filename,thickness_px,valid":
        raise ValidationError(f"{path}: missing thickness CSV header")
    records = []
    for ln in lines[1:]:
        name, thick, valid = ln.split(",")
        records.append(FileEstimate(name, float(thick), valid == "true"))
    return records
