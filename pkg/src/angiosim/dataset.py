"""Batch image generation, deterministic seeding, and on-disk formats.

Canonical image format is binary PGM (P5, maxval 255): byte-exact round
trips with no compression ambiguity.  8-bit grayscale PNG is accepted on
decode so externally produced candidate sets plug in.  A generated dataset
directory contains ``img_000000.pgm`` ... plus ``manifest.jsonl`` (one JSON
header line, then one JSON entry per image) and ``config.txt`` (the
key-value model configuration).
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._version import __version__ as GENERATOR_VERSION
from .errors import BatchError, DecodeError, ValidationError
from .parallel import chunked, resolve_threads, run_chunks
from .phantom import SimConfig, config_digest, save_config
from .raster import render

__all__ = [
    "derive_seed",
    "encode_image",
    "decode_image",
    "pgm_bytes",
    "ManifestEntry",
    "DatasetManifest",
    "generate_batch",
    "load_manifest",
]


def derive_seed(master_seed: int, *indices: int) -> int:
    """Splittable 64-bit seed for a child stream of (master_seed, indices)."""
    seq = np.random.SeedSequence((int(master_seed),) + tuple(int(i) for i in indices))
    return int(seq.generate_state(1, np.uint64)[0])


def pgm_bytes(grid: np.ndarray) -> bytes:
    """Serialize a uint8 grid as binary PGM (P5, maxval 255)."""
    arr = np.asarray(grid)
    if arr.ndim != 2 or arr.size == 0:
        raise ValidationError("image grid must be a non-empty 2D array")
    if arr.dtype != np.uint8:
        raise ValidationError(f"image grid must be uint8, got {arr.dtype}")
    h, w = arr.shape
    return b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes()


def encode_image(grid: np.ndarray, path) -> None:
    Path(path).write_bytes(pgm_bytes(grid))


def _decode_pgm(data: bytes, path) -> np.ndarray:
    pos = 2  # past magic
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            name = ("width", "height", "maxval")[len(fields)]
            raise DecodeError(f"{path}: truncated PGM header while reading {name}")
        fields.append(data[start:pos])
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise DecodeError(f"{path}: non-numeric PGM header fields {fields}")
    if width <= 0 or height <= 0:
        raise DecodeError(f"{path}: bad PGM width/height {width}x{height}")
    if maxval != 255:
        raise DecodeError(f"{path}: unsupported PGM maxval {maxval}; only 255 (8-bit) is accepted")
    pos += 1  # single whitespace byte after maxval
    pixels = data[pos : pos + width * height]
    if len(pixels) < width * height:
        raise DecodeError(
            f"{path}: truncated pixel data ({len(pixels)} bytes, expected {width * height})"
        )
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width).copy()


def decode_image(path) -> np.ndarray:
    """Read a PGM (P5) or 8-bit grayscale PNG as a uint8 (height, width) grid."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"P5":
        return _decode_pgm(data, path)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        from PIL import Image

        try:
            with Image.open(io.BytesIO(data)) as img:
                return np.asarray(img.convert("L"), dtype=np.uint8)
        except Exception as exc:
            raise DecodeError(f"{path}: PNG decode failed: {exc}") from exc
    raise DecodeError(f"{path}: unrecognized magic {data[:2]!r}; expected PGM (P5) or PNG")


@dataclass(frozen=True)
class ManifestEntry:
    filename: str
    seed: int
    has_aneurysm: bool
    thickness: float


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    config_digest: str
    generator_version: str
    master_seed: int

    @property
    def count(self) -> int:
        return len(self.entries)

    @property
    def aneurysm_fraction(self) -> float:
        if not self.entries:
            return 0.0
        return sum(e.has_aneurysm for e in self.entries) / len(self.entries)


def _render_chunk(config: SimConfig, master_seed: int, indices, out_dir: str):
    out = Path(out_dir)
    entries = []
    for i in indices:
        seed = derive_seed(master_seed, i)
        image = render(config, seed)
        name = f"img_{i:06d}.pgm"
        encode_image(image.pixels, out / name)
        entries.append((name, seed, image.label.has_aneurysm, image.label.thickness))
    return entries


def generate_batch(config: SimConfig, count: int, master_seed: int, out_dir) -> DatasetManifest:
    """Render ``count`` images into ``out_dir`` with per-image derived seeds.

    Re-running with identical arguments reproduces byte-identical files.  The
    config copy is written first so directory problems surface before any
    rendering; if any image fails mid-batch the manifest is not written.
    """
    if count < 1:
        raise ValidationError("count must be >= 1")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        save_config(config, out / "config.txt")
    except OSError as exc:
        raise BatchError(f"output directory {out} is not writable: {exc}") from exc
    threads = resolve_threads()
    chunks = chunked(range(count), max(1, min(64, count // max(threads, 1) + 1)))
    try:
        results = run_chunks(
            _render_chunk, [(config, master_seed, chunk, str(out)) for chunk in chunks], threads
        )
    except Exception as exc:
        raise BatchError(f"generation failed; manifest not written: {exc}") from exc
    entries = [ManifestEntry(*item) for chunk_result in results for item in chunk_result]
    manifest = DatasetManifest(
        entries=entries,
        config_digest=config_digest(config),
        generator_version=GENERATOR_VERSION,
        master_seed=int(master_seed),
    )
    _write_manifest(manifest, out / "manifest.jsonl")
    return manifest


def _write_manifest(manifest: DatasetManifest, path: Path) -> None:
    lines = [
        json.dumps(
            {
                "config_digest": manifest.config_digest,
                "generator_version": manifest.generator_version,
                "master_seed": manifest.master_seed,
                "count": manifest.count,
            },
            separators=(",", ":"),
        )
    ]
    for e in manifest.entries:
        lines.append(
            json.dumps(
                {
                    "filename": e.filename,
                    "seed": e.seed,
                    "has_aneurysm": e.has_aneurysm,
                    "thickness": e.thickness,
                },
                separators=(",", ":"),
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    lines = [ln for ln in path.read_text(encoding="utf-8").split("\n") if ln]
    if not lines:
        raise ValidationError(f"{path}: empty manifest")
    header = json.loads(lines[0])
    entries = [
        ManifestEntry(
            filename=obj["filename"],
            seed=obj["seed"],
            has_aneurysm=obj["has_aneurysm"],
            thickness=obj["thickness"],
        )
        for obj in map(json.loads, lines[1:])
    ]
    return DatasetManifest(
        entries=entries,
        config_digest=header["config_digest"],
        generator_version=header["generator_version"],
        master_seed=header["master_seed"],
    )
