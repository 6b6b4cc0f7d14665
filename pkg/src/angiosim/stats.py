"""Population-level comparison of thickness samples and image features.

Two sample sets are compared on a shared histogram: empirical KL divergence
and empirical Jensen-Shannon divergence over smoothed bin probabilities.  A
Gaussian Frechet distance over a pluggable per-image feature extractor gives
a generic whole-image metric with the same mathematical structure as
feature-space Frechet scores.  Comparing two independent sets drawn from the
*same* model calibrates the noise floor of each estimator; a candidate model
is distinguishable only where its divergence clears that floor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .dataset import decode_image, derive_seed
from .errors import NumericalError, ValidationError
from .morphology import (
    ThicknessSamples,
    binarize,
    estimate_center_thickness,
)
from .parallel import chunked, resolve_threads, run_chunks
from .phantom import SimConfig
from .raster import render

__all__ = [
    "HistogramSpec",
    "histogram",
    "kl_divergence",
    "js_divergence",
    "kl_divergence_knn",
    "GaussianFeatureStats",
    "BlockMeanFeatures",
    "ThicknessFeature",
    "fit_gaussian_features",
    "frechet_distance",
    "NoiseFloor",
    "noise_floor",
    "noise_floor_multi",
    "thickness_samples_from_config",
    "DivergenceReport",
    "NoiseFloorSummary",
    "compare_image_sets",
    "write_report_json",
    "read_report_json",
    "report_csv_row",
    "REPORT_CSV_HEADER",
    "THICKNESS_METRICS",
    "KNOWN_METRICS",
]

THICKNESS_METRICS = ("kl", "js")
KNOWN_METRICS = ("kl", "js", "frechet")


@dataclass(frozen=True)
class HistogramSpec:
    """Shared binning for the divergence estimators.

    Values land in ``(hi - lo) / bin_width`` equal bins on [lo, hi); values
    outside are clamped into the end bins.  ``smoothing_epsilon`` is a
    pseudo-count added to every bin before normalization, which keeps
    log-ratios finite on bins one population misses.
    """

    lo: float = 0.0
    hi: float = 64.0
    bin_width: float = 0.5
    smoothing_epsilon: float = 0.5

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValidationError("need hi > lo")
        if not self.bin_width > 0:
            raise ValidationError("bin_width must be > 0")
        if not self.smoothing_epsilon > 0:
            raise ValidationError("smoothing_epsilon must be > 0")
        n = (self.hi - self.lo) / self.bin_width
        if abs(n - round(n)) > 1e-9:
            raise ValidationError("(hi - lo) / bin_width must be an integer")

    @property
    def n_bins(self) -> int:
        return int(round((self.hi - self.lo) / self.bin_width))


def _as_values(samples) -> np.ndarray:
    values = samples.values if isinstance(samples, ThicknessSamples) else np.asarray(samples)
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValidationError("sample set is empty")
    return values


def histogram(samples, spec: HistogramSpec = HistogramSpec()) -> np.ndarray:
    """Smoothed bin probabilities, normalized to sum 1."""
    values = _as_values(samples)
    idx = np.floor((values - spec.lo) / spec.bin_width).astype(np.int64)
    np.clip(idx, 0, spec.n_bins - 1, out=idx)
    counts = np.bincount(idx, minlength=spec.n_bins).astype(float)
    probs = counts + spec.smoothing_epsilon
    return probs / probs.sum()


def kl_divergence(ref, cand, spec: HistogramSpec = HistogramSpec()) -> float:
    """Empirical KL divergence D(ref || cand) in nats on shared bins."""
    p = histogram(ref, spec)
    q = histogram(cand, spec)
    value = float(np.sum(p * np.log(p / q)))
    return max(value, 0.0)


def js_divergence(ref, cand, spec: HistogramSpec = HistogramSpec()) -> float:
    """Empirical Jensen-Shannon divergence in nats; symmetric, <= ln 2."""
    p = histogram(ref, spec)
    q = histogram(cand, spec)
    m = 0.5 * (p + q)
    value = 0.5 * float(np.sum(p * np.log(p / m))) + 0.5 * float(np.sum(q * np.log(q / m)))
    return max(value, 0.0)


def kl_divergence_knn(ref, cand, k: int = 1) -> float:
    """Alternate k-nearest-neighbor KL estimator for 1-D samples.

    Unlike the histogram estimator this needs no binning, but it can return
    small negative values and requires strictly continuous data: duplicate
    values produce zero neighbor distances.
    """
    x = np.sort(_as_values(ref))
    y = np.sort(_as_values(cand))
    if k < 1:
        raise ValidationError("k must be >= 1")
    n, m = x.size, y.size
    if n <= k or m < k:
        raise ValidationError(f"need more than k={k} samples in each set")

    def kth_nn(points: np.ndarray, queries: np.ndarray, kk: int, skip_self: bool) -> np.ndarray:
        d = np.abs(queries[:, None] - points[None, :])
        d.sort(axis=1)
        return d[:, kk] if skip_self else d[:, kk - 1]

    rho = kth_nn(x, x, k, skip_self=True)
    nu = kth_nn(y, x, k, skip_self=False)
    if np.any(rho == 0) or np.any(nu == 0):
        raise NumericalError(
            "zero nearest-neighbor distance (duplicate values); "
            "use the histogram estimator for discrete data"
        )
    return float(np.mean(np.log(nu / rho)) + math.log(m / (n - 1)))


@dataclass(frozen=True)
class GaussianFeatureStats:
    """Sample mean and covariance of per-image feature vectors."""

    mean: np.ndarray
    covariance: np.ndarray
    n: int
    feature_name: str = ""

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValidationError("covariance must be d x d for a d-vector mean")
        if np.max(np.abs(cov - cov.T)) > 1e-10:
            raise ValidationError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", 0.5 * (cov + cov.T))

    @property
    def dim(self) -> int:
        return int(self.mean.size)


class BlockMeanFeatures:
    """Block-mean pooled pixels scaled to [0, 1]; block must divide each side."""

    def __init__(self, block: int = 32):
        if block < 1:
            raise ValidationError("block must be >= 1")
        self.block = int(block)
        self.name = f"downsampled_pixels({self.block})"

    def __call__(self, grid: np.ndarray) -> np.ndarray:
        h, w = grid.shape
        b = self.block
        if h % b or w % b:
            raise ValidationError(f"block {b} must divide image sides {w}x{h}")
        pooled = grid.astype(float).reshape(h // b, b, w // b, b).mean(axis=(1, 3))
        return (pooled / 255.0).ravel()


class ThicknessFeature:
    """One-dimensional feature: the estimated center thickness."""

    def __init__(self, threshold: float = 0.5, search_radius: float = 40.0):
        self.threshold = threshold
        self.search_radius = search_radius
        self.name = "thickness_scalar"

    def __call__(self, grid: np.ndarray) -> np.ndarray | None:
        est = estimate_center_thickness(binarize(grid, self.threshold), self.search_radius)
        return np.array([est.thickness]) if est.valid else None


def _iter_grids(images) -> Iterable[np.ndarray]:
    if isinstance(images, (str, Path)):
        directory = Path(images)
        files = sorted(
            p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in (".pgm", ".png")
        )
        return (decode_image(p) for p in files)
    return iter(images)


def fit_gaussian_features(images, extractor: Callable) -> GaussianFeatureStats:
    """Fit (mean, covariance) of per-image features.

    ``images`` is a directory path or an iterable of uint8 grids.  Extractors
    may return None to skip an image (e.g. no valid thickness); at least two
    feature vectors are required for the unbiased covariance.
    """
    rows = [vec for vec in (extractor(g) for g in _iter_grids(images)) if vec is not None]
    if len(rows) < 2:
        raise ValidationError(f"need at least 2 feature vectors, got {len(rows)}")
    x = np.asarray(rows, dtype=float)
    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    return GaussianFeatureStats(
        mean=mean, covariance=cov, n=x.shape[0], feature_name=getattr(extractor, "name", "")
    )


def _psd_eigh(matrix: np.ndarray, label: str):
    try:
        eigvals, eigvecs = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"matrix square root failed for {label}: {exc}") from exc
    floor = -1e-8 * max(1.0, float(np.max(np.abs(eigvals))))
    if np.min(eigvals) < floor:
        raise ValidationError(
            f"{label} is not positive semidefinite (min eigenvalue {np.min(eigvals):.3e})"
        )
    return eigvals, eigvecs


def _psd_sqrt(matrix: np.ndarray, label: str) -> np.ndarray:
    eigvals, eigvecs = _psd_eigh(matrix, label)
    return (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T


def frechet_distance(a: GaussianFeatureStats, b: GaussianFeatureStats) -> float:
    """Squared Frechet distance between two Gaussians.

    ||mu_a - mu_b||^2 + Tr(Sigma_a + Sigma_b - 2 (Sigma_a Sigma_b)^(1/2)),
    with the cross term computed through the symmetrized product
    sqrt(Sigma_a) Sigma_b sqrt(Sigma_a) and eigenvalue clamping.
    """
    if a.dim != b.dim:
        raise ValidationError(f"feature dimensions differ: {a.dim} vs {b.dim}")
    mean_term = float(np.sum((a.mean - b.mean) ** 2))
    _psd_eigh(b.covariance, "covariance B")
    sqrt_a = _psd_sqrt(a.covariance, "covariance A")
    cross = sqrt_a @ b.covariance @ sqrt_a
    cross = 0.5 * (cross + cross.T)
    try:
        eigvals = np.linalg.eigvalsh(cross)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"matrix square root failed for the cross term: {exc}") from exc
    trace_sqrt = float(np.sum(np.sqrt(np.clip(eigvals, 0.0, None))))
    value = mean_term + float(np.trace(a.covariance) + np.trace(b.covariance)) - 2.0 * trace_sqrt
    if value < -1e-6:
        raise NumericalError(
            f"Frechet distance evaluated to {value:.3e} < -1e-6; "
            "covariances are likely inconsistent"
        )
    return max(value, 0.0)


def _set_statistics(config: SimConfig, n: int, set_seed: int, want_features: bool, block: int):
    """Render one n-image set in memory; thickness samples plus optional features."""
    extractor = BlockMeanFeatures(block) if want_features else None
    values = []
    features = []
    for i in range(n):
        image = render(config, derive_seed(set_seed, i))
        est = estimate_center_thickness(
            binarize(image.pixels, config.threshold), search_radius=40.0
        )
        if est.valid:
            values.append(est.thickness)
        if extractor is not None:
            features.append(extractor(image.pixels))
    return np.array(values), (np.asarray(features) if want_features else None)


def thickness_samples_from_config(
    config: SimConfig, n: int, master_seed: int, source_tag: str = ""
) -> ThicknessSamples:
    """Render n images in memory and collect their thickness estimates."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    threads = resolve_threads()
    chunks = chunked(range(n), max(1, min(256, n // max(threads, 1) + 1)))
    results = run_chunks(
        _thickness_chunk, [(config, master_seed, chunk) for chunk in chunks], threads
    )
    values = np.concatenate([r for r in results]) if results else np.array([])
    return ThicknessSamples(values, source_tag=source_tag)


def _thickness_chunk(config: SimConfig, master_seed: int, indices) -> np.ndarray:
    values = []
    for i in indices:
        image = render(config, derive_seed(master_seed, i))
        est = estimate_center_thickness(
            binarize(image.pixels, config.threshold), search_radius=40.0
        )
        if est.valid:
            values.append(est.thickness)
    return np.array(values)


@dataclass(frozen=True)
class NoiseFloor:
    """Replicate mean/std of a divergence between IID same-model sets."""

    metric: str
    mean: float
    std: float
    values: tuple[float, ...]
    n: int
    replicates: int


def noise_floor_multi(
    config: SimConfig,
    n: int,
    replicates: int,
    metrics: Sequence[str],
    master_seed: int,
    spec: HistogramSpec = HistogramSpec(),
    feature_block: int = 32,
) -> dict[str, NoiseFloor]:
    """Noise floors for several metrics from one shared generation pass.

    Each replicate renders two independent n-image sets from ``config`` on
    disjoint seed streams and runs the full estimate-then-compare pipeline.
    All requested metrics are evaluated on the same two sets, exactly as a
    single-metric run would see them.
    """
    if n < 100:
        raise ValidationError("noise floor requires n >= 100")
    if replicates < 1:
        raise ValidationError("replicates must be >= 1")
    metrics = tuple(metrics)
    unknown = set(metrics) - set(KNOWN_METRICS)
    if unknown:
        raise ValidationError(f"unknown metrics {sorted(unknown)}; expected {KNOWN_METRICS}")
    want_features = "frechet" in metrics
    per_metric: dict[str, list[float]] = {m: [] for m in metrics}
    threads = resolve_threads()
    sets = [
        (config, n, derive_seed(master_seed, rep, side), want_features, feature_block)
        for rep in range(replicates)
        for side in (0, 1)
    ]
    results = run_chunks(_set_statistics, sets, threads)
    for rep in range(replicates):
        (values_a, feats_a), (values_b, feats_b) = results[2 * rep], results[2 * rep + 1]
        for metric in metrics:
            if metric == "kl":
                per_metric[metric].append(kl_divergence(values_a, values_b, spec))
            elif metric == "js":
                per_metric[metric].append(js_divergence(values_a, values_b, spec))
            else:
                stats_a = _gaussian_from_rows(feats_a, feature_block)
                stats_b = _gaussian_from_rows(feats_b, feature_block)
                per_metric[metric].append(frechet_distance(stats_a, stats_b))
    floors = {}
    for metric, vals in per_metric.items():
        arr = np.asarray(vals)
        floors[metric] = NoiseFloor(
            metric=metric,
            mean=float(arr.mean()),
            std=float(arr.std(ddof=1)) if replicates > 1 else 0.0,
            values=tuple(float(v) for v in arr),
            n=n,
            replicates=replicates,
        )
    return floors


def _gaussian_from_rows(rows: np.ndarray, block: int) -> GaussianFeatureStats:
    return GaussianFeatureStats(
        mean=rows.mean(axis=0),
        covariance=np.atleast_2d(np.cov(rows, rowvar=False, ddof=1)),
        n=rows.shape[0],
        feature_name=f"downsampled_pixels({block})",
    )


def noise_floor(
    config: SimConfig,
    n: int,
    replicates: int,
    metric: str,
    master_seed: int,
    spec: HistogramSpec = HistogramSpec(),
) -> NoiseFloor:
    """Single-metric noise floor; see ``noise_floor_multi``."""
    return noise_floor_multi(config, n, replicates, (metric,), master_seed, spec)[metric]


@dataclass(frozen=True)
class NoiseFloorSummary:
    metric: str
    mean: float
    std: float
    n: int
    replicates: int


@dataclass
class DivergenceReport:
    """Metric values for one reference-vs-candidate comparison."""

    n_ref: int
    n_cand: int
    histogram_spec: HistogramSpec
    run_label: str = ""
    kl_nats: float | None = None
    js_nats: float | None = None
    frechet_sq: float | None = None
    noise_floor: NoiseFloorSummary | None = None
    above_floor_3sigma: bool | None = None
    estimator_name: str = "histogram"


def compare_image_sets(
    ref_dir,
    cand_dir,
    metrics: Sequence[str] = ("kl", "js"),
    spec: HistogramSpec = HistogramSpec(),
    threshold: float = 0.5,
    search_radius: float = 40.0,
    feature_block: int = 32,
    run_label: str = "",
    floor: NoiseFloorSummary | None = None,
) -> DivergenceReport:
    """Full evaluation pipeline over two image directories."""
    from .morphology import estimate_batch

    metrics = tuple(metrics)
    unknown = set(metrics) - set(KNOWN_METRICS)
    if unknown:
        raise ValidationError(f"unknown metrics {sorted(unknown)}; expected {KNOWN_METRICS}")
    report = DivergenceReport(
        n_ref=0, n_cand=0, histogram_spec=spec, run_label=run_label, noise_floor=floor
    )
    if any(m in THICKNESS_METRICS for m in metrics):
        ref = estimate_batch(ref_dir, threshold, search_radius).samples
        cand = estimate_batch(cand_dir, threshold, search_radius).samples
        report.n_ref, report.n_cand = ref.count, cand.count
        if "kl" in metrics:
            report.kl_nats = kl_divergence(ref, cand, spec)
        if "js" in metrics:
            report.js_nats = js_divergence(ref, cand, spec)
    if "frechet" in metrics:
        extractor = BlockMeanFeatures(feature_block)
        stats_ref = fit_gaussian_features(ref_dir, extractor)
        stats_cand = fit_gaussian_features(cand_dir, extractor)
        report.frechet_sq = frechet_distance(stats_ref, stats_cand)
        report.n_ref = report.n_ref or stats_ref.n
        report.n_cand = report.n_cand or stats_cand.n
    if floor is not None:
        metric_value = {"kl": report.kl_nats, "js": report.js_nats, "frechet": report.frechet_sq}[
            floor.metric
        ]
        if metric_value is not None:
            report.above_floor_3sigma = bool(metric_value > floor.mean + 3.0 * floor.std)
    return report


def _report_dict(report: DivergenceReport) -> dict:
    doc: dict = {"run_label": report.run_label}
    if report.kl_nats is not None:
        doc["kl_nats"] = report.kl_nats
    if report.js_nats is not None:
        doc["js_nats"] = report.js_nats
    if report.frechet_sq is not None:
        doc["frechet_sq"] = report.frechet_sq
    doc["n_ref"] = report.n_ref
    doc["n_cand"] = report.n_cand
    doc["histogram"] = {
        "lo": report.histogram_spec.lo,
        "hi": report.histogram_spec.hi,
        "bin_width": report.histogram_spec.bin_width,
        "epsilon": report.histogram_spec.smoothing_epsilon,
    }
    if report.noise_floor is not None:
        doc["noise_floor"] = {
            "metric": report.noise_floor.metric,
            "mean": report.noise_floor.mean,
            "std": report.noise_floor.std,
            "n": report.noise_floor.n,
            "replicates": report.noise_floor.replicates,
        }
    if report.above_floor_3sigma is not None:
        doc["above_floor_3sigma"] = report.above_floor_3sigma
    doc["estimator_name"] = report.estimator_name
    return doc


def write_report_json(report: DivergenceReport, path) -> None:
    Path(path).write_text(
        json.dumps(_report_dict(report), indent=2) + "\n", encoding="utf-8", newline="\n"
    )


def read_report_json(path) -> DivergenceReport:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        hist = doc["histogram"]
        spec = HistogramSpec(
            lo=hist["lo"],
            hi=hist["hi"],
            bin_width=hist["bin_width"],
            smoothing_epsilon=hist["epsilon"],
        )
        floor = None
        if "noise_floor" in doc:
            nf = doc["noise_floor"]
            floor = NoiseFloorSummary(
                metric=nf["metric"],
                mean=nf["mean"],
                std=nf["std"],
                n=nf["n"],
                replicates=nf["replicates"],
            )
        return DivergenceReport(
            n_ref=doc["n_ref"],
            n_cand=doc["n_cand"],
            histogram_spec=spec,
            run_label=doc.get("run_label", ""),
            kl_nats=doc.get("kl_nats"),
            js_nats=doc.get("js_nats"),
            frechet_sq=doc.get("frechet_sq"),
            noise_floor=floor,
            above_floor_3sigma=doc.get("above_floor_3sigma"),
            estimator_name=doc.get("estimator_name", "histogram"),
        )
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: malformed divergence report: {exc}") from exc


REPORT_CSV_HEADER = "run_label,n_ref,n_cand,kl_nats,js_nats,frechet_sq,floor_mean,floor_std"


def report_csv_row(report: DivergenceReport) -> str:
    def cell(value) -> str:
        return "" if value is None else repr(value)

    floor_mean = report.noise_floor.mean if report.noise_floor else None
    floor_std = report.noise_floor.std if report.noise_floor else None
    return ",".join(
        [
            report.run_label,
            str(report.n_ref),
            str(report.n_cand),
            cell(report.kl_nats),
            cell(report.js_nats),
            cell(report.frechet_sq),
            cell(floor_mean),
            cell(floor_std),
        ]
    )
