"""Stochastic vessel angiogram simulation and image-set evaluation.

Generates binary vessel images from an explicit stochastic model (3D
centerline with curvature/torsion noise, optional center aneurysm, edge
noise) and evaluates any candidate image population against a reference via
center-thickness distributions (empirical KL / Jensen-Shannon divergence), a
Gaussian Frechet feature distance, and noise-floor calibration.
"""

from ._version import __version__
from .curve import (
    CurvatureTorsionProcess,
    FrenetState,
    VesselCurve,
    integrate_frenet_serret,
    random_rotation,
    recenter_curve,
    standard_frame,
)
from .dataset import (
    DatasetManifest,
    decode_image,
    derive_seed,
    encode_image,
    generate_batch,
    load_manifest,
)
from .errors import AngiosimError, BatchError, DecodeError, NumericalError, ValidationError
from .morphology import (
    BatchEstimateResult,
    ThicknessEstimate,
    ThicknessSamples,
    binarize,
    distance_transform,
    estimate_batch,
    estimate_center_thickness,
    write_thickness_csv,
)
from .phantom import (
    PhantomLabel,
    PRESET_NAMES,
    SimConfig,
    draw_label,
    load_config,
    perturbed,
    preset,
    save_config,
    thickness_profile,
)
from .raster import Angiogram, project_orthographic, rasterize_disks, render
from .stats import (
    BlockMeanFeatures,
    DivergenceReport,
    GaussianFeatureStats,
    HistogramSpec,
    NoiseFloor,
    ThicknessFeature,
    compare_image_sets,
    fit_gaussian_features,
    frechet_distance,
    histogram,
    js_divergence,
    kl_divergence,
    kl_divergence_knn,
    noise_floor,
    noise_floor_multi,
    thickness_samples_from_config,
)
