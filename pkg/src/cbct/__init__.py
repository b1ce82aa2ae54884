"""Cone-beam CT reconstruction toolkit.

Analytic (FDK) and variational (KL-TV) reconstruction for circular
cone-beam geometries, plus phantom simulation, quality metrics, and a
binary volume format.  See the README for the command-line interface.
"""

from .geometry import (
    ArcKind,
    ConeBeamGeometry,
    VoxelGrid,
    make_circular_geometry,
)
from .projector import (
    Domain,
    ProjectionSet,
    Volume,
    back_project,
    forward_project,
    operator_row_col_sums,
    subsample_views,
)
from .fdk import (
    FdkOptions,
    FilterKind,
    ShortScanMode,
    cosine_weight,
    fdk_reconstruct,
    parker_weights,
    ramp_filter,
)
from .kltv import (
    KltvParams,
    compute_preconditioners,
    divergence_op,
    gradient_op,
    kl_objective,
    kltv_reconstruct,
    prox_kl_dual,
    prox_tv_dual,
)
from .phantom import (
    Ellipsoid,
    PhantomSpec,
    counts_to_line_integrals,
    dental_phantom,
    make_dataset,
    rasterize,
    simulate_counts,
)
from .metrics import MetricsReport, evaluate, nrmse, psnr, ssim
from .volio import (
    CorruptHeaderError,
    LengthMismatchError,
    NormalizationRecord,
    UnsupportedDtypeError,
    VolioError,
    denormalize,
    normalize_global,
    read_projections,
    read_volume,
    write_projections,
    write_volume,
)

__version__ = "0.1.0"

__all__ = [
    "ArcKind", "ConeBeamGeometry", "VoxelGrid", "make_circular_geometry",
    "Domain", "ProjectionSet", "Volume", "back_project", "forward_project",
    "operator_row_col_sums", "subsample_views",
    "FdkOptions", "FilterKind", "ShortScanMode", "cosine_weight",
    "fdk_reconstruct", "parker_weights", "ramp_filter",
    "KltvParams", "compute_preconditioners", "divergence_op", "gradient_op",
    "kl_objective", "kltv_reconstruct", "prox_kl_dual", "prox_tv_dual",
    "Ellipsoid", "PhantomSpec", "counts_to_line_integrals", "dental_phantom",
    "make_dataset", "rasterize", "simulate_counts",
    "MetricsReport", "evaluate", "nrmse", "psnr", "ssim",
    "CorruptHeaderError", "LengthMismatchError", "NormalizationRecord",
    "UnsupportedDtypeError", "VolioError", "denormalize", "normalize_global",
    "read_projections", "read_volume", "write_projections", "write_volume",
    "__version__",
]
