"""maskprop: zero-shot video object segmentation by feature-affinity mask propagation.

A first-frame mask is carried through a video by matching each new
frame's feature grid against a memory bank of earlier frames and
blending the memory's labels through a top-k softmax readout. Includes
bit-exact tensor/mask file formats, correspondence diagnostics and
filters, benchmark-style metrics, and a deterministic batch CLI.
"""

__version__ = "0.1.0"

from .errors import (
    DimensionError,
    FormatError,
    MaskpropError,
    UndefinedCorrelationError,
    ValidationError,
)
from .fmap import FeatureMap, FeatureMeta, read_fmap, write_fmap
from .masks import LabelMask, harden, read_mask, read_msk1, read_png, resample_mask, write_msk1, write_png
from .manifest import DatasetManifest, FrameEntry, VideoManifest, feature_key, load_manifest, save_manifest
from .propagation import (
    AffinityConfig,
    AffinityMatrix,
    GridShape,
    MemoryBank,
    compute_affinity,
    propagate_mask,
    step,
)
from .correspondence import (
    DEFAULT_MAG_RADIUS,
    Category,
    CorrespondenceFilter,
    CorrespondenceSet,
    categorize,
    extract_correspondences,
    fg_bg_percentage,
    mag_filter,
    oracle_filter,
)
from .metrics import (
    EvalResult,
    ObjectScore,
    boundary_f,
    evaluate_video,
    jaccard,
    spearman_rho,
    summarize,
)
from .synthetic import CellSpec, SyntheticSpec, generate
from .harness import RunConfig, cmd_analyze_corrs, cmd_evaluate, cmd_propagate, cmd_sweep

__all__ = [
    "AffinityConfig",
    "AffinityMatrix",
    "Category",
    "CellSpec",
    "CorrespondenceFilter",
    "CorrespondenceSet",
    "DEFAULT_MAG_RADIUS",
    "DatasetManifest",
    "DimensionError",
    "EvalResult",
    "FeatureMap",
    "FeatureMeta",
    "FormatError",
    "FrameEntry",
    "GridShape",
    "LabelMask",
    "MaskpropError",
    "MemoryBank",
    "ObjectScore",
    "RunConfig",
    "SyntheticSpec",
    "UndefinedCorrelationError",
    "ValidationError",
    "VideoManifest",
    "boundary_f",
    "categorize",
    "cmd_analyze_corrs",
    "cmd_evaluate",
    "cmd_propagate",
    "cmd_sweep",
    "compute_affinity",
    "evaluate_video",
    "extract_correspondences",
    "feature_key",
    "fg_bg_percentage",
    "generate",
    "harden",
    "jaccard",
    "load_manifest",
    "mag_filter",
    "oracle_filter",
    "propagate_mask",
    "read_fmap",
    "read_mask",
    "read_msk1",
    "read_png",
    "resample_mask",
    "save_manifest",
    "spearman_rho",
    "step",
    "summarize",
    "write_fmap",
    "write_msk1",
    "write_png",
]
