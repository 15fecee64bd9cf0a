"""Depth-aware underwater image augmentation.

A physically-grounded water model (exponential direct-signal decay plus
saturating veiling light) drives three capabilities: estimating per-image
water parameters from an image/depth pair, re-rendering an image as if the
scene sat nearer or farther from the camera, and batch-generating such
variants deterministically with a variance-gated offset policy.
"""

from .estimation import (AttenuationFit, BackscatterFit, DepthBinStats,
                         EstimationConfig, EstimationError, FitReport,
                         aggregate_params, bin_dark_pixels, estimate_params,
                         fit_attenuation, fit_backscatter, read_sidecar,
                         write_sidecar)
from .formation import (CLAMP_TO_UNIT, ClampPolicy, ERROR_ON_OVERFLOW,
                        FormationError, GamutError, NO_CLAMP, WaterParams,
                        backscatter, depth_jitter, forward_render,
                        intensity_profile, restore)
from .imageio import (DecodeError, DepthDecodeSpec, PNG16, TIFF_F32,
                      decode_depth, encode_depth, linear_to_srgb, load_image,
                      save_image, srgb_to_linear, write_profile_csv)
from .pipeline import (AugmentResult, AugmentRow, DatasetManifest, LOG_HEADER,
                       ManifestEntry, ManifestError, PrecomputeRecord,
                       PrecomputeResult, jitter_with_accounting, load_manifest,
                       load_stats, run_augment, run_precompute, write_stats)
from .policy import (ADAPTIVE, FIXED_RANGE, OffsetPolicy, QUANTILE_RULE,
                     SeedSpec, VarianceClass, VarianceStats, classify,
                     compute_threshold, compute_variance, offset_interval,
                     sample_offset)
from .synthetic import depth_field, generate_synthetic, radiance_pattern

__version__ = "0.1.0"

__all__ = [
    "ADAPTIVE", "AttenuationFit", "AugmentResult", "AugmentRow",
    "BackscatterFit", "CLAMP_TO_UNIT", "ClampPolicy", "DatasetManifest",
    "DecodeError", "DepthBinStats", "DepthDecodeSpec", "ERROR_ON_OVERFLOW",
    "EstimationConfig", "EstimationError", "FIXED_RANGE", "FitReport",
    "FormationError", "GamutError", "LOG_HEADER", "ManifestEntry",
    "ManifestError", "NO_CLAMP", "OffsetPolicy", "PNG16", "PrecomputeRecord",
    "PrecomputeResult", "QUANTILE_RULE", "SeedSpec", "TIFF_F32",
    "VarianceClass", "VarianceStats", "WaterParams", "aggregate_params",
    "backscatter", "bin_dark_pixels", "classify", "compute_threshold",
    "compute_variance", "decode_depth", "depth_field", "depth_jitter",
    "encode_depth", "estimate_params", "fit_attenuation", "fit_backscatter",
    "forward_render", "generate_synthetic", "intensity_profile",
    "jitter_with_accounting",
    "linear_to_srgb", "load_image", "load_manifest", "load_stats",
    "offset_interval", "radiance_pattern", "read_sidecar", "restore",
    "run_augment", "run_precompute", "sample_offset", "save_image",
    "srgb_to_linear", "write_profile_csv", "write_sidecar", "write_stats",
]
