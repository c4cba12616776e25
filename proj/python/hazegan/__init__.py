"""Conditional WGAN dehazing toolkit: haze synthesis, training, metrics, DCP baseline."""

from hazegan._core import (
    DataError,
    InvalidParameterError,
    NumericError,
    contrast_gain,
    dcp_dehaze,
    dehaze_image,
    evaluate_set,
    generate_synthetic_dataset,
    gradient_ratio,
    psnr,
    restore_with_transmission,
    saturation_sigma,
    split_manifest,
    ssim,
    synthesize_haze,
    train,
    transmission,
)

__all__ = [
    "DataError",
    "InvalidParameterError",
    "NumericError",
    "contrast_gain",
    "dcp_dehaze",
    "dehaze_image",
    "evaluate_set",
    "generate_synthetic_dataset",
    "gradient_ratio",
    "psnr",
    "restore_with_transmission",
    "saturation_sigma",
    "split_manifest",
    "ssim",
    "synthesize_haze",
    "train",
    "transmission",
]

__version__ = "0.1.0"
