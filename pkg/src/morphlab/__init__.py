"""Latent-space face-morph generation and FRS vulnerability evaluation."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .latent import (
    AttributePart,
    IdentityPart,
    LatentCode,
    LatentDirection,
    load_latent,
    load_latent_code,
    merge_latent,
    save_latent,
    split_latent,
)
from .metrics import (
    FtarTable,
    ScoreTable,
    Threshold,
    calibrate_threshold,
    fmmpmr,
    gmap,
    mmpmr,
)
from .morph import MorphRecipe, apply_identity_direction, build_morph_latent, slerp
from .quality import BoxPlotStats, ImageBuffer, boxplot_stats, load_image, psnr

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "AttributePart",
    "IdentityPart",
    "LatentCode",
    "LatentDirection",
    "load_latent",
    "load_latent_code",
    "merge_latent",
    "save_latent",
    "split_latent",
    "FtarTable",
    "ScoreTable",
    "Threshold",
    "calibrate_threshold",
    "fmmpmr",
    "gmap",
    "mmpmr",
    "MorphRecipe",
    "apply_identity_direction",
    "build_morph_latent",
    "slerp",
    "BoxPlotStats",
    "ImageBuffer",
    "boxplot_stats",
    "load_image",
    "psnr",
    "__version__",
]
