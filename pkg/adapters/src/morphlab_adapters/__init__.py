"""Pretrained-model adapters around the morphlab pipeline."""

from .backends import FRS_NAMES, SyntheticBackend, cosine_similarity, get_backend
from .errors import AdapterError, LandmarkError
from .ops import (
    decode_latent,
    encode_image,
    encode_manifest,
    landmark_direction,
    score_pairs,
)

__version__ = "0.1.0"

__all__ = [
    "FRS_NAMES",
    "SyntheticBackend",
    "cosine_similarity",
    "get_backend",
    "AdapterError",
    "LandmarkError",
    "decode_latent",
    "encode_image",
    "encode_manifest",
    "landmark_direction",
    "score_pairs",
    "__version__",
]
