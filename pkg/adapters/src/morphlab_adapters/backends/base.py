"""Backend interface shared by the real (TorchScript) and synthetic stacks.

All methods take and return numpy arrays; file handling lives in ops.
Image arrays are (H, W, 3) uint8 RGB.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

LATENT_ROWS = 18
LATENT_COLS = 512
DIRECTION_ROWS = 7
OUTPUT_SIZE = 1024
LANDMARK_POINTS = 106

FRS_NAMES = ("arcface", "magface")


class Backend(ABC):
    """Inference surface the pipeline needs from the pretrained stack."""

    name: str

    @abstractmethod
    def encode(self, image: np.ndarray) -> np.ndarray:
        """Invert an aligned face image into an (18, 512) float32 latent."""

    @abstractmethod
    def synthesize(self, latent: np.ndarray) -> np.ndarray:
        """Decode an (18, 512) latent into a (1024, 1024, 3) uint8 image."""

    @abstractmethod
    def restore(self, image: np.ndarray) -> np.ndarray:
        """Blind face restoration pass over a synthesized image."""

    @abstractmethod
    def embed(self, image: np.ndarray, frs: str) -> np.ndarray:
        """Unit-norm float64 embedding of a face under the named FRS."""

    @abstractmethod
    def landmarks(self, image: np.ndarray) -> np.ndarray:
        """(106, 2) float32 landmark coordinates; raises LandmarkError."""

    @abstractmethod
    def direction(self, landmarks_a: np.ndarray, landmarks_b: np.ndarray) -> np.ndarray:
        """(7, 512) float32 identity-transfer direction from two landmark sets."""


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
