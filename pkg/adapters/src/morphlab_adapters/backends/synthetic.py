"""Deterministic stand-in backend for running the pipeline without weights.

Every method is a pure function of its input bytes (hash-seeded), so
repeated runs are byte-identical and identical inputs produce identical
embeddings. Useful for plumbing tests, fixtures, and demos; the outputs
are obviously not faces.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..errors import LandmarkError
from .base import (
    DIRECTION_ROWS,
    LANDMARK_POINTS,
    LATENT_COLS,
    LATENT_ROWS,
    OUTPUT_SIZE,
    Backend,
)

_DIRECTION_SEED = 910


def _seed_from(*parts: bytes) -> np.random.Generator:
    digest = hashlib.sha256(b"|".join(parts)).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _image_key(image: np.ndarray) -> bytes:
    return image.shape.__repr__().encode() + image.tobytes()


class SyntheticBackend(Backend):
    name = "synthetic"

    def encode(self, image: np.ndarray) -> np.ndarray:
        rng = _seed_from(b"encode", _image_key(image))
        return (rng.standard_normal((LATENT_ROWS, LATENT_COLS)) * 0.5).astype(np.float32)

    def synthesize(self, latent: np.ndarray) -> np.ndarray:
        rng = _seed_from(b"synthesize", latent.astype(np.float32).tobytes())
        # smooth deterministic pattern parameterized by the latent
        phases = rng.uniform(0, 2 * np.pi, size=(3, 4))
        freqs = rng.uniform(1.0, 6.0, size=(3, 4))
        axis = np.linspace(0.0, 1.0, OUTPUT_SIZE)
        yy, xx = np.meshgrid(axis, axis, indexing="ij")
        channels = []
        for c in range(3):
            plane = np.zeros((OUTPUT_SIZE, OUTPUT_SIZE))
            for f, p in zip(freqs[c], phases[c]):
                plane += np.sin(2 * np.pi * f * xx + p) + np.cos(2 * np.pi * f * yy + p)
            lo, hi = plane.min(), plane.max()
            channels.append((plane - lo) / (hi - lo) * 255.0)
        return np.stack(channels, axis=-1).astype(np.uint8)

    def restore(self, image: np.ndarray) -> np.ndarray:
        # unsharp mask with a cross-shaped blur; changes content, keeps shape
        img = image.astype(np.int32)
        blur = (
            img
            + np.roll(img, 1, axis=0)
            + np.roll(img, -1, axis=0)
            + np.roll(img, 1, axis=1)
            + np.roll(img, -1, axis=1)
        ) // 5
        return np.clip(2 * img - blur, 0, 255).astype(np.uint8)

    def embed(self, image: np.ndarray, frs: str) -> np.ndarray:
        # block-mean pooled intensities passed through a fixed per-FRS
        # projection; identical images map to identical embeddings
        gray = image.astype(np.float64).mean(axis=2) if image.ndim == 3 else image.astype(np.float64)
        h, w = gray.shape
        hs, ws = max(h // 8, 1), max(w // 8, 1)
        pooled = np.array(
            [
                gray[r * hs : (r + 1) * hs, c * ws : (c + 1) * ws].mean()
                for r in range(8)
                for c in range(8)
            ]
        )
        pooled = pooled - pooled.mean()
        projection = _seed_from(b"frs", frs.encode()).standard_normal((64, 64))
        vec = projection @ pooled
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            vec = projection @ (pooled + 1.0)
            norm = np.linalg.norm(vec)
        return vec / norm

    def landmarks(self, image: np.ndarray) -> np.ndarray:
        if image.std() == 0.0:
            raise LandmarkError("no face structure detected (uniform image)")
        h, w = image.shape[:2]
        rng = _seed_from(b"landmarks", _image_key(image))
        grid_y, grid_x = np.meshgrid(
            np.linspace(0.2, 0.8, 10), np.linspace(0.2, 0.8, 11), indexing="ij"
        )
        base = np.stack([grid_x.ravel(), grid_y.ravel()], axis=1)[:LANDMARK_POINTS]
        jitter = rng.uniform(-0.02, 0.02, size=base.shape)
        points = (base + jitter) * np.array([w, h])
        return points.astype(np.float32)

    def direction(self, landmarks_a: np.ndarray, landmarks_b: np.ndarray) -> np.ndarray:
        # fixed linear map of the landmark displacement; identical inputs
        # give a zero direction
        delta = (landmarks_b.astype(np.float64) - landmarks_a.astype(np.float64)).ravel()
        projection = np.random.default_rng(_DIRECTION_SEED).standard_normal(
            (DIRECTION_ROWS * LATENT_COLS, delta.size)
        )
        flat = projection @ (delta / max(np.abs(delta).max(), 1.0))
        return (0.05 * flat.reshape(DIRECTION_ROWS, LATENT_COLS)).astype(np.float32)
