"""TorchScript-backed inference over exported pretrained networks.

Each stage loads a TorchScript module from an environment variable (or
explicit path) and keeps the preprocessing thin:

    MORPHLAB_PSP_TS         image -> (18, 512) inversion encoder
    MORPHLAB_STYLEGAN_TS    (18, 512) -> 1024x1024 synthesis network
    MORPHLAB_CODEFORMER_TS  1024x1024 -> 1024x1024 restoration network
    MORPHLAB_LANDMARK_TS    image -> (106, 2) landmark detector
    MORPHLAB_LANDMARK_ENCODER_TS  two landmark sets -> (7, 512) direction
    MORPHLAB_ARCFACE_TS     aligned face -> embedding
    MORPHLAB_MAGFACE_TS     aligned face -> embedding

Weights are license-gated and never bundled. Inference runs on CPU in
eval mode under no_grad, so repeated runs are deterministic.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import AdapterError, LandmarkError
from .base import (
    DIRECTION_ROWS,
    LANDMARK_POINTS,
    LATENT_COLS,
    LATENT_ROWS,
    OUTPUT_SIZE,
    Backend,
)

_ENV = {
    "psp": "MORPHLAB_PSP_TS",
    "stylegan": "MORPHLAB_STYLEGAN_TS",
    "codeformer": "MORPHLAB_CODEFORMER_TS",
    "landmark": "MORPHLAB_LANDMARK_TS",
    "landmark_encoder": "MORPHLAB_LANDMARK_ENCODER_TS",
    "arcface": "MORPHLAB_ARCFACE_TS",
    "magface": "MORPHLAB_MAGFACE_TS",
}


class TorchScriptBackend(Backend):
    name = "torchscript"

    def __init__(self, paths: dict[str, str] | None = None):
        try:
            import torch
        except ImportError as exc:
            raise AdapterError("the torchscript backend requires torch") from exc
        self._torch = torch
        self._paths = dict(paths or {})
        self._modules: dict[str, object] = {}
        torch.set_grad_enabled(False)

    def _module(self, stage: str):
        if stage not in self._modules:
            path = self._paths.get(stage) or os.environ.get(_ENV[stage])
            if not path:
                raise AdapterError(
                    f"no weights for stage {stage!r}: set {_ENV[stage]} to a TorchScript file"
                )
            if not os.path.exists(path):
                raise AdapterError(f"{_ENV[stage]} points to a missing file: {path}")
            module = self._torch.jit.load(path, map_location="cpu")
            module.eval()
            self._modules[stage] = module
        return self._modules[stage]

    def _to_tensor(self, image: np.ndarray, size: int):
        torch = self._torch
        tensor = torch.from_numpy(image.astype(np.float32) / 127.5 - 1.0)
        tensor = tensor.permute(2, 0, 1).unsqueeze(0)
        if tensor.shape[-1] != size or tensor.shape[-2] != size:
            tensor = torch.nn.functional.interpolate(
                tensor, size=(size, size), mode="bilinear", align_corners=False
            )
        return tensor

    def encode(self, image: np.ndarray) -> np.ndarray:
        out = self._module("psp")(self._to_tensor(image, 256))
        latent = out.squeeze(0).cpu().numpy().astype(np.float32)
        if latent.shape != (LATENT_ROWS, LATENT_COLS):
            raise AdapterError(f"inversion encoder returned shape {latent.shape}")
        return latent

    def synthesize(self, latent: np.ndarray) -> np.ndarray:
        torch = self._torch
        tensor = torch.from_numpy(latent.astype(np.float32)).unsqueeze(0)
        out = self._module("stylegan")(tensor).squeeze(0)
        image = ((out.clamp(-1, 1) + 1.0) * 127.5).round().byte()
        image = image.permute(1, 2, 0).cpu().numpy()
        if image.shape != (OUTPUT_SIZE, OUTPUT_SIZE, 3):
            raise AdapterError(f"synthesis network returned shape {image.shape}")
        return image

    def restore(self, image: np.ndarray) -> np.ndarray:
        out = self._module("codeformer")(self._to_tensor(image, OUTPUT_SIZE)).squeeze(0)
        restored = ((out.clamp(-1, 1) + 1.0) * 127.5).round().byte()
        return restored.permute(1, 2, 0).cpu().numpy()

    def embed(self, image: np.ndarray, frs: str) -> np.ndarray:
        if frs not in ("arcface", "magface"):
            raise AdapterError(f"unknown FRS {frs!r}")
        out = self._module(frs)(self._to_tensor(image, 112)).squeeze(0)
        vec = out.cpu().numpy().astype(np.float64).ravel()
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            raise AdapterError(f"{frs} produced a zero embedding")
        return vec / norm

    def landmarks(self, image: np.ndarray) -> np.ndarray:
        out = self._module("landmark")(self._to_tensor(image, 256)).squeeze(0)
        points = out.cpu().numpy().astype(np.float32)
        if points.shape != (LANDMARK_POINTS, 2):
            raise LandmarkError(f"landmark detector returned shape {points.shape}")
        return points

    def direction(self, landmarks_a: np.ndarray, landmarks_b: np.ndarray) -> np.ndarray:
        torch = self._torch
        a = torch.from_numpy(landmarks_a.astype(np.float32)).unsqueeze(0)
        b = torch.from_numpy(landmarks_b.astype(np.float32)).unsqueeze(0)
        out = self._module("landmark_encoder")(a, b).squeeze(0)
        direction = out.cpu().numpy().astype(np.float32)
        if direction.shape != (DIRECTION_ROWS, LATENT_COLS):
            raise AdapterError(f"landmark encoder returned shape {direction.shape}")
        return direction
