"""Morph-latent construction.

Pipeline: split both subjects' codes at row k, add the identity-transfer
direction to both identity blocks, combine identity rows pairwise
(spherical by default), combine attribute rows by the attribute policy,
and reassemble the full code. Interpolation is row-wise: each
512-component style row travels on its own geodesic; there is no
flattened-tensor mode.

Spherical interpolation of one row pair:

    slerp(u, v, a) = sin((1-a)*theta)/sin(theta) * u
                   + sin(a*theta)/sin(theta) * v,
    theta = arccos(clamp(u.v / (|u||v|), -1, 1))

Rows with theta below the recipe epsilon fall back to linear
interpolation; rows within epsilon of pi are rejected (the geodesic is
non-unique there, and real face latents never reach it).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateGeometryError, LatentShapeError
from .latent import (
    DEFAULT_IDENTITY_ROWS,
    TOTAL_ROWS,
    IdentityPart,
    LatentCode,
    LatentDirection,
    merge_latent,
    split_latent,
)

SPHERICAL = "spherical"
LINEAR = "linear"
DEFAULT_EPSILON = 1e-7

_STATUS_MESSAGES = {
    _kernels.ZERO_NORM_U: "zero-norm row {row} in first input",
    _kernels.ZERO_NORM_V: "zero-norm row {row} in second input",
    _kernels.ANTIPODAL: "antipodal row {row}: angle within epsilon of pi, geodesic is non-unique",
}


@dataclass(frozen=True)
class MorphRecipe:
    """How to combine two subject latents into one morph latent.

    alpha: interpolation factor in [0, 1]; 0.5 blends both subjects equally.
    k: number of identity rows, in [1, 17].
    identity_mode / attribute_mode: "spherical" or "linear" row combination.
    direction: optional identity-transfer direction (k x 512), added to
        both subjects' identity rows before interpolation.
    epsilon: degenerate-angle threshold in radians.
    """

    alpha: float = 0.5
    k: int = DEFAULT_IDENTITY_ROWS
    identity_mode: str = SPHERICAL
    attribute_mode: str = SPHERICAL
    direction: LatentDirection | None = None
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 1 <= self.k <= TOTAL_ROWS - 1:
            raise ValueError(f"k must be in [1, {TOTAL_ROWS - 1}], got {self.k}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        for name in ("identity_mode", "attribute_mode"):
            mode = getattr(self, name)
            if mode not in (SPHERICAL, LINEAR):
                raise ValueError(f"{name} must be '{SPHERICAL}' or '{LINEAR}', got {mode!r}")


def _slerp_rows(u: np.ndarray, v: np.ndarray, alpha: float, eps: float) -> np.ndarray:
    out = np.empty_like(u)
    status, row = _kernels.slerp_rows(u, v, alpha, eps, out)
    if status != _kernels.OK:
        raise DegenerateGeometryError(_STATUS_MESSAGES[status].format(row=row))
    return out


def _lerp_rows(u: np.ndarray, v: np.ndarray, alpha: float) -> np.ndarray:
    return (1.0 - alpha) * u + alpha * v


def slerp(u, v, alpha: float) -> np.ndarray:
    """Spherically interpolate between two vectors of equal length.

    Both inputs must be finite and nonzero. Returns u at alpha=0 and v at
    alpha=1; traverses the angle between them at constant rate.
    """
    ua = np.ascontiguousarray(u, dtype=np.float64)
    va = np.ascontiguousarray(v, dtype=np.float64)
    if ua.ndim != 1 or va.ndim != 1:
        raise LatentShapeError("slerp expects 1-D vectors")
    if ua.shape != va.shape or ua.size < 1:
        raise LatentShapeError(f"slerp length mismatch: {ua.shape} vs {va.shape}")
    if not (np.all(np.isfinite(ua)) and np.all(np.isfinite(va))):
        raise ValueError("slerp inputs must be finite")
    return _slerp_rows(ua[None, :], va[None, :], alpha, DEFAULT_EPSILON)[0]


def apply_identity_direction(identity: IdentityPart, direction: LatentDirection) -> IdentityPart:
    """Add the transfer direction to an identity block, componentwise."""
    if identity.rows != direction.rows:
        raise LatentShapeError(
            f"direction has {direction.rows} rows, identity has {identity.rows}"
        )
    return IdentityPart(identity.data + direction.data)


def morph_rows(
    w1: np.ndarray,
    w2: np.ndarray,
    k: int,
    alpha: float,
    identity_mode: str = SPHERICAL,
    attribute_mode: str = SPHERICAL,
    direction: np.ndarray | None = None,
    epsilon: float = DEFAULT_EPSILON,
) -> np.ndarray:
    """Shape-agnostic morph pipeline over rank-2 row blocks.

    Rows [0, k) are identity, rows [k, ...) are attributes. Exposed for
    tests and sweeps; `build_morph_latent` pins the 18x512 contract.
    """
    w1 = np.ascontiguousarray(w1, dtype=np.float64)
    w2 = np.ascontiguousarray(w2, dtype=np.float64)
    if w1.shape != w2.shape:
        raise LatentShapeError(f"latent shape mismatch: {w1.shape} vs {w2.shape}")
    if not 1 <= k < w1.shape[0]:
        raise ValueError(f"k must be in [1, {w1.shape[0] - 1}], got {k}")

    id1, attr1 = w1[:k], w1[k:]
    id2, attr2 = w2[:k], w2[k:]
    if direction is not None:
        direction = np.asarray(direction, dtype=np.float64)
        if direction.shape != id1.shape:
            raise LatentShapeError(
                f"direction shape {direction.shape} does not match identity block {id1.shape}"
            )
        id1 = id1 + direction
        id2 = id2 + direction

    combine = {SPHERICAL: lambda a, b, t: _slerp_rows(np.ascontiguousarray(a), np.ascontiguousarray(b), t, epsilon), LINEAR: _lerp_rows}
    merged_id = combine[identity_mode](id1, id2, alpha)
    merged_attr = combine[attribute_mode](attr1, attr2, alpha)
    return np.vstack([merged_id, merged_attr])


def build_morph_latent(w1: LatentCode, w2: LatentCode, recipe: MorphRecipe) -> LatentCode:
    """Build the 18x512 morph latent for two subjects under a recipe.

    Deterministic: identical inputs produce bit-identical outputs. The
    optional direction is added to both subjects' identity blocks.
    """
    direction = recipe.direction.data if recipe.direction is not None else None
    merged = morph_rows(
        w1.data,
        w2.data,
        k=recipe.k,
        alpha=recipe.alpha,
        identity_mode=recipe.identity_mode,
        attribute_mode=recipe.attribute_mode,
        direction=direction,
        epsilon=recipe.epsilon,
    )
    return LatentCode(merged)
