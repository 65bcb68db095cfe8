"""Extended-latent data model and the LTF tensor file format.

A full latent code is 18 style rows of 512 components (row 0 is the
coarsest style input by convention). The first K rows (default 7) carry
identity, the remaining rows carry attributes. Arithmetic is float64;
files store float32.

LTF layout (little-endian throughout):

    magic "LTF1" | version u16 = 1 | dtype u8 = 1 (float32) | rank u8
    | shape: rank x u32 | payload: row-major float32, prod(shape)*4 bytes

No padding, no trailing bytes. Writes are atomic (temp file + rename).
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import LatentFormatError, LatentShapeError

TOTAL_ROWS = 18
COLS = 512
DEFAULT_IDENTITY_ROWS = 7

_MAGIC = b"LTF1"
_VERSION = 1
_DTYPE_FLOAT32 = 1
_HEADER = struct.Struct("<4sHBB")


def _as_rows(data, rows: int | None, name: str) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise LatentShapeError(f"{name}: expected a rank-2 tensor, got rank {arr.ndim}")
    if arr.shape[1] != COLS:
        raise LatentShapeError(f"{name}: expected {COLS} columns, got {arr.shape[1]}")
    if rows is not None and arr.shape[0] != rows:
        raise LatentShapeError(f"{name}: expected {rows} rows, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise LatentShapeError(f"{name}: contains non-finite components")
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


class _RowBlock:
    """Immutable block of 512-component style rows."""

    __slots__ = ("data",)

    _rows: int | None = None

    def __init__(self, data):
        object.__setattr__(self, "data", _as_rows(data, self._rows, type(self).__name__))

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    def __eq__(self, other) -> bool:
        return type(other) is type(self) and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((type(self).__name__, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(rows={self.rows})"


class LatentCode(_RowBlock):
    """Full 18x512 extended-latent code of one face."""

    _rows = TOTAL_ROWS


class IdentityPart(_RowBlock):
    """Identity rows of a latent code (rows [0, k), K=7 by default)."""

    _rows = None


class AttributePart(_RowBlock):
    """Attribute rows of a latent code (rows [k, 18))."""

    _rows = None


class LatentDirection(_RowBlock):
    """Identity-transfer direction added to both subjects' identity rows."""

    _rows = None


def split_latent(w: LatentCode, k: int = DEFAULT_IDENTITY_ROWS) -> tuple[IdentityPart, AttributePart]:
    """Split a latent code into identity rows [0, k) and attribute rows [k, 18).

    No component is modified; k must lie in [1, 17].
    """
    if not 1 <= k <= TOTAL_ROWS - 1:
        raise ValueError(f"identity row count k must be in [1, {TOTAL_ROWS - 1}], got {k}")
    return IdentityPart(w.data[:k]), AttributePart(w.data[k:])


def merge_latent(identity: IdentityPart, attributes: AttributePart) -> LatentCode:
    """Reassemble a full latent code; row counts must sum to 18."""
    if identity.rows + attributes.rows != TOTAL_ROWS:
        raise LatentShapeError(
            f"identity rows ({identity.rows}) + attribute rows ({attributes.rows}) "
            f"must equal {TOTAL_ROWS}"
        )
    return LatentCode(np.vstack([identity.data, attributes.data]))


def save_latent(tensor, path) -> None:
    """Write a finite rank-2 tensor as an LTF file (float32 payload, atomic)."""
    arr = np.asarray(tensor, dtype=np.float32)
    if arr.ndim != 2:
        raise LatentShapeError(f"LTF stores rank-2 tensors, got rank {arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise LatentShapeError("refusing to write non-finite components")

    header = _HEADER.pack(_MAGIC, _VERSION, _DTYPE_FLOAT32, arr.ndim)
    shape = struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()

    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".ltf.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(shape)
            fh.write(payload)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_latent(path) -> np.ndarray:
    """Read an LTF file back as a float32 array, validating every field."""
    with open(path, "rb") as fh:
        blob = fh.read()

    if len(blob) < _HEADER.size:
        raise LatentFormatError("truncated header")
    magic, version, dtype, rank = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise LatentFormatError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    if version != _VERSION:
        raise LatentFormatError(f"unsupported format version {version}")
    if dtype != _DTYPE_FLOAT32:
        raise LatentFormatError(f"unsupported dtype code {dtype}")
    if rank != 2:
        raise LatentFormatError(f"unsupported rank {rank}, expected 2")

    offset = _HEADER.size
    if len(blob) < offset + 4 * rank:
        raise LatentFormatError("truncated shape")
    shape = struct.unpack_from(f"<{rank}I", blob, offset)
    offset += 4 * rank

    expected = int(np.prod(shape)) * 4
    actual = len(blob) - offset
    if actual < expected:
        raise LatentFormatError(f"truncated payload: expected {expected} bytes, got {actual}")
    if actual > expected:
        raise LatentFormatError(f"trailing bytes: expected {expected} payload bytes, got {actual}")

    arr = np.frombuffer(blob, dtype="<f4", count=expected // 4, offset=offset).reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise LatentFormatError("payload contains non-finite components")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


def load_latent_code(path) -> LatentCode:
    """Load an LTF file that must contain a full 18x512 code."""
    return LatentCode(load_latent(path))
