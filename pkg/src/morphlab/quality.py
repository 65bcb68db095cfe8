"""PSNR between registered 8-bit images and box-plot statistics.

MSE pools all channels; PSNR = 10*log10(255^2 / MSE) with an infinite
sentinel for identical images (serialized as the string "inf"). The sum
of squared errors is accumulated in exact integers, so PSNR is
reproducible bit-for-bit across kernel backends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import _kernels
from .errors import SchemaError

MAX_INTENSITY = 255


@dataclass(frozen=True)
class ImageBuffer:
    """8-bit image samples, row-major, channel-interleaved (1 or 3 channels)."""

    samples: np.ndarray  # (height, width, channels) uint8

    def __post_init__(self):
        arr = np.ascontiguousarray(self.samples)
        if arr.dtype != np.uint8:
            raise ValueError(f"samples must be uint8, got {arr.dtype}")
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"expected (h, w, 1|3) samples, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("images must be at least 1x1")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def channels(self) -> int:
        return self.samples.shape[2]


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    """Peak signal-to-noise ratio in dB; math.inf when the images match."""
    if a.samples.shape != b.samples.shape:
        raise ValueError(
            f"image shape mismatch: {a.samples.shape} vs {b.samples.shape}"
        )
    flat_a = a.samples.reshape(-1)
    flat_b = b.samples.reshape(-1)
    sse = _kernels.sse_u8(flat_a, flat_b)
    if sse == 0:
        return math.inf
    # 10*log10(MAX^2 / (sse/n)) with the ratio formed exactly
    return 10.0 * math.log10((MAX_INTENSITY * MAX_INTENSITY * flat_a.size) / sse)


@dataclass(frozen=True)
class BoxPlotStats:
    """Five-number summary plus Tukey whiskers and outliers."""

    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    lower_whisker: float
    upper_whisker: float
    outliers: tuple[float, ...] = field(default_factory=tuple)
    n: int = 0

    def to_json(self) -> dict:
        return {
            "minimum": self.minimum,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "maximum": self.maximum,
            "lower_whisker": self.lower_whisker,
            "upper_whisker": self.upper_whisker,
            "outliers": list(self.outliers),
            "n": self.n,
        }


def boxplot_stats(values) -> BoxPlotStats:
    """Quartiles by linear interpolation of order statistics (type 7).

    Whiskers sit on the most extreme data points within 1.5*IQR of the
    quartiles; points beyond are outliers.
    """
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("boxplot_stats needs at least one value")
    if not np.all(np.isfinite(arr)):
        raise ValueError("boxplot_stats values must be finite")

    q1, median, q3 = np.percentile(arr, [25.0, 50.0, 75.0], method="linear")
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    outliers = np.sort(arr[(arr < lo_fence) | (arr > hi_fence)])
    # whiskers never retreat inside the box: when every low point within the
    # fence sits above the interpolated q1, the whisker stays at q1
    return BoxPlotStats(
        minimum=float(arr.min()),
        q1=float(q1),
        median=float(median),
        q3=float(q3),
        maximum=float(arr.max()),
        lower_whisker=float(min(q1, inside.min())),
        upper_whisker=float(max(q3, inside.max())),
        outliers=tuple(float(x) for x in outliers),
        n=int(arr.size),
    )


def _load_ppm(blob: bytes, path) -> ImageBuffer:
    # P6 only, maxval 255, '#' comments allowed in the header
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise SchemaError(f"{path}: truncated PPM header")
        fields.append(blob[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise SchemaError(f"{path}: bad PPM header") from exc
    if maxval != MAX_INTENSITY:
        raise SchemaError(f"{path}: PPM maxval must be 255, got {maxval}")
    if width < 1 or height < 1:
        raise SchemaError(f"{path}: bad PPM dimensions {width}x{height}")
    expected = width * height * 3
    payload = blob[pos : pos + expected]
    if len(payload) != expected or len(blob) - pos > expected:
        raise SchemaError(f"{path}: PPM payload size mismatch")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return ImageBuffer(arr)


def load_image(path) -> ImageBuffer:
    """Read a PNG (alpha dropped) or binary PPM (P6, maxval 255)."""
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"P6":
        with open(path, "rb") as fh:
            return _load_ppm(fh.read(), path)
    try:
        with Image.open(path) as img:
            if img.mode in ("RGBA", "P"):
                img = img.convert("RGB")
            elif img.mode == "LA":
                img = img.convert("L")
            if img.mode not in ("L", "RGB"):
                raise SchemaError(f"{path}: unsupported image mode {img.mode}")
            arr = np.asarray(img, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise SchemaError(f"{path}: not a PNG or P6 PPM image") from exc
    return ImageBuffer(arr)
