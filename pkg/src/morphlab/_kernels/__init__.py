"""Kernel backend selection.

Prefers the compiled extension; falls back to numpy. Set
``MORPHLAB_PURE_PYTHON=1`` to force the fallback (benchmarking, debugging).
"""

import os

from . import _fallback

if os.environ.get("MORPHLAB_PURE_PYTHON"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

OK = _impl.OK
ZERO_NORM_U = _impl.ZERO_NORM_U
ZERO_NORM_V = _impl.ZERO_NORM_V
ANTIPODAL = _impl.ANTIPODAL

slerp_rows = _impl.slerp_rows
sse_u8 = _impl.sse_u8

__all__ = [
    "BACKEND",
    "OK",
    "ZERO_NORM_U",
    "ZERO_NORM_V",
    "ANTIPODAL",
    "slerp_rows",
    "sse_u8",
]
