"""Pure-numpy implementations of the compiled kernels.

Same signatures and status codes as ``_core``; used when the extension is
unavailable or when ``MORPHLAB_PURE_PYTHON`` is set.
"""

import numpy as np

OK = 0
ZERO_NORM_U = 1
ZERO_NORM_V = 2
ANTIPODAL = 3


def slerp_rows(u, v, alpha, eps, out):
    su = np.einsum("ij,ij->i", u, u)
    sv = np.einsum("ij,ij->i", v, v)
    zero_u = np.flatnonzero(su == 0.0)
    if zero_u.size:
        return ZERO_NORM_U, int(zero_u[0])
    zero_v = np.flatnonzero(sv == 0.0)
    if zero_v.size:
        return ZERO_NORM_V, int(zero_v[0])

    dot = np.einsum("ij,ij->i", u, v)
    cosang = np.clip(dot / (np.sqrt(su) * np.sqrt(sv)), -1.0, 1.0)
    theta = np.arccos(cosang)
    antipodal = np.flatnonzero(theta > np.pi - eps)
    if antipodal.size:
        return ANTIPODAL, int(antipodal[0])

    linear = theta < eps
    spherical = ~linear
    if np.any(linear):
        out[linear] = (1.0 - alpha) * u[linear] + alpha * v[linear]
    if np.any(spherical):
        th = theta[spherical, None]
        s = np.sin(th)
        w0 = np.sin((1.0 - alpha) * th) / s
        w1 = np.sin(alpha * th) / s
        out[spherical] = w0 * u[spherical] + w1 * v[spherical]
    return OK, -1


def sse_u8(a, b):
    return int(np.sum((a.astype(np.int64) - b.astype(np.int64)) ** 2))
