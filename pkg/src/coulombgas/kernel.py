"""Logarithmic interaction kernel and its disk-smoothed variant.

Points in the plane are passed as array-likes whose last axis has length 2
(``(x, y)``).  Every function broadcasts over leading axes.
"""

import numpy as np


class CoincidentPointsError(ValueError):
    """Raised when the logarithmic kernel is evaluated at zero separation."""


def _as_points(z):
    z = np.asarray(z, dtype=float)
    if z.shape[-1:] != (2,):
        raise ValueError(f"expected points with trailing axis of length 2, got shape {z.shape}")
    return z


def _check_radius(r):
    r = float(r)
    if not r > 0:
        raise ValueError(f"smoothing radius must be positive, got {r}")
    return r


def log_kernel(z, w):
    """Return ``log(1/|z - w|)``.

    Raises :class:`CoincidentPointsError` if any pair coincides; energy
    routines map that case to ``+inf`` themselves.
    """
    d = _as_points(z) - _as_points(w)
    dist = np.hypot(d[..., 0], d[..., 1])  # no underflow for tiny separations
    if np.any(dist == 0.0):
        raise CoincidentPointsError("log kernel evaluated at coincident points")
    out = -np.log(dist)
    return float(out) if np.ndim(out) == 0 else out


def smoothed_log(z, r):
    """Potential of the uniform probability measure on the disk of radius ``r``.

    Equals ``1/2 + log(1/r) - |z|^2/(2 r^2)`` for ``|z| <= r`` and
    ``log(1/|z|)`` outside, so it is continuous across ``|z| = r``.
    """
    r = _check_radius(r)
    z = _as_points(z)
    r2 = np.einsum("...i,...i->...", z, z)
    inside = r2 <= r * r
    with np.errstate(divide="ignore"):
        outer = -np.log(np.where(inside, 1.0, np.hypot(z[..., 0], z[..., 1])))
    out = np.where(inside, 0.5 - np.log(r) - r2 / (2 * r * r), outer)
    return float(out) if np.ndim(out) == 0 else out


def smoothed_log_derivatives(z, r):
    """Gradient and Laplacian of :func:`smoothed_log`.

    The gradient is ``-z / max(r^2, |z|^2)``.  The Laplacian is ``-2/r^2``
    inside the disk and 0 outside; on the circle ``|z| = r`` the inner value
    is returned.
    """
    r = _check_radius(r)
    z = _as_points(z)
    r2 = np.einsum("...i,...i->...", z, z)
    denom = np.maximum(r * r, r2)
    grad = -z / denom[..., None]
    lap = np.where(r2 <= r * r, -2.0 / (r * r), 0.0)
    if np.ndim(lap) == 0:
        return grad, float(lap)
    return grad, lap
