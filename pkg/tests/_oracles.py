"""Independent quadrature oracles for the two-particle quadratic gas at beta = 1."""

import numpy as np
from scipy import integrate


def pair_distance_density(r):
    """Unnormalised density of ``|z1 - z2|`` when ``P ~ |z1 - z2|^2 exp(-2(|z1|^2 + |z2|^2))``.

    With ``w = (z1 + z2) / 2`` and ``d = z1 - z2`` the weight factorises as
    ``|d|^2 exp(-4|w|^2 - |d|^2)``; the polar Jacobian adds a factor ``|d|``.
    """
    return r**3 * np.exp(-r * r)


def pair_distance_bin_probs(edges):
    norm = integrate.quad(pair_distance_density, 0, np.inf)[0]
    return np.array([integrate.quad(pair_distance_density, a, b)[0]
                     for a, b in zip(edges[:-1], edges[1:])]) / norm


def _joint(x2, y2, x1):
    return ((x1 - x2) ** 2 + y2**2) * np.exp(-2 * (x1 * x1 + x2 * x2 + y2 * y2))


def one_particle_radius_cdf(n_nodes=48, r_max=3.5):
    """CDF of ``|z1|`` by brute-force 2D quadrature over ``z2`` at each radius node.

    Returns a callable interpolating the cumulative integral of
    ``2 pi r int |z1 - z2|^2 e^{-2(|z1|^2 + |z2|^2)} dz2`` (normalised).
    """
    r = np.linspace(0.0, r_max, n_nodes)
    inner = np.array([integrate.dblquad(_joint, -6, 6, -6, 6, args=(x,), epsabs=1e-13)[0] for x in r])
    rho = 2 * np.pi * r * inner
    # integrate the smooth radial density on a fine grid via cubic interpolation
    from scipy.interpolate import CubicSpline
    spline = CubicSpline(r, rho)
    fine = np.linspace(0.0, r_max, 4001)
    cdf = integrate.cumulative_trapezoid(spline(fine), fine, initial=0.0)
    cdf /= cdf[-1]
    return lambda x: np.interp(x, fine, cdf, right=1.0)
