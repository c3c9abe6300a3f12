"""Compactly supported polynomial bump functions with exact derivative norms.

A bump is ``f(z) = A * (1 - |z - z0|^2 / rho^2)^k`` inside the disk
``B(z0, rho)`` and zero outside, with ``rho = t/2``.  The exponent ``k``
fixes the smoothness: ``f`` is ``C^{k-1}``, so ``k >= 5`` gives the four
continuous derivatives the rigidity bound asks for.

The profile is a polynomial in ``(x, y)``, so every partial derivative is
evaluated exactly with :mod:`numpy.polynomial`.  The norms
``||grad^l f||_inf`` use the Frobenius norm of the symmetric derivative
tensor, ``|grad^l f|^2 = sum_a C(l, a) (d_x^a d_y^(l-a) f)^2``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import minimize_scalar

PROFILES = {"poly5": 5, "poly6": 6, "poly8": 8}
MAX_ORDER = 4


@lru_cache(maxsize=None)
def _profile_coeffs(k):
    """2D coefficient array of (1 - x^2 - y^2)^k, indexed [i, j] for x^i y^j."""
    c = np.zeros((2 * k + 1, 2 * k + 1))
    # multinomial expansion of (1 - x^2 - y^2)^k
    for a in range(k + 1):
        for b in range(k + 1 - a):
            coef = comb(k, a) * comb(k - a, b) * (-1) ** (a + b)
            c[2 * a, 2 * b] += coef
    return c


@lru_cache(maxsize=None)
def _partial_coeffs(k, a, b):
    c = _profile_coeffs(k)
    if a:
        c = P.polyder(c, a, axis=0)
    if b:
        c = P.polyder(c, b, axis=1)
    return c


def _tensor_norm_on_axis(k, order, u):
    """|grad^order Phi| at points (u, 0); rotation invariance covers the disk."""
    u = np.asarray(u, dtype=float)
    total = np.zeros_like(u)
    for a in range(order + 1):
        d = P.polyval2d(u, np.zeros_like(u), _partial_coeffs(k, a, order - a))
        total += comb(order, a) * d * d
    return np.sqrt(total)


@lru_cache(maxsize=None)
def _unit_norms(k):
    """sup over the unit disk of |grad^l Phi| for l = 0..4, plus sup |Delta Phi| and ||grad Phi||_2."""
    sups = []
    grid = np.linspace(0.0, 1.0, 4001)
    for order in range(MAX_ORDER + 1):
        vals = _tensor_norm_on_axis(k, order, grid)
        i = int(np.argmax(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = minimize_scalar(lambda s: -_tensor_norm_on_axis(k, order, s),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14})
        sups.append(max(vals[i], -res.fun))
    # Delta Phi = phi'' + phi'/u with phi(u) = (1-u^2)^k is -4k(1-u^2)^(k-2)(1-k u^2)
    lap = np.abs(-4 * k * (1 - grid**2) ** (k - 2) * (1 - k * grid**2))
    lap_sup = float(max(lap.max(), 4 * k))
    # ||grad Phi||_2^2 = 2 pi int_0^1 (2 k u (1-u^2)^(k-1))^2 u du = 2 pi k / (2k - 1)
    grad_l2 = float(np.sqrt(2 * np.pi * k / (2 * k - 1)))
    return tuple(float(s) for s in sups), lap_sup, grad_l2


@dataclass(frozen=True)
class TestFunction:
    """A polynomial bump centred at ``center`` with scale ``t`` (support radius ``t/2``)."""

    __test__ = False  # not a pytest class

    center: tuple
    t: float
    profile: str = "poly5"
    amplitude: float = 1.0
    norms: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown bump profile {self.profile!r}; choose from {sorted(PROFILES)}")
        if not self.t > 0:
            raise ValueError("bump scale t must be positive")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        sups, _, _ = _unit_norms(self.exponent)
        rho = self.radius
        norms = tuple(abs(self.amplitude) * s / rho**l for l, s in enumerate(sups))
        object.__setattr__(self, "norms", norms)

    @property
    def exponent(self):
        return PROFILES[self.profile]

    @property
    def radius(self):
        """Support radius t/2."""
        return 0.5 * self.t

    @property
    def laplacian_sup(self):
        """Exact ``||Delta f||_inf``."""
        return abs(self.amplitude) * _unit_norms(self.exponent)[1] / self.radius**2

    @property
    def grad_l2(self):
        """Exact ``||grad f||_2`` (scale invariant in two dimensions)."""
        return abs(self.amplitude) * _unit_norms(self.exponent)[2]

    def norm(self, k, t=None):
        """``sum_{l=1}^k t^l ||grad^l f||_inf`` with ``t`` defaulting to the bump scale."""
        if not 1 <= k <= MAX_ORDER:
            raise ValueError(f"norm order must be in 1..{MAX_ORDER}")
        t = self.t if t is None else t
        return sum(t**l * self.norms[l] for l in range(1, k + 1))

    def scaled(self, factor):
        return TestFunction(self.center, self.t, self.profile, self.amplitude * factor)

    def _local(self, z):
        z = np.asarray(z, dtype=float)
        w = (z - np.asarray(self.center)) / self.radius
        inside = np.einsum("...i,...i->...", w, w) < 1.0
        return w, inside

    def partial(self, z, a, b):
        """Exact ``d_x^a d_y^b f`` at points ``z``."""
        w, inside = self._local(z)
        c = _partial_coeffs(self.exponent, a, b)
        vals = P.polyval2d(w[..., 0], w[..., 1], c)
        return np.where(inside, self.amplitude * vals / self.radius ** (a + b), 0.0)

    def __call__(self, z):
        return self.partial(z, 0, 0)

    def gradient(self, z):
        return np.stack([self.partial(z, 1, 0), self.partial(z, 0, 1)], axis=-1)

    def laplacian(self, z):
        return self.partial(z, 2, 0) + self.partial(z, 0, 2)

    def laplacian_gradient(self, z):
        return np.stack([self.partial(z, 3, 0) + self.partial(z, 1, 2),
                         self.partial(z, 2, 1) + self.partial(z, 0, 3)], axis=-1)

    def dbar(self, z):
        """Wirtinger derivative ``(d_x + i d_y) f / 2``."""
        return 0.5 * (self.partial(z, 1, 0) + 1j * self.partial(z, 0, 1))

    def d(self, z):
        """Wirtinger derivative ``(d_x - i d_y) f / 2``."""
        return 0.5 * (self.partial(z, 1, 0) - 1j * self.partial(z, 0, 1))

    def grad_tensor_norm(self, z, order):
        """Pointwise Frobenius norm of the order-``order`` derivative tensor."""
        total = 0.0
        for a in range(order + 1):
            d = self.partial(z, a, order - a)
            total = total + comb(order, a) * d * d
        return np.sqrt(total)


def make_bump(center, s, N, profile="poly5", amplitude=1.0):
    """Bump at mesoscopic scale ``t = N^-s`` around ``center``."""
    if not 0 <= s < 0.5:
        raise ValueError(f"scale exponent s must lie in [0, 1/2), got {s}")
    if N < 1:
        raise ValueError("N must be positive")
    return TestFunction(center, float(N) ** (-s), profile, amplitude)
