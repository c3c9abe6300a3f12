"""Equilibrium measures: radial closed form, grid obstacle problem, and the
closed-form perturbation and restriction identities built on top of them."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
from scipy import integrate, optimize

from .grid import (GridField, GridMeasure, GridSpec, discrete_laplacian,
                   log_potential_of_measure, measure_from_density)
from .potential import Disk, Potential, add_external_charges, restrict_hard_wall
from .testfunctions import TestFunction


class NonConvergenceError(RuntimeError):
    """Obstacle solver stopped before meeting its tolerances."""

    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = residuals


class BoxTooSmallError(ValueError):
    """The computed coincidence set reaches the outer ring of the grid."""


class PreconditionError(ValueError):
    """A closed-form identity was requested outside its range of validity."""

    def __init__(self, message, cells=()):
        super().__init__(message)
        self.cells = list(cells)


# ---------------------------------------------------------------------------
# radial closed form
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RadialEquilibrium:
    """Equilibrium measure of a radial potential, supported on the disk ``|z| <= R``."""

    potential: Potential
    R: float
    F: float

    def _lap_r(self, r):
        r = np.asarray(r, dtype=float)
        return self.potential.laplacian(np.stack([r, np.zeros_like(r)], axis=-1))

    def density_radial(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.R, self._lap_r(r) / (4 * np.pi), 0.0)

    def density(self, z):
        z = np.asarray(z, dtype=float)
        return self.density_radial(np.sqrt(np.einsum("...i,...i->...", z, z)))

    def mass_within(self, r):
        """``mu_V(B(0, r))``, exact for the polynomial family: ``sum_k k c_k r^(2k)``."""
        r = np.minimum(np.asarray(r, dtype=float), self.R)
        return _radial_mass(self.potential.coeffs, r)

    def mass_in_disk(self, center, r):
        """``mu_V(B(center, r))``; off-centre disks integrate arc fractions over radius."""
        c = float(np.hypot(*center))
        if c == 0.0:
            return float(self.mass_within(r))
        lo, hi = max(0.0, c - r), min(self.R, c + r)
        if lo >= hi:
            return 0.0

        def integrand(rho):
            if rho <= r - c:
                frac = 1.0
            else:
                cosang = (rho * rho + c * c - r * r) / (2 * rho * c)
                frac = np.arccos(np.clip(cosang, -1.0, 1.0)) / np.pi
            return float(self.density_radial(rho)) * 2 * np.pi * rho * frac

        pts = [p for p in (r - c,) if lo < p < hi]
        val, _ = integrate.quad(integrand, lo, hi, points=pts or None, limit=200, epsabs=1e-13)
        return val

    def quantile(self, u):
        """Radius ``r`` with ``mu_V(B(0, r)) = u``."""
        u = np.asarray(u, dtype=float)
        coeffs = self.potential.coeffs
        if coeffs.size == 1:
            return np.sqrt(u / coeffs[0])
        table_r = np.linspace(0.0, self.R, 4097)
        table_m = _radial_mass(coeffs, table_r)
        r = np.interp(u, table_m, table_r)
        for _ in range(4):  # Newton polish; d mass / dr = r * Lap V / 2
            lap = self._lap_r(r)
            slope = np.where(r > 0, r * lap / 2, 1.0)
            r = np.clip(r - (_radial_mass(coeffs, r) - u) / np.maximum(slope, 1e-300), 0.0, self.R)
        return r

    def log_potential(self, z):
        """``U^mu(z)``: ``F - V/2`` on the support, ``log(1/|z|)`` outside."""
        z = np.asarray(z, dtype=float)
        r = np.sqrt(np.einsum("...i,...i->...", z, z))
        with np.errstate(divide="ignore"):
            outside = -np.log(np.where(r > 0, r, 1.0))
        inside = self.F - 0.5 * self.potential.value(z)
        return np.where(r <= self.R, inside, outside)

    def integrate(self, fn, center=(0.0, 0.0), radius=None, n_r=96, n_theta=128):
        """``int fn dmu_V`` over a disk (default: the support) by polar Gauss rules."""
        if radius is None:
            center, radius = (0.0, 0.0), self.R
        x, w = np.polynomial.legendre.leggauss(n_r)
        r = 0.5 * radius * (x + 1)
        wr = 0.5 * radius * w
        th = 2 * np.pi * np.arange(n_theta) / n_theta
        pts = np.stack([center[0] + r[:, None] * np.cos(th)[None, :],
                        center[1] + r[:, None] * np.sin(th)[None, :]], axis=-1)
        vals = np.asarray(fn(pts)) * self.density(pts)
        return float(np.sum(vals * (wr * r)[:, None]) * 2 * np.pi / n_theta)

    def potential_pairing(self):
        """``(V, mu_V)``."""
        f = lambda r: float(self.potential.value((r, 0.0))) * float(self._lap_r(r)) * r / 2
        return integrate.quad(f, 0.0, self.R, epsabs=1e-13)[0]

    def energy(self):
        """``I_V(mu_V) = F + (V, mu_V)/2``."""
        return self.F + 0.5 * self.potential_pairing()

    def to_grid_measure(self, grid, supersample=8):
        return measure_from_density(grid, self.density, supersample)


def _radial_mass(coeffs, r):
    r2 = np.asarray(r, dtype=float) ** 2
    return sum(k * c * r2**k for k, c in enumerate(coeffs, start=1))


def solve_equilibrium_radial(p: Potential, r_max=1e3):
    """Support radius by bisection on ``(1/2) int_0^R Lap V r dr = 1`` and the constant
    ``F = U^mu(0) + V(0)/2`` by radial quadrature."""
    if not p.is_radial:
        raise ValueError("solve_equilibrium_radial needs a radial potential without charges, bumps or walls")
    lap = lambda r: float(p.laplacian((r, 0.0)))
    mass = lambda R: 0.5 * integrate.quad(lambda r: lap(r) * r, 0.0, R, epsabs=1e-14)[0]
    if mass(r_max) < 1:
        raise ValueError("normalisation unreachable within the search bracket")
    R = optimize.bisect(lambda R: mass(R) - 1.0, 0.0, r_max, xtol=1e-13, maxiter=500)
    # U^mu(0) = int log(1/|w|) dmu = (1/2) int_0^R log(1/r) Lap V(r) r dr
    u0 = 0.5 * integrate.quad(lambda r: -np.log(r) * lap(r) * r, 0.0, R, epsabs=1e-14)[0]
    F = u0 + 0.5 * float(p.value((0.0, 0.0)))
    return RadialEquilibrium(p, float(R), float(F))


# ---------------------------------------------------------------------------
# obstacle problem
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _psor(u, psi, omega, tol, max_iter):
    """Red-black projected SOR for ``u = min(psi, neighbour average)``; the outer
    ring of ``u`` is Dirichlet data and is never touched."""
    n = u.shape[0]
    m = u.shape[1]
    delta = np.inf
    for it in range(max_iter):
        delta = 0.0
        for color in range(2):
            for i in range(1, n - 1):
                j0 = 1 + ((i + 1 + color) % 2)
                for j in range(j0, m - 1, 2):
                    old = u[i, j]
                    avg = 0.25 * (u[i + 1, j] + u[i - 1, j] + u[i, j + 1] + u[i, j - 1])
                    new = old + omega * (avg - old)
                    if new > psi[i, j]:
                        new = psi[i, j]
                    d = abs(new - old)
                    if d > delta:
                        delta = d
                    u[i, j] = new
        if delta < tol:
            return it + 1, delta
    return max_iter, delta


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    u: GridField
    measure: GridMeasure
    support_mask: np.ndarray
    F: float
    residuals: dict = field(default_factory=dict)
    potential: Potential | None = None

    @property
    def grid(self):
        return self.u.grid

    def support_radius(self, center=(0.0, 0.0)):
        """Radius of the disk with the same area as the coincidence set."""
        area = self.support_mask.sum() * self.grid.h**2
        return float(np.sqrt(area / np.pi))


def _ring(a):
    mask = np.zeros(a.shape, dtype=bool)
    mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = True
    return mask


def solve_obstacle(p: Potential, grid: GridSpec, tol=1e-12, max_iter=200_000,
                   mass_tol=1e-9, omega=None, max_outer=60, bc_tol=1e-8, max_bc=60):
    """Grid solution of the obstacle problem for ``V/2`` with far field ``F - U^mu``.

    The outer ring carries Dirichlet data ``F - U^mu``.  ``F`` is adjusted by a
    secant/bisection iteration until the measure ``max(Lap_h u, 0)/(2 pi)`` has
    unit mass; ``U^mu`` starts as ``log(1/|z - c|)`` and is refreshed from the
    current measure until it changes by less than ``bc_tol``.  Each pass shrinks
    the change about fourfold on a box twice the droplet size; the mass
    tolerance sets a floor near ``mass_tol``, so ``bc_tol`` is raised to at
    least ``10 * mass_tol``.
    """
    bc_tol = max(bc_tol, 10 * mass_tol)
    z = grid.points()
    h = grid.h
    with np.errstate(invalid="ignore"):
        psi = 0.5 * np.asarray(p.value(z), dtype=float)
    d = z - np.asarray(grid.center)
    r2 = np.einsum("...i,...i->...", d, d)
    logr = 0.5 * np.log(np.where(r2 > 0, r2, h * h))
    ring = _ring(psi)
    omega = 2.0 / (1.0 + np.sin(np.pi / grid.n)) if omega is None else float(omega)
    finite = np.isfinite(psi) & (r2 > 0)
    c0 = float(np.min(psi[finite] - logr[finite]))
    u = np.minimum(psi, logr + c0)
    far = logr[ring].copy()
    sweeps = 0

    def mass_at(c):
        nonlocal u, sweeps
        u[ring] = far + c
        u = np.minimum(u, psi)  # keep the iterate feasible after a boundary change
        u[ring] = far + c
        it, delta = _psor(u, psi, omega, tol, max_iter)
        sweeps += it
        if it >= max_iter:
            raise NonConvergenceError(
                f"PSOR did not reach tol={tol} within {max_iter} sweeps",
                {"last_change": float(delta), "sweeps": sweeps, "c": c})
        lap = discrete_laplacian(u, h)
        return float(np.sum(np.maximum(lap[1:-1, 1:-1], 0.0)) * h * h / (2 * np.pi)) - 1.0

    def normalise(c_a, step):
        # secant with bisection safeguard
        g_a = mass_at(c_a)
        if abs(g_a) <= mass_tol:
            return c_a, g_a
        c_b = c_a + (step if g_a < 0 else -step)
        g_b = mass_at(c_b)
        bracket = None
        for _ in range(max_outer):
            if g_a * g_b < 0:
                bracket = (c_a, g_a, c_b, g_b) if c_a < c_b else (c_b, g_b, c_a, g_a)
            if abs(g_b) <= mass_tol:
                return c_b, g_b
            if g_b == g_a:
                c_new = c_b + (0.1 if g_b < 0 else -0.1)
            else:
                c_new = c_b - g_b * (c_b - c_a) / (g_b - g_a)
            if bracket is not None and not (bracket[0] < c_new < bracket[2]):
                c_new = 0.5 * (bracket[0] + bracket[2])
            c_a, g_a = c_b, g_b
            c_b, g_b = c_new, mass_at(c_new)
        raise NonConvergenceError("far-field constant did not normalise the mass",
                                  {"mass_error": g_b, "c": c_b, "sweeps": sweeps})

    near_ring = np.zeros(u.shape, dtype=bool)
    near_ring[:2, :] = near_ring[-2:, :] = near_ring[:, :2] = near_ring[:, -2:] = True
    c_b, step = c0, 0.05
    for bc_iter in range(1, max_bc + 1):
        c_b, g_b = normalise(c_b, step)
        if np.any((psi - u <= 10 * tol) & near_ring & ~ring):
            raise BoxTooSmallError("coincidence set touches the outer ring of the grid; enlarge the box")
        dens = np.zeros_like(u)
        dens[1:-1, 1:-1] = np.maximum(discrete_laplacian(u, h)[1:-1, 1:-1], 0.0) / (2 * np.pi)
        new_far = -log_potential_of_measure(GridMeasure(grid, dens)).values[ring]
        bc_change = float(np.max(np.abs(new_far - far)))
        if bc_change <= bc_tol:
            break
        far = new_far
        step = max(10 * mass_tol, min(0.05, bc_change))
    else:
        raise NonConvergenceError("boundary data did not settle",
                                  {"bc_change": bc_change, "sweeps": sweeps, "mass_error": g_b})
    F = c_b

    lap = discrete_laplacian(u, h)
    dens = np.zeros_like(u)
    dens[1:-1, 1:-1] = np.maximum(lap[1:-1, 1:-1], 0.0) / (2 * np.pi)
    slack = psi - u
    mask = slack <= 10 * tol
    mask[ring] = False
    avg_gap = np.zeros_like(u)
    avg_gap[1:-1, 1:-1] = 0.25 * h * h * lap[1:-1, 1:-1]
    comp = np.minimum(np.where(np.isfinite(slack), slack, np.inf), avg_gap)
    comp[ring] = 0.0
    residuals = {
        "complementarity": float(np.max(np.abs(comp))),
        "min_slack": float(np.min(slack[np.isfinite(slack)])),
        "min_laplacian": float(np.min(lap[1:-1, 1:-1])),
        "clipped_mass": float(-np.sum(np.minimum(lap[1:-1, 1:-1], 0.0)) * h * h / (2 * np.pi)),
        "mass_error": float(g_b),
        "sweeps": int(sweeps),
        "omega": omega,
        "bc_iterations": bc_iter,
        "bc_change": bc_change,
    }
    measure = GridMeasure(grid, dens)
    return EquilibriumResult(GridField(grid, u.copy()), measure, mask, float(F), residuals, p)


# ---------------------------------------------------------------------------
# energies and residuals
# ---------------------------------------------------------------------------

def energy_functional(m: GridMeasure, p: Potential, return_parts=False):
    """``I_V(m) = D(m, m) + (V, m)`` by grid quadrature."""
    z = m.grid.points()
    with np.errstate(invalid="ignore"):
        V = np.asarray(p.value(z), dtype=float)
    charged = m.cell_mass > 0
    if np.any(~np.isfinite(V[charged])):
        raise ValueError("measure charges cells where the potential is infinite")
    pairing = float(np.sum(V[charged] * m.cell_mass[charged]))
    U = log_potential_of_measure(m).values
    D = float(np.sum(U * m.cell_mass))
    if return_parts:
        return D + pairing, D, pairing
    return D + pairing


@dataclass(frozen=True)
class ELReport:
    on_support_max: float
    off_support_min: float
    F: float


def euler_lagrange_residual(eq: EquilibriumResult, p: Potential, interior_margin=1):
    """``max |U + V/2 - F|`` on the support and ``min (U + V/2 - F)`` off it.

    ``interior_margin`` drops support cells within that many cells of the free
    boundary from the first statistic.
    """
    grid = eq.grid
    U = log_potential_of_measure(eq.measure).values
    with np.errstate(invalid="ignore"):
        V = np.asarray(p.value(grid.points()), dtype=float)
    phi = U + 0.5 * V - eq.F
    mask = eq.support_mask.copy()
    inner = mask.copy()
    for _ in range(interior_margin):
        inner[1:-1, 1:-1] &= (mask[2:, 1:-1] & mask[:-2, 1:-1] & mask[1:-1, 2:] & mask[1:-1, :-2])
        mask = inner.copy()
    off = ~eq.support_mask & np.isfinite(phi)
    on = float(np.max(np.abs(phi[inner]))) if inner.any() else 0.0
    return ELReport(on, float(np.min(phi[off])) if off.any() else np.inf, eq.F)


# ---------------------------------------------------------------------------
# closed-form perturbation and restriction
# ---------------------------------------------------------------------------

def _cells(mask, grid):
    idx = np.argwhere(mask)
    pts = grid.points()[mask]
    return [(int(i), int(j), float(x), float(y)) for (i, j), (x, y) in zip(idx, pts)]


def perturb_equilibrium(eq: EquilibriumResult, f: TestFunction, potential=None):
    """``mu_{V - f} = mu_V - Lap f / (4 pi)`` on the grid.

    ``Lap f`` is the five-point Laplacian of ``f`` at cell centres, the same
    operator that defines ``mu_V = Lap_h u / (2 pi)``; its cell sum vanishes
    exactly, so the perturbed measure keeps the mass of ``mu_V``.  Requires
    ``supp Lap f`` inside the support mask and ``Lap f <= Lap V`` there.
    """
    grid = eq.grid
    z = grid.points()
    lap_f = grid_laplacian_of(f, grid)
    outside = (lap_f != 0) & ~eq.support_mask
    if np.any(outside):
        raise PreconditionError("supp Lap f leaves the support of mu_V", _cells(outside, grid))
    p = potential if potential is not None else eq.potential
    if p is not None:
        lap_v = np.asarray(p.laplacian(z), dtype=float)
        bad = (lap_f > lap_v) & eq.support_mask
    else:
        bad = (eq.measure.density - lap_f / (4 * np.pi) < 0) & eq.support_mask
    if np.any(bad):
        raise PreconditionError("Lap f exceeds Lap V on the support", _cells(bad, grid))
    dens = eq.measure.density - lap_f / (4 * np.pi)
    return GridMeasure(grid, np.maximum(dens, 0.0))


def grid_laplacian_of(f, grid):
    """Five-point Laplacian of ``f`` sampled at the cell centres of ``grid``.

    ``f`` must vanish on the outer ring so that the stencil never needs
    values outside the box.
    """
    vals = np.asarray(f(grid.points()), dtype=float)
    ring = _ring(vals)
    if np.any(vals[ring] != 0):
        raise PreconditionError("test function does not vanish on the grid boundary")
    return discrete_laplacian(vals, grid.h)


def dirichlet_pairings(f: TestFunction, grid: GridSpec):
    """``(f, -Lap f)`` and ``||grad f||_2^2`` by the same grid quadrature."""
    z = grid.points()
    h2 = grid.h**2
    direct = float(-np.sum(f(z) * f.laplacian(z)) * h2)
    g = f.gradient(z)
    return direct, float(np.sum(g * g) * h2)


def perturbation_energy_identity(eq: EquilibriumResult, p: Potential, f: TestFunction):
    """Both sides of ``I_{V-f}(mu_{V-f}) = I_V(mu_V) - (f, mu_V) - (f, -Lap f)/(8 pi)``."""
    perturbed = perturb_equilibrium(eq, f, p)
    lhs = energy_functional(perturbed, p.minus(f))
    grid = eq.grid
    f_dot_mu = eq.measure.integrate(f(grid.points()))
    f_lap, _ = dirichlet_pairings(f, grid)
    rhs = energy_functional(eq.measure, p) - f_dot_mu - f_lap / (8 * np.pi)
    return lhs, rhs


def restriction_potential(eq: EquilibriumResult, p: Potential, B: Disk):
    """``W = (V + 2 int_{S_V \\ B} log(1/|z-w|) dmu_V(w)) / mu_V(B)``, hard-walled to ``B``.

    The outer charge of ``mu_V`` is represented by point charges at the centres
    of the grid cells outside ``B``.
    """
    if not isinstance(B, Disk):
        B = Disk(*B)
    grid = eq.grid
    z = grid.points()
    in_b = B.contains(z)
    escaped = in_b & ~eq.support_mask
    if np.any(escaped):
        raise PreconditionError("restriction disk is not contained in the support", _cells(escaped, grid))
    cm = eq.measure.cell_mass
    mass_b = float(cm[in_b].sum())
    if not mass_b > 0:
        raise PreconditionError("mu_V(B) vanishes")
    outer = (~in_b) & (cm > 0)
    W = add_external_charges(p, (z[outer], cm[outer]), scale=1.0)
    W = restrict_hard_wall(W.scaled(1.0 / mass_b), B)
    return W, mass_b


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def write_equilibrium(eq: EquilibriumResult, prefix):
    """Write ``<prefix>.json`` (header) and ``<prefix>.bin`` (little-endian float64
    blocks ``u``, ``density``, ``support`` in that order, each ``n*n`` row-major
    with the first index along x)."""
    prefix = Path(prefix)
    n = eq.grid.n
    blocks = [eq.u.values, eq.measure.density, eq.support_mask.astype(float)]
    with open(prefix.with_suffix(".bin"), "wb") as fh:
        for b in blocks:
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
    header = {
        "format": "coulombgas-equilibrium/1",
        "grid": eq.grid.to_dict(),
        "F": eq.F,
        "mass": eq.measure.mass,
        "support_radius_equal_area": eq.support_radius(),
        "residuals": eq.residuals,
        "binary": {"file": prefix.with_suffix(".bin").name, "dtype": "<f8", "order": "row-major",
                   "shape": [n, n], "blocks": ["u", "density", "support"],
                   "block_bytes": 8 * n * n},
    }
    if eq.potential is not None and not eq.potential.bumps and len(eq.potential.walls) <= 1 \
            and eq.potential.charge_q.size <= 64:
        header["potential"] = eq.potential.to_config()
    with open(prefix.with_suffix(".json"), "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
    return prefix.with_suffix(".json"), prefix.with_suffix(".bin")


def read_equilibrium(prefix, potential=None):
    prefix = Path(prefix)
    with open(prefix.with_suffix(".json")) as fh:
        header = json.load(fh)
    grid = GridSpec.from_dict(header["grid"])
    n = grid.n
    raw = np.fromfile(prefix.with_suffix(".bin"), dtype="<f8")
    if raw.size != 3 * n * n:
        raise ValueError("equilibrium binary block has the wrong size")
    u, dens, mask = raw.reshape(3, n, n)
    return EquilibriumResult(GridField(grid, u.copy()), GridMeasure(grid, dens.copy()),
                             mask.astype(bool), header["F"], header["residuals"], potential)
