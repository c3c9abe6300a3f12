"""Cell-centred square grids, grid measures and their logarithmic potentials."""

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve


@dataclass(frozen=True)
class GridSpec:
    """``n x n`` cells covering the box ``center + [-L, L]^2``; spacing ``h = 2L/n``."""

    center: tuple
    half_width: float
    n: int

    def __post_init__(self):
        if self.n < 16:
            raise ValueError(f"grid needs at least 16 cells per side, got n={self.n}")
        if not self.half_width > 0:
            raise ValueError("grid half width must be positive")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "half_width", float(self.half_width))
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self):
        return 2.0 * self.half_width / self.n

    @property
    def axis(self):
        """Cell-centre coordinates along one side, offset from the grid centre."""
        return -self.half_width + (np.arange(self.n) + 0.5) * self.h

    def points(self):
        """``(n, n, 2)`` array of cell centres; first index is x, second is y."""
        a = self.axis
        x = a[:, None] + self.center[0]
        y = a[None, :] + self.center[1]
        return np.stack(np.broadcast_arrays(x, y), axis=-1)

    def refined(self, factor=2):
        return GridSpec(self.center, self.half_width, self.n * factor)

    def to_dict(self):
        return {"center": list(self.center), "half_width": self.half_width, "n": self.n}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["center"]), d["half_width"], d["n"])


@dataclass(frozen=True, eq=False)
class GridField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.n, self.grid.n):
            raise ValueError("field shape does not match grid")


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Piecewise-constant density on grid cells."""

    grid: GridSpec
    density: np.ndarray

    def __post_init__(self):
        if self.density.shape != (self.grid.n, self.grid.n):
            raise ValueError("density shape does not match grid")
        if np.any(self.density < 0):
            raise ValueError("grid measure density must be nonnegative")

    @property
    def cell_mass(self):
        return self.density * self.grid.h**2

    @property
    def mass(self):
        return float(self.cell_mass.sum())

    def integrate(self, values):
        """``sum values * density * h^2`` with cell-centre values."""
        return float(np.sum(np.asarray(values) * self.cell_mass))

    def normalized(self):
        return GridMeasure(self.grid, self.density / self.mass)


def _square_log_antiderivative(x, y):
    """G with d^2 G / dx dy = log(x^2 + y^2)."""
    r2 = x * x + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(r2 > 0, x * y * np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
        t2 = np.where(x != 0, x * x * np.arctan(y / np.where(x != 0, x, 1.0)), 0.0)
        t3 = np.where(y != 0, y * y * np.arctan(x / np.where(y != 0, y, 1.0)), 0.0)
    return t1 - 3 * x * y + t2 + t3


def cell_log_average(dx, dy, h):
    """Exact average of ``log(1/|w|)`` over the square of side ``h`` centred at ``(dx, dy)``."""
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    a1, a2 = dx - h / 2, dx + h / 2
    b1, b2 = dy - h / 2, dy + h / 2
    G = _square_log_antiderivative
    integral = G(a2, b2) - G(a1, b2) - G(a2, b1) + G(a1, b1)
    return -0.5 * integral / (h * h)


def _subcell_log_average(dx, dy, h):
    """Four-point sub-cell midpoint rule for ``log(1/|w|)`` over a cell."""
    q = h / 4
    total = 0.0
    for sx in (-q, q):
        for sy in (-q, q):
            total = total - 0.5 * np.log((dx + sx) ** 2 + (dy + sy) ** 2)
    return total / 4


def cell_kernel(dx, dy, h):
    """Cell-average of the log kernel: exact on the source cell and its 8 neighbours,
    four-point sub-cell rule elsewhere."""
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    near = (np.abs(dx) < 1.5 * h) & (np.abs(dy) < 1.5 * h)
    out = np.empty(np.broadcast(dx, dy).shape)
    dxb, dyb = np.broadcast_arrays(dx, dy)
    out[near] = cell_log_average(dxb[near], dyb[near], h)
    with np.errstate(divide="ignore"):
        out[~near] = _subcell_log_average(dxb[~near], dyb[~near], h)
    return out


def log_potential_of_measure(m: GridMeasure, eval_grid: GridSpec | None = None):
    """``U^m(z) = int log(1/|z - w|) m(dw)`` evaluated at cell centres of ``eval_grid``.

    When ``eval_grid`` shares spacing and cell alignment with ``m.grid`` the
    lattice sum is a discrete convolution and is done by FFT; otherwise the
    cell sum is evaluated directly.
    """
    g = m.grid
    eval_grid = g if eval_grid is None else eval_grid
    h = g.h
    if np.isclose(eval_grid.h, h, rtol=0, atol=1e-14 * h):
        off = (np.asarray(eval_grid.center) - np.asarray(g.center)
               - (eval_grid.half_width - g.half_width))
        shift = off / h
        if np.allclose(shift, np.round(shift), atol=1e-9):
            return GridField(eval_grid, _aligned_potential(m, eval_grid, np.round(shift).astype(int)))
    return GridField(eval_grid, log_potential_at_points(m, eval_grid.points()))


def _aligned_potential(m, eval_grid, shift):
    g = m.grid
    n_src, n_ev = g.n, eval_grid.n
    h = g.h
    # eval cell (i, j) sits at source index (i + shift) ; offsets span both grids
    lo = np.array([0 + shift[0] - (n_src - 1), 0 + shift[1] - (n_src - 1)])
    kx = (np.arange(n_ev + n_src - 1) + lo[0]) * h
    ky = (np.arange(n_ev + n_src - 1) + lo[1]) * h
    K = cell_kernel(kx[:, None], ky[None, :], h)
    full = fftconvolve(m.cell_mass, K, mode="full")
    # output index (i, j) of the eval grid picks full[i + n_src - 1, j + n_src - 1]
    return full[n_src - 1:n_src - 1 + n_ev, n_src - 1:n_src - 1 + n_ev]


def log_potential_at_points(m: GridMeasure, pts, chunk=1 << 22):
    """Direct cell sum of ``U^m`` at arbitrary points ``pts`` (shape ``(..., 2)``)."""
    pts = np.asarray(pts, dtype=float)
    flat = pts.reshape(-1, 2)
    mask = m.cell_mass > 0
    src = m.grid.points()[mask]
    w = m.cell_mass[mask]
    h = m.grid.h
    out = np.empty(flat.shape[0])
    step = max(1, chunk // max(1, w.size))
    for i in range(0, flat.shape[0], step):
        d = flat[i:i + step, None, :] - src[None, :, :]
        out[i:i + step] = cell_kernel(d[..., 0], d[..., 1], h) @ w
    return out.reshape(pts.shape[:-1])


def measure_from_density(grid, density_fn, supersample=4, normalize=False):
    """Grid measure whose cell density is the sub-sampled average of ``density_fn``.

    Sub-sampling smooths jumps (e.g. at a support edge) to O(h^2/supersample)
    area error instead of a staircase.
    """
    h = grid.h
    offs = (np.arange(supersample) + 0.5) / supersample - 0.5
    pts = grid.points()
    acc = np.zeros((grid.n, grid.n))
    for ox in offs:
        for oy in offs:
            acc += density_fn(pts + np.array([ox * h, oy * h]))
    m = GridMeasure(grid, np.maximum(acc / supersample**2, 0.0))
    return m.normalized() if normalize else m


def disk_measure(grid, center=(0.0, 0.0), radius=1.0, supersample=8):
    """Uniform probability measure on a disk, rasterised onto ``grid``."""
    c = np.asarray(center, dtype=float)
    dens = 1.0 / (np.pi * radius**2)

    def fn(z):
        d = z - c
        return np.where(np.einsum("...i,...i->...", d, d) <= radius**2, dens, 0.0)

    return measure_from_density(grid, fn, supersample)


def point_mass_measure(grid, location=(0.0, 0.0), mass=1.0):
    """All mass in the cell containing ``location``."""
    dens = np.zeros((grid.n, grid.n))
    a = grid.axis
    i = int(np.argmin(np.abs(a + grid.center[0] - location[0])))
    j = int(np.argmin(np.abs(a + grid.center[1] - location[1])))
    dens[i, j] = mass / grid.h**2
    return GridMeasure(grid, dens)


def discrete_laplacian(values, h):
    """Five-point Laplacian on interior cells; the outer ring is set to zero."""
    lap = np.zeros_like(values)
    lap[1:-1, 1:-1] = (values[2:, 1:-1] + values[:-2, 1:-1] + values[1:-1, 2:]
                       + values[1:-1, :-2] - 4 * values[1:-1, 1:-1]) / (h * h)
    return lap
