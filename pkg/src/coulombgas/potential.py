"""Confining potentials built from a small closed set of compositions.

Every :class:`Potential` is kept in a canonical additive form

    V(z) = sum_k c_k |z|^(2k) + 2 sum_i q_i log(1/|z - p_i|) + sum_j a_j f_j(z),

restricted to the intersection of zero or more closed disks (``+inf``
outside).  The ``c_k`` are radial coefficients (``k >= 1``), the ``(p_i,
q_i)`` are point charges and the ``f_j`` are polynomial bumps.  Because each
piece has a closed-form Laplacian, nothing is differentiated numerically.
"""

from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .kernel import CoincidentPointsError
from .testfunctions import TestFunction



@numba.njit(cache=True)
def _charge_value_kernel(pts, xy, q):
    out = np.empty(pts.shape[0])
    for i in range(pts.shape[0]):
        acc = 0.0
        for k in range(q.shape[0]):
            dx = pts[i, 0] - xy[k, 0]
            dy = pts[i, 1] - xy[k, 1]
            acc -= q[k] * np.log(dx * dx + dy * dy)
        out[i] = acc
    return out


@numba.njit(cache=True)
def _charge_gradient_kernel(pts, xy, q):
    out = np.zeros((pts.shape[0], 2))
    hit = False
    for i in range(pts.shape[0]):
        for k in range(q.shape[0]):
            dx = pts[i, 0] - xy[k, 0]
            dy = pts[i, 1] - xy[k, 1]
            r2 = dx * dx + dy * dy
            if r2 == 0.0:
                hit = True
                continue
            out[i, 0] -= 2.0 * q[k] * dx / r2
            out[i, 1] -= 2.0 * q[k] * dy / r2
    return out, hit


@dataclass(frozen=True)
class Disk:
    """Closed disk ``B(center, radius)``."""

    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disk radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, z, closed=True):
        z = np.asarray(z, dtype=float)
        d = z - np.asarray(self.center)
        r2 = np.einsum("...i,...i->...", d, d)
        return r2 <= self.radius**2 if closed else r2 < self.radius**2


@dataclass(frozen=True)
class DiscreteCharge:
    location: tuple
    weight: float

    def __post_init__(self):
        if not self.weight >= 0:
            raise ValueError(f"charge weight must be nonnegative, got {self.weight}")
        object.__setattr__(self, "location", (float(self.location[0]), float(self.location[1])))


@dataclass(frozen=True, eq=False)
class Potential:
    kind: str
    coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    charge_xy: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    charge_q: np.ndarray = field(default_factory=lambda: np.zeros(0))
    walls: tuple = ()
    bumps: tuple = ()  # (weight, TestFunction) pairs
    holes: tuple = ()  # closed disks where V = +inf
    growth_margin: float = 1.0
    base: "Potential | None" = None

    # ---- metadata -------------------------------------------------------
    @property
    def is_radial(self):
        """True when V depends on |z| only and is finite everywhere."""
        return self.charge_q.size == 0 and not self.bumps and not self.walls and not self.holes

    @property
    def finite_region(self):
        """``None`` for the whole plane, a :class:`Disk`, or a tuple of disks (intersection)."""
        if not self.walls:
            return None
        if len(self.walls) == 1:
            return self.walls[0]
        return self.walls

    def inside(self, z):
        z = np.asarray(z, dtype=float)
        ok = np.ones(z.shape[:-1], dtype=bool)
        for disk in self.walls:
            ok &= disk.contains(z)
        for disk in self.holes:
            ok &= ~disk.contains(z)
        return ok

    # ---- evaluation -----------------------------------------------------
    def _radial_parts(self, z):
        r2 = np.einsum("...i,...i->...", z, z)
        val = np.zeros_like(r2)
        dval = np.zeros_like(r2)  # d/d(r^2) of the radial polynomial
        lap = np.zeros_like(r2)
        dlap = np.zeros_like(r2)  # d/d(r^2) of the Laplacian
        for i, c in enumerate(self.coeffs):
            k = i + 1
            if c == 0:
                continue
            val += c * r2**k
            dval += c * k * r2 ** (k - 1)
            lap += c * 4 * k * k * r2 ** (k - 1)
            if k >= 2:
                dlap += c * 4 * k * k * (k - 1) * r2 ** (k - 2)
        return r2, val, dval, lap, dlap

    def _charge_value(self, z):
        flat = np.ascontiguousarray(z.reshape(-1, 2))
        return _charge_value_kernel(flat, self.charge_xy, self.charge_q).reshape(z.shape[:-1])

    def _charge_gradient(self, z):
        flat = np.ascontiguousarray(z.reshape(-1, 2))
        g, hit = _charge_gradient_kernel(flat, self.charge_xy, self.charge_q)
        if hit:
            raise CoincidentPointsError("potential gradient evaluated at a charge location")
        return g.reshape(z.shape)

    def value(self, z):
        z = np.asarray(z, dtype=float)
        _, val, _, _, _ = self._radial_parts(z)
        inside = self.inside(z) if self.walls or self.holes else None
        if self.charge_q.size:
            if inside is None:
                val = val + self._charge_value(z)
            else:
                val = np.array(val, dtype=float)
                val[inside] += self._charge_value(z[inside])
        for a, f in self.bumps:
            val = val + a * f(z)
        if inside is not None:
            val = np.where(inside, val, np.inf)
        return float(val) if np.ndim(val) == 0 else val

    def __call__(self, z):
        return self.value(z)

    def gradient(self, z):
        """Real gradient ``(dV/dx, dV/dy)``; NaN outside the finite region."""
        z = np.asarray(z, dtype=float)
        _, _, dval, _, _ = self._radial_parts(z)
        g = 2.0 * dval[..., None] * z
        if self.charge_q.size:
            g = g + self._charge_gradient(z)
        for a, f in self.bumps:
            g = g + a * f.gradient(z)
        if self.walls or self.holes:
            g = np.where(self.inside(z)[..., None], g, np.nan)
        return g

    def laplacian(self, z):
        """Laplacian of V; charges contribute nothing away from their poles."""
        z = np.asarray(z, dtype=float)
        _, _, _, lap, _ = self._radial_parts(z)
        for a, f in self.bumps:
            lap = lap + a * f.laplacian(z)
        if self.walls or self.holes:
            lap = np.where(self.inside(z), lap, np.nan)
        return float(lap) if np.ndim(lap) == 0 else lap

    def laplacian_gradient(self, z):
        z = np.asarray(z, dtype=float)
        _, _, _, _, dlap = self._radial_parts(z)
        g = 2.0 * dlap[..., None] * z
        for a, f in self.bumps:
            g = g + a * f.laplacian_gradient(z)
        if self.walls or self.holes:
            g = np.where(self.inside(z)[..., None], g, np.nan)
        return g

    def d(self, z):
        """Wirtinger derivative ``dV = (V_x - i V_y)/2``."""
        g = self.gradient(z)
        return 0.5 * (g[..., 0] - 1j * g[..., 1])

    # ---- compositions ---------------------------------------------------
    def scaled(self, factor):
        """``factor * V``."""
        factor = float(factor)
        if not factor > 0:
            raise ValueError("potential scale factor must be positive")
        eps = factor * (2 + self.growth_margin) - 2 if np.isfinite(self.growth_margin) else np.inf
        return Potential("scaled", self.coeffs * factor, self.charge_xy, self.charge_q * factor,
                         self.walls, tuple((a * factor, f) for a, f in self.bumps), self.holes,
                         eps, self)

    def minus(self, f: TestFunction, weight=1.0):
        """``V - weight * f`` for a bump ``f``."""
        return Potential("perturbed", self.coeffs, self.charge_xy, self.charge_q, self.walls,
                         self.bumps + ((-float(weight), f),), self.holes, self.growth_margin, self)

    def compiled(self):
        """Flat arrays ``(coeffs, charge_xy, charge_q, walls, holes)`` for compiled kernels."""
        if self.bumps:
            raise ValueError("potentials with bump terms cannot be compiled for the sampler")
        disks = lambda ds: np.array([[d.center[0], d.center[1], d.radius] for d in ds],
                                    dtype=float).reshape(-1, 3)
        return (np.ascontiguousarray(self.coeffs, dtype=float),
                np.ascontiguousarray(self.charge_xy, dtype=float).reshape(-1, 2),
                np.ascontiguousarray(self.charge_q, dtype=float),
                disks(self.walls), disks(self.holes))

    # ---- config ---------------------------------------------------------
    def to_config(self):
        """Declarative dict (``kind``, ``coefficients``, ``charges``, ``wall``)."""
        if self.bumps or self.holes:
            raise ValueError("bump-perturbed or holed potentials have no declarative form")
        if len(self.walls) > 1:
            raise ValueError("only a single hard wall can be serialized")
        cfg = {"kind": "radial", "coefficients": [float(c) for c in self.coeffs]}
        if self.charge_q.size:
            cfg["charges"] = [{"x": float(p[0]), "y": float(p[1]), "weight": float(q)}
                              for p, q in zip(self.charge_xy, self.charge_q)]
        if self.walls:
            w = self.walls[0]
            cfg["wall"] = {"center": list(w.center), "radius": w.radius}
        return cfg

    @classmethod
    def from_config(cls, cfg):
        return potential_from_config(cfg)


_CONFIG_KEYS = {"kind", "coefficients", "charges", "charge_scale", "wall", "growth_margin"}


def potential_from_config(cfg):
    """Build a potential from a declarative block; unknown keys are rejected."""
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown potential keys: {sorted(unknown)}")
    kind = cfg.get("kind", "radial")
    if kind == "quadratic":
        if "coefficients" in cfg:
            raise ValueError("quadratic potential takes no coefficients")
        p = make_quadratic()
    elif kind == "radial":
        p = make_radial(cfg.get("coefficients", []))
    else:
        raise ValueError(f"unknown potential kind {kind!r} (expected 'quadratic' or 'radial')")
    if "growth_margin" in cfg:
        p = replace(p, growth_margin=float(cfg["growth_margin"]))
    charges = cfg.get("charges", [])
    if charges:
        parsed = []
        for i, c in enumerate(charges):
            extra = set(c) - {"x", "y", "weight"}
            if extra:
                raise ValueError(f"charges[{i}]: unknown keys {sorted(extra)}")
            parsed.append(DiscreteCharge((c["x"], c["y"]), c.get("weight", 1.0)))
        p = add_external_charges(p, parsed, cfg.get("charge_scale", 1.0))
    if "wall" in cfg:
        w = cfg["wall"]
        extra = set(w) - {"center", "radius"}
        if extra:
            raise ValueError(f"wall: unknown keys {sorted(extra)}")
        p = restrict_hard_wall(p, Disk(tuple(w.get("center", (0.0, 0.0))), w["radius"]))
    return p


def make_quadratic():
    """Ginibre potential ``V(z) = |z|^2``."""
    return Potential("quadratic", np.array([1.0]))


def make_radial(coeffs):
    """``V(z) = sum_k coeffs[k-1] |z|^(2k)`` for ``k = 1, 2, ...``."""
    coeffs = np.asarray(coeffs, dtype=float).ravel()
    if coeffs.size == 0 or np.any(coeffs < 0) or not np.any(coeffs > 0):
        raise ValueError("radial coefficients must be nonnegative with at least one positive entry")
    return Potential("radial", coeffs)


def zero_potential():
    """The zero potential; only useful as a base for charge-only test inputs."""
    return Potential("zero", np.zeros(0), growth_margin=-2.0)


def add_external_charges(base, charges, scale=1.0):
    """Add ``scale * 2 * sum_i w_i log(1/|z - c_i|)`` to ``base``.

    ``charges`` is a sequence of :class:`DiscreteCharge` or an ``(xy, weights)``
    pair of arrays (the latter avoids object overhead for grid-sized inputs).
    """
    if isinstance(charges, tuple) and len(charges) == 2 and isinstance(charges[0], np.ndarray):
        xy = np.asarray(charges[0], dtype=float).reshape(-1, 2)
        w = np.asarray(charges[1], dtype=float).ravel()
        if np.any(w < 0):
            raise ValueError("charge weights must be nonnegative")
    else:
        charges = list(charges)
        xy = np.array([c.location for c in charges], dtype=float).reshape(-1, 2)
        w = np.array([c.weight for c in charges], dtype=float)
    if not np.all(np.isfinite(xy)):
        raise ValueError("charge locations must be finite")
    if w.size == 0:
        return base
    q = float(scale) * w
    margin = base.growth_margin - 2.0 * float(q.sum())
    return Potential("charges", base.coeffs, np.vstack([base.charge_xy, xy]),
                     np.concatenate([base.charge_q, q]), base.walls, base.bumps, base.holes,
                     margin, base)


def restrict_hard_wall(base, disk):
    """Set ``V = +inf`` outside the closed ``disk``."""
    if not isinstance(disk, Disk):
        disk = Disk(*disk)
    return Potential("hard-wall", base.coeffs, base.charge_xy, base.charge_q,
                     base.walls + (disk,), base.bumps, base.holes, np.inf, base)


def exclude_disk(base, disk):
    """Set ``V = +inf`` on the closed ``disk`` (the complement of a hard wall)."""
    if not isinstance(disk, Disk):
        disk = Disk(*disk)
    return Potential("excluded-disk", base.coeffs, base.charge_xy, base.charge_q,
                     base.walls, base.bumps, base.holes + (disk,), base.growth_margin, base)


@dataclass(frozen=True)
class GrowthReport:
    radii: np.ndarray
    margins: np.ndarray
    increasing: bool


def check_growth(p, radii, n_angles=256):
    """Sampled ``min_{|z|=R} V(z) - (2 + eps) log R`` at each radius (advisory only)."""
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 1) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be increasing and greater than 1")
    eps = p.growth_margin if np.isfinite(p.growth_margin) and p.growth_margin > 0 else 1.0
    theta = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
    ring = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    margins = np.array([np.min(p.value(R * ring)) - (2 + eps) * np.log(R) for R in radii])
    ok = all(b == np.inf or b > a for a, b in zip(margins[:-1], margins[1:]))
    return GrowthReport(radii, margins, bool(ok))
