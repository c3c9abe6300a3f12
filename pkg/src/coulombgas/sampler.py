"""Sampling the Coulomb gas: energies, single-site MCMC, exact and null oracles,
and the conditional potential obtained by freezing the particles outside a disk.

A configuration is an ``(N, 2)`` float array.  Energies follow the
ordered-pair convention ``H = sum_{j != k} log(1/|z_j - z_k|) + N_scale sum_j V(z_j)``.
"""

import json
import struct
import warnings
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .equilibrium import EquilibriumResult, RadialEquilibrium
from .kernel import CoincidentPointsError
from .potential import (DiscreteCharge, Disk, Potential, add_external_charges,
                        exclude_disk, restrict_hard_wall)
from .rng import as_generator, stream

ALGORITHMS = ("random-walk", "gradient")


# ---------------------------------------------------------------------------
# energies (numpy reference implementations)
# ---------------------------------------------------------------------------

def _points(c):
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[1] != 2:
        raise ValueError(f"configuration must have shape (N, 2), got {c.shape}")
    return c


def total_energy(c, p: Potential, N_scale):
    """``H`` of the configuration; ``+inf`` for coincident points or points where V is infinite."""
    c = _points(c)
    v = np.asarray(p.value(c), dtype=float)
    if not np.all(np.isfinite(v)):
        return np.inf
    d = c[:, None, :] - c[None, :, :]
    r2 = np.einsum("jki,jki->jk", d, d)
    iu = np.triu_indices(c.shape[0], 1)
    pair = r2[iu]
    if np.any(pair == 0):
        return np.inf
    # ordered pairs: 2 * sum_{j<k} (-1/2) log r2
    return float(-np.sum(np.log(pair)) + N_scale * np.sum(v))


def energy_delta_move(c, j, new_point, p: Potential, N_scale):
    """``H(after) - H(before)`` for moving particle ``j`` to ``new_point`` in O(N)."""
    c = _points(c)
    if not 0 <= j < c.shape[0]:
        raise IndexError(f"particle index {j} out of range")
    new_point = np.asarray(new_point, dtype=float)
    old = c[j]
    if np.array_equal(new_point, old):
        return 0.0
    v_new = float(p.value(new_point))
    if not np.isfinite(v_new):
        return np.inf
    others = np.delete(c, j, axis=0)
    d_new = np.sum((others - new_point) ** 2, axis=1)
    if np.any(d_new == 0):
        return np.inf
    d_old = np.sum((others - old) ** 2, axis=1)
    return float(np.sum(np.log(d_old)) - np.sum(np.log(d_new))
                 + N_scale * (v_new - float(p.value(old))))


def grad_energy(c, p: Potential, N_scale):
    """Real gradient ``dH/dz_j`` for every particle, shape ``(N, 2)``."""
    c = _points(c)
    d = c[:, None, :] - c[None, :, :]
    r2 = np.einsum("jki,jki->jk", d, d)
    np.fill_diagonal(r2, np.inf)
    if np.any(r2 == 0):
        raise CoincidentPointsError("gradient undefined at coincident particles")
    pair = -2.0 * np.sum(d / r2[..., None], axis=1)
    return pair + N_scale * p.gradient(c)


# ---------------------------------------------------------------------------
# compiled chain kernels
# ---------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _pot_value(x, y, coeffs, cxy, cq, walls, holes):
    for w in range(walls.shape[0]):
        dx = x - walls[w, 0]
        dy = y - walls[w, 1]
        if dx * dx + dy * dy > walls[w, 2] * walls[w, 2]:
            return np.inf
    for w in range(holes.shape[0]):
        dx = x - holes[w, 0]
        dy = y - holes[w, 1]
        if dx * dx + dy * dy <= holes[w, 2] * holes[w, 2]:
            return np.inf
    r2 = x * x + y * y
    v = 0.0
    pw = r2
    for k in range(coeffs.shape[0]):
        v += coeffs[k] * pw
        pw *= r2
    for k in range(cq.shape[0]):
        dx = x - cxy[k, 0]
        dy = y - cxy[k, 1]
        v -= cq[k] * np.log(dx * dx + dy * dy)
    return v


@numba.njit(cache=True, nogil=True)
def _pot_grad(x, y, coeffs, cxy, cq):
    r2 = x * x + y * y
    s = 0.0  # d/d(r^2) of the radial polynomial
    pw = 1.0
    for k in range(coeffs.shape[0]):
        s += (k + 1) * coeffs[k] * pw
        pw *= r2
    gx = 2.0 * s * x
    gy = 2.0 * s * y
    for k in range(cq.shape[0]):
        dx = x - cxy[k, 0]
        dy = y - cxy[k, 1]
        d2 = dx * dx + dy * dy
        gx -= 2.0 * cq[k] * dx / d2
        gy -= 2.0 * cq[k] * dy / d2
    return gx, gy


@numba.njit(cache=True, nogil=True)
def metropolis_accept(delta, beta, u):
    """Accept a move with energy change ``delta`` given a uniform draw ``u`` in [0, 1)."""
    if delta <= 0.0:
        return True
    return u < np.exp(-beta * delta)


@numba.njit(cache=True, nogil=True)
def _pair_log_sum(pos, j, x, y):
    """sum_{k != j} log|z_k - (x, y)|^2, and whether any distance vanishes."""
    acc = 0.0
    hit = False
    for k in range(pos.shape[0]):
        if k == j:
            continue
        dx = pos[k, 0] - x
        dy = pos[k, 1] - y
        d2 = dx * dx + dy * dy
        if d2 == 0.0:
            hit = True
        acc += np.log(d2)
    return acc, hit


@numba.njit(cache=True, nogil=True)
def _site_grad(pos, j, x, y, n_scale, coeffs, cxy, cq):
    gx = 0.0
    gy = 0.0
    for k in range(pos.shape[0]):
        if k == j:
            continue
        dx = x - pos[k, 0]
        dy = y - pos[k, 1]
        d2 = dx * dx + dy * dy
        gx -= 2.0 * dx / d2
        gy -= 2.0 * dy / d2
    vx, vy = _pot_grad(x, y, coeffs, cxy, cq)
    return gx + n_scale * vx, gy + n_scale * vy


@numba.njit(cache=True, nogil=True)
def _sweeps(pos, vcache, n_scale, beta, step, uniforms, gradient,
            coeffs, cxy, cq, walls, holes):
    """Systematic-scan single-site Metropolis(-Hastings) sweeps; returns accepted moves.

    ``uniforms[s, j]`` holds three draws for move ``j`` of sweep ``s``: two feed
    a Box-Muller Gaussian step, the third the accept test.
    """
    n = pos.shape[0]
    accepted = 0
    s2 = step * step
    for s in range(uniforms.shape[0]):
        for j in range(n):
            x = pos[j, 0]
            y = pos[j, 1]
            rad = np.sqrt(-2.0 * np.log1p(-uniforms[s, j, 0]))
            nx = rad * np.cos(2.0 * np.pi * uniforms[s, j, 1])
            ny = rad * np.sin(2.0 * np.pi * uniforms[s, j, 1])
            if gradient:
                gx, gy = _site_grad(pos, j, x, y, n_scale, coeffs, cxy, cq)
                mx = x - 0.5 * s2 * beta * gx
                my = y - 0.5 * s2 * beta * gy
                xn = mx + step * nx
                yn = my + step * ny
            else:
                xn = x + step * nx
                yn = y + step * ny
            vn = _pot_value(xn, yn, coeffs, cxy, cq, walls, holes)
            if not np.isfinite(vn):
                continue
            new_sum, hit = _pair_log_sum(pos, j, xn, yn)
            if hit:
                continue
            old_sum, _ = _pair_log_sum(pos, j, x, y)
            delta = old_sum - new_sum + n_scale * (vn - vcache[j])
            if gradient:
                gxn, gyn = _site_grad(pos, j, xn, yn, n_scale, coeffs, cxy, cq)
                rx = xn - 0.5 * s2 * beta * gxn
                ry = yn - 0.5 * s2 * beta * gyn
                log_fwd = -((xn - mx) ** 2 + (yn - my) ** 2) / (2 * s2)
                log_rev = -((x - rx) ** 2 + (y - ry) ** 2) / (2 * s2)
                log_alpha = -beta * delta + log_rev - log_fwd
                ok = log_alpha >= 0.0 or uniforms[s, j, 2] < np.exp(log_alpha)
            else:
                ok = metropolis_accept(delta, beta, uniforms[s, j, 2])
            if ok:
                pos[j, 0] = xn
                pos[j, 1] = yn
                vcache[j] = vn
                accepted += 1
    return accepted


@numba.njit(cache=True, nogil=True)
def _energy(pos, n_scale, coeffs, cxy, cq, walls, holes):
    n = pos.shape[0]
    e = 0.0
    for j in range(n):
        v = _pot_value(pos[j, 0], pos[j, 1], coeffs, cxy, cq, walls, holes)
        if not np.isfinite(v):
            return np.inf
        e += n_scale * v
        for k in range(j + 1, n):
            dx = pos[j, 0] - pos[k, 0]
            dy = pos[j, 1] - pos[k, 1]
            d2 = dx * dx + dy * dy
            if d2 == 0.0:
                return np.inf
            e -= np.log(d2)
    return e


# ---------------------------------------------------------------------------
# chain driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GasParams:
    N: int
    beta: float
    potential: Potential

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if not self.beta > 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class ChainConfig:
    """``steps`` and ``burn_in`` count sweeps (N single-site updates each)."""

    steps: int
    burn_in: int = 0
    thinning: int = 1
    step_size: float | None = None
    seed: int = 0
    algorithm: str = "random-walk"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if not self.steps > self.burn_in >= 0:
            raise ValueError("need steps > burn_in >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be at least 1")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def resolved_step(self, params: GasParams):
        if self.step_size is not None:
            return float(self.step_size)
        return 0.8 / np.sqrt(params.beta * params.N)


@dataclass(eq=False)
class SampleBatch:
    params: GasParams
    chain: ChainConfig
    configs: np.ndarray  # (frames, N, 2)
    energies: np.ndarray
    acceptance_rate: float
    low_acceptance: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def n_frames(self):
        return self.configs.shape[0]


DEFAULT_BLOCK_MOVES = 1 << 18  # single-site moves per random-number block


def run_chain(params: GasParams, chain: ChainConfig, init="equilibrium-iid", equilibrium=None,
              path="chain/0", sink=None):
    """Run one chain and return its thinned frames.

    ``init`` is an ``(N, 2)`` array or ``"equilibrium-iid"`` (needs
    ``equilibrium``).  Random numbers come from ``stream(chain.seed, path)`` in
    fixed-size blocks, so identical inputs give bit-identical output.  If
    ``sink`` is given, each recorded frame is also passed to
    ``sink(config, energy)`` as it is produced.
    """
    N, beta, p = params.N, float(params.beta), params.potential
    compiled = p.compiled()
    if isinstance(init, str):
        if init != "equilibrium-iid":
            raise ValueError(f"unknown init {init!r}")
        if equilibrium is None:
            raise ValueError("init='equilibrium-iid' needs an equilibrium result")
        pos = iid_null_sample(equilibrium, N, stream(chain.seed, f"{path}/init"))
    else:
        pos = np.array(init, dtype=float, copy=True)
    pos = np.ascontiguousarray(_points(pos))
    if pos.shape[0] != N:
        raise ValueError(f"initial configuration has {pos.shape[0]} points, expected {N}")
    e0 = _energy(pos, float(N), *compiled)
    if not np.isfinite(e0):
        raise ValueError("initial configuration has infinite energy")
    vcache = np.array([_pot_value(x, y, *compiled) for x, y in pos])
    step = chain.resolved_step(params)
    rng = stream(chain.seed, path)
    grad = chain.algorithm == "gradient"

    block = max(1, min(chain.thinning, DEFAULT_BLOCK_MOVES // N))
    frames, energies = [], []
    accepted = proposed = 0
    sweep = 0
    while sweep < chain.steps:
        # stop each block at burn-in and thinning boundaries
        nxt = sweep + block
        if sweep < chain.burn_in:
            nxt = min(nxt, chain.burn_in)
        else:
            k = (sweep - chain.burn_in) // chain.thinning + 1
            nxt = min(nxt, chain.burn_in + k * chain.thinning)
        nxt = min(nxt, chain.steps)
        S = nxt - sweep
        # float64 uniforms are drawn one counter step each, so blocking never changes the stream
        uniforms = rng.random((S, N, 3))
        acc = _sweeps(pos, vcache, float(N), beta, step, uniforms, grad, *compiled)
        if sweep >= chain.burn_in:
            accepted += acc
            proposed += S * N
        sweep = nxt
        if sweep > chain.burn_in and (sweep - chain.burn_in) % chain.thinning == 0:
            e = _energy(pos, float(N), *compiled)
            frames.append(pos.copy())
            energies.append(e)
            if sink is not None:
                sink(frames[-1], e)
    rate = accepted / proposed if proposed else 0.0
    low = rate < 0.01
    if low:
        warnings.warn(f"acceptance rate {rate:.4f} below 1% (N={N}, beta={beta}, step={step:.3g})")
    configs = np.array(frames).reshape(-1, N, 2)
    meta = {"step_size": step, "stream_path": path, "seed": int(chain.seed),
            "block_sweeps": block, "proposals": proposed}
    return SampleBatch(params, chain, configs, np.array(energies), float(rate), low, meta)


# ---------------------------------------------------------------------------
# exact and null oracles
# ---------------------------------------------------------------------------

def ginibre_radii_sample(N, rng, size=None):
    """Sorted radii of the beta = 1, V = |z|^2 gas: ``N |z|^2 ~ Gamma(k)``, k = 1..N, independent.

    ``rng`` is a Generator or a seed.  With ``size`` returns ``(size, N)``.
    """
    rng = as_generator(rng, "ginibre")
    shape = (N,) if size is None else (size, N)
    g = rng.standard_gamma(np.arange(1, N + 1, dtype=float), size=shape)
    return np.sort(np.sqrt(g / N), axis=-1)


def iid_null_sample(eq, N, rng, size=None):
    """``N`` independent points from ``mu_V`` (returns ``(N, 2)`` or ``(size, N, 2)``)."""
    rng = as_generator(rng, "null")
    shape = (N,) if size is None else (size, N)
    if isinstance(eq, RadialEquilibrium):
        r = eq.quantile(rng.random(shape))
        th = 2 * np.pi * rng.random(shape)
        return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
    if isinstance(eq, EquilibriumResult):
        grid = eq.grid
        cm = eq.measure.cell_mass.ravel()
        cdf = np.cumsum(cm)
        cdf /= cdf[-1]
        idx = np.minimum(np.searchsorted(cdf, rng.random(shape), side="right"), cm.size - 1)
        pts = grid.points().reshape(-1, 2)[idx]
        jitter = (rng.random(shape + (2,)) - 0.5) * grid.h
        return pts + jitter
    raise TypeError("expected a RadialEquilibrium or EquilibriumResult")


# ---------------------------------------------------------------------------
# conditioning on the particles outside a disk
# ---------------------------------------------------------------------------

def conditional_potential(outside, B: Disk, N, p: Potential):
    """``(M, W)`` with ``W = (N/M)(V - V_o)`` in ``B`` and ``+inf`` outside, where
    ``V_o(w) = -(2/N) sum_k log(1/|w - zhat_k|)`` over the frozen outside particles."""
    if not isinstance(B, Disk):
        B = Disk(*B)
    outside = np.asarray(outside, dtype=float).reshape(-1, 2)
    if outside.size and np.any(B.contains(outside)):
        raise ValueError("conditioning particles must lie strictly outside B")
    M = int(N) - outside.shape[0]
    if M <= 0:
        raise ValueError(f"no particles left inside B (M = {M})")
    charges = [DiscreteCharge(tuple(z), 1.0) for z in outside]
    W = add_external_charges(p, charges, scale=1.0 / N)
    if M != N:
        W = W.scaled(N / M)
    return M, restrict_hard_wall(W, B)


def energy_decomposition_check(c, B: Disk, p: Potential):
    """Both sides of ``H_N(inside o outside) = H_{M,W}(inside) + H_{N-M,U}(outside)``."""
    if not isinstance(B, Disk):
        B = Disk(*B)
    c = _points(c)
    N = c.shape[0]
    inside = B.contains(c)
    if inside.all() or not inside.any():
        raise ValueError("need at least one particle inside and one outside B")
    zin, zout = c[inside], c[~inside]
    M, W = conditional_potential(zout, B, N, p)
    U = exclude_disk(p.scaled(N / (N - M)), B)
    lhs = total_energy(c, p, N)
    rhs = total_energy(zin, W, M) + total_energy(zout, U, N - M)
    return lhs, rhs


def chain_summary(batch: SampleBatch):
    """Plain-dict metadata for a batch (used by the on-disk format)."""
    chain = asdict(batch.chain)
    chain["seed"] = int(chain["seed"])
    return {
        "N": batch.params.N,
        "beta": batch.params.beta,
        "chain": chain,
        "acceptance_rate": batch.acceptance_rate,
        "low_acceptance": batch.low_acceptance,
        **batch.metadata,
    }


# ---------------------------------------------------------------------------
# on-disk batches: <prefix>.json metadata, <prefix>.bin frames + footer
# ---------------------------------------------------------------------------

FOOTER_MAGIC = b"OCPFRAME"
_FOOTER = struct.Struct("<8sQ")


class BatchWriter:
    """Streaming writer: frames are appended as little-endian float64 ``N x 2``
    blocks and the footer (magic + frame count) is rewritten after every frame,
    so an interrupted run leaves a readable file."""

    def __init__(self, prefix, N):
        self.prefix = str(prefix)
        self.N = int(N)
        self.count = 0
        self.energies = []
        self._fh = open(self.prefix + ".bin", "wb")
        self._fh.write(_FOOTER.pack(FOOTER_MAGIC, 0))
        self._fh.flush()

    def append(self, config, energy=np.nan):
        a = np.ascontiguousarray(config, dtype="<f8")
        if a.shape != (self.N, 2):
            raise ValueError(f"frame shape {a.shape} != ({self.N}, 2)")
        self._fh.seek(self.count * self.N * 16)
        self._fh.write(a.tobytes())
        self.count += 1
        self.energies.append(float(energy))
        self._fh.write(_FOOTER.pack(FOOTER_MAGIC, self.count))
        self._fh.flush()

    __call__ = append

    def close(self, metadata=None):
        if self._fh.closed:
            return
        self._fh.close()
        meta = dict(metadata or {})
        meta.update({"N": self.N, "frames": self.count, "energies": self.energies,
                     "format": "float64-le frames of N x 2, footer <8sQ magic+count"})
        with open(self.prefix + ".json", "w") as fh:
            json.dump(_jsonable(meta), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def write_batch(batch: SampleBatch, prefix, extra=None):
    w = BatchWriter(prefix, batch.params.N)
    for c, e in zip(batch.configs, batch.energies):
        w.append(c, e)
    meta = chain_summary(batch)
    meta["potential"] = batch.params.potential.to_config()
    meta.update(extra or {})
    w.close(meta)


def read_frames(path, N):
    """Frames from a ``.bin`` file.  A missing or damaged footer (interrupted
    write) is tolerated: every complete frame present is returned."""
    raw = open(path, "rb").read()
    frame_bytes = int(N) * 16
    count = len(raw) // frame_bytes  # no footer: a frame was written, its footer was not
    if len(raw) >= _FOOTER.size:
        magic, n = _FOOTER.unpack(raw[-_FOOTER.size:])
        if magic == FOOTER_MAGIC:
            count = min(int(n), (len(raw) - _FOOTER.size) // frame_bytes)
    data = np.frombuffer(raw[:count * frame_bytes], dtype="<f8")
    return data.reshape(count, int(N), 2).astype(float)


def read_batch(prefix, potential=None):
    """Load a batch written by :func:`write_batch`."""
    from .potential import potential_from_config
    with open(str(prefix) + ".json") as fh:
        meta = json.load(fh)
    N = int(meta["N"])
    configs = read_frames(str(prefix) + ".bin", N)
    if potential is None:
        potential = potential_from_config(meta["potential"])
    params = GasParams(N, float(meta["beta"]), potential)
    chain = ChainConfig(**meta["chain"])
    energies = np.array([float(e) for e in meta["energies"]])[:configs.shape[0]]
    extra = {k: v for k, v in meta.items()
             if k not in ("N", "beta", "chain", "acceptance_rate", "low_acceptance", "energies")}
    return SampleBatch(params, chain, configs, energies, float(meta["acceptance_rate"]),
                       bool(meta["low_acceptance"]), extra)
