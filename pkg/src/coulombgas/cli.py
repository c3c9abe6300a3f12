"""Config-driven experiment runner.

``python -m coulombgas <command> --config run.toml [--out DIR] [--seed U64] [--threads K]``

Commands: ``equilibrium``, ``sample``, ``verify``, ``analyze``, ``report``.
The config is a TOML file with the blocks ``[potential]``, ``[gas]``,
``[chain]``, ``[equilibrium]``, ``[observables]`` and the top-level keys
``seed`` and ``out``.  Unknown keys are errors.  Every output except
``run.log`` is a pure function of (config, seed).
"""

import argparse
import glob
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import equilibrium as eqm
from . import observables as obs
from . import sampler as smp
from .grid import GridSpec, disk_measure, log_potential_of_measure
from .kernel import smoothed_log
from .potential import Disk, Potential, potential_from_config
from .testfunctions import PROFILES, TestFunction

log = logging.getLogger("coulombgas")


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending field."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_SCHEMA = {
    "": {"seed", "out", "potential", "gas", "chain", "equilibrium", "observables"},
    "gas": {"N", "beta"},
    "chain": {"algorithm", "steps", "burn_in", "thinning", "step_size", "chains", "init"},
    "equilibrium": {"method", "half_width", "n", "tol", "max_iter", "mass_tol"},
    "observables": {"scales", "profile", "centers", "disks", "rigidity_scale", "rigidity_center",
                    "null_draws", "bump_scale", "bump_amplitude"},
}


@dataclass
class ExperimentConfig:
    potential: Potential
    potential_block: dict
    N: list = field(default_factory=lambda: [16])
    beta: list = field(default_factory=lambda: [1.0])
    chain: dict = field(default_factory=dict)
    equilibrium: dict = field(default_factory=dict)
    observables: dict = field(default_factory=dict)
    out: str = "out"
    seed: int | None = None

    @property
    def grid(self):
        e = self.equilibrium
        return GridSpec((0.0, 0.0), e.get("half_width", 2.0), e.get("n", 256))


def _check_keys(block, name):
    allowed = _SCHEMA[name]
    unknown = set(block) - allowed
    if unknown:
        where = name or "top level"
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")


def _as_list(v, name, kind):
    vals = v if isinstance(v, list) else [v]
    try:
        return [kind(x) for x in vals]
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected {kind.__name__} or a list of them, got {v!r}") from None


def parse_config(text, source="<config>"):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    _check_keys(raw, "")
    for name in ("gas", "chain", "equilibrium", "observables"):
        blk = raw.get(name, {})
        if not isinstance(blk, dict):
            raise ConfigError(f"{name}: expected a table")
        _check_keys(blk, name)
    if "potential" not in raw:
        raise ConfigError("potential: block is required")
    try:
        p = potential_from_config(raw["potential"])
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"potential: {exc}") from None

    gas = raw.get("gas", {})
    N = _as_list(gas.get("N", [16]), "gas.N", int)
    beta = _as_list(gas.get("beta", [1.0]), "gas.beta", float)
    if any(n < 1 for n in N):
        raise ConfigError("gas.N: every N must be at least 1")
    if any(not b > 0 for b in beta):
        raise ConfigError("gas.beta: every beta must be positive")

    chain = dict(raw.get("chain", {}))
    try:
        smp.ChainConfig(steps=chain.get("steps", 1000), burn_in=chain.get("burn_in", 0),
                        thinning=chain.get("thinning", 1), step_size=chain.get("step_size"),
                        algorithm=chain.get("algorithm", "random-walk"))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"chain: {exc}") from None
    if chain.get("init", "equilibrium-iid") != "equilibrium-iid":
        raise ConfigError("chain.init: only 'equilibrium-iid' is supported in configs")
    if int(chain.get("chains", 1)) < 1:
        raise ConfigError("chain.chains: must be at least 1")

    eq = dict(raw.get("equilibrium", {}))
    if eq.get("method", "auto") not in ("auto", "radial", "obstacle"):
        raise ConfigError("equilibrium.method: expected 'auto', 'radial' or 'obstacle'")
    if "n" in eq and int(eq["n"]) < 16:
        raise ConfigError("equilibrium.n: must be at least 16")
    if "half_width" in eq and not float(eq["half_width"]) > 0:
        raise ConfigError("equilibrium.half_width: must be positive")

    ob = dict(raw.get("observables", {}))
    for s in _as_list(ob.get("scales", [0.25]), "observables.scales", float):
        if not 0 <= s < 0.5:
            raise ConfigError(f"observables.scales: scale {s} outside [0, 1/2)")
    if ob.get("profile", "poly5") not in PROFILES:
        raise ConfigError(f"observables.profile: expected one of {sorted(PROFILES)}")

    seed = raw.get("seed")
    if seed is not None and not (isinstance(seed, int) and 0 <= seed < 2**64):
        raise ConfigError("seed: expected an unsigned 64-bit integer")
    return ExperimentConfig(p, raw["potential"], N, beta, chain, eq, ob, str(raw.get("out", "out")),
                            seed)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read(), str(path))


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _json(path, obj):
    obs.write_json(path, obj)


def equilibrium_for(cfg: ExperimentConfig):
    """Radial closed form when the potential allows it (or is forced), else the grid solve."""
    method = cfg.equilibrium.get("method", "auto")
    p = cfg.potential
    if method == "radial" or (method == "auto" and p.is_radial):
        return eqm.solve_equilibrium_radial(p)
    return _obstacle(cfg)


def _obstacle(cfg):
    e = cfg.equilibrium
    return eqm.solve_obstacle(cfg.potential, cfg.grid, tol=e.get("tol", 1e-12),
                              max_iter=e.get("max_iter", 200_000), mass_tol=e.get("mass_tol", 1e-9))


def _beta_tag(b):
    return repr(float(b)).replace(".", "p")


def _tasks(cfg):
    nchains = int(cfg.chain.get("chains", 1))
    out = []
    for N in cfg.N:
        for b in cfg.beta:
            for c in range(nchains):
                out.append((N, b, c))
    return out


def _run_task(args):
    cfg, seed, N, beta, c, index, outdir = args
    ch = cfg.chain
    chain = smp.ChainConfig(steps=int(ch.get("steps", 1000)), burn_in=int(ch.get("burn_in", 0)),
                            thinning=int(ch.get("thinning", 1)), step_size=ch.get("step_size"),
                            seed=seed, algorithm=ch.get("algorithm", "random-walk"))
    params = smp.GasParams(N, beta, cfg.potential)
    eq = equilibrium_for(cfg)
    path = f"chain/{index}"
    prefix = os.path.join(outdir, f"batch_N{N}_beta{_beta_tag(beta)}_c{c}")
    writer = smp.BatchWriter(prefix, N)
    batch = smp.run_chain(params, chain, "equilibrium-iid", equilibrium=eq, path=path, sink=writer)
    meta = smp.chain_summary(batch)
    meta["potential"] = cfg.potential_block
    writer.close(meta)
    return prefix, batch.acceptance_rate, batch.low_acceptance


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_equilibrium(cfg: ExperimentConfig, outdir):
    p = cfg.potential
    grid = cfg.grid
    report = {"grid": grid.to_dict(), "potential": cfg.potential_block}
    try:
        eq = _obstacle(cfg)
    except eqm.NonConvergenceError as exc:
        _json(os.path.join(outdir, "equilibrium_failure.json"),
              {"error": str(exc), "residuals": exc.residuals})
        log.error("obstacle solver did not converge: %s", exc)
        return 3
    except eqm.BoxTooSmallError as exc:
        _json(os.path.join(outdir, "equilibrium_failure.json"), {"error": str(exc)})
        log.error("%s", exc)
        return 3
    eqm.write_equilibrium(eq, os.path.join(outdir, "equilibrium"))
    el = eqm.euler_lagrange_residual(eq, p)
    tol = max(1e-4, 10 * cfg.equilibrium.get("tol", 1e-12))
    report.update({
        "F": {"value": eq.F, "provenance": "obstacle-solve"},
        "support_radius": {"value": eq.support_radius(), "provenance": "obstacle-solve, equal-area"},
        "mass": {"value": eq.measure.mass, "provenance": "obstacle-solve"},
        "euler_lagrange": {"on_support_max": el.on_support_max, "off_support_min": el.off_support_min,
                           "off_support_tolerance": tol,
                           "one_sided_ok": bool(el.off_support_min >= -tol),
                           "provenance": "grid log-potential of the solved measure"},
        "residuals": eq.residuals,
    })
    if p.is_radial:
        rad = eqm.solve_equilibrium_radial(p)
        report["radial_oracle"] = {
            "R": {"value": rad.R, "provenance": "radial closed form"},
            "F": {"value": rad.F, "provenance": "radial quadrature"},
            "support_radius_error": abs(eq.support_radius() - rad.R),
            "within_2h": bool(abs(eq.support_radius() - rad.R) <= 2 * grid.h),
            "F_error": abs(eq.F - rad.F),
        }
    _json(os.path.join(outdir, "equilibrium_report.json"), report)
    log.info("equilibrium: F=%.6f support radius=%.6f", eq.F, eq.support_radius())
    return 0


def cmd_sample(cfg: ExperimentConfig, outdir, seed, threads=1):
    if seed is None:
        raise ConfigError("seed: a master seed is required for sampling (config or --seed)")
    tasks = [(cfg, seed, N, b, c, i, outdir) for i, (N, b, c) in enumerate(_tasks(cfg))]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    index = []
    for (N, b, c), (prefix, rate, low) in zip(_tasks(cfg), results):
        log.info("sampled N=%d beta=%g chain=%d acceptance=%.4f%s", N, b, c, rate,
                 " (LOW)" if low else "")
        index.append({"N": N, "beta": b, "chain": c, "prefix": os.path.basename(prefix),
                      "acceptance_rate": rate, "low_acceptance": low})
    _json(os.path.join(outdir, "samples.json"), {"seed": seed, "batches": index})
    return 0


def _check(name, value, reference, tol, provenance, relative=False):
    err = abs(value - reference)
    if relative:
        err /= max(abs(reference), 1e-300)
    return {"identity": name, "value": value, "reference": reference, "error": err,
            "tolerance": tol, "relative": relative, "status": "pass" if err <= tol else "fail",
            "provenance": provenance}


def verify_suite(cfg: ExperimentConfig, seed=0):
    """The identity suite; returns a list of result rows."""
    p = cfg.potential
    rows = []
    grid = cfg.grid
    eq = _obstacle(cfg)
    radial = p.is_radial
    rad = eqm.solve_equilibrium_radial(p) if radial else None
    h = grid.h

    if rad is not None:
        rows.append(_check("support radius (grid vs radial)", eq.support_radius(), rad.R, 2 * h,
                           {"value": "obstacle-solve", "reference": "radial closed form"}))
        rows.append(_check("F (grid vs radial)", eq.F, rad.F, 1e-2,
                           {"value": "obstacle-solve", "reference": "radial quadrature"}))
    el = eqm.euler_lagrange_residual(eq, p)
    rows.append(_check("Euler-Lagrange off-support slack", min(el.off_support_min, 0.0), 0.0, 1e-4,
                       {"value": "grid log-potential", "reference": "one-sided inequality"}))

    # perturbation identity: closed form vs an independent grid solve of V - f
    f = TestFunction((0.0, 0.0), 0.5, amplitude=0.01)
    try:
        pert = eqm.perturb_equilibrium(eq, f, p)
        direct = eqm.solve_obstacle(p.minus(f), grid)
        bulk = eq.support_mask & (np.hypot(*np.moveaxis(grid.points(), -1, 0)) <= 0.8 * eq.support_radius())
        rel = float(np.max(np.abs(pert.density[bulk] - direct.measure.density[bulk])
                           / direct.measure.density[bulk]))
        rows.append(_check("perturbed measure (closed form vs solve)", rel, 0.0, 0.03,
                           {"value": "closed form mu_V - Lap f/4pi", "reference": "obstacle-solve of V-f"}))
        lhs, rhs = eqm.perturbation_energy_identity(eq, p, f)
        rows.append(_check("perturbation energy identity", lhs, rhs, 1e-3,
                           {"value": "energy functional of perturbed measure",
                            "reference": "I_V - (f,mu) - (f,-Lap f)/8pi"}))
        d1, d2 = eqm.dirichlet_pairings(f, grid)
        rows.append(_check("(f,-Lap f) = |grad f|^2", d1, d2, 1e-6,
                           {"value": "grid quadrature of f Lap f", "reference": "grid quadrature of |grad f|^2"},
                           relative=True))
    except eqm.PreconditionError as exc:
        rows.append({"identity": "perturbation", "status": "precondition-rejected", "detail": str(exc),
                     "provenance": {"value": "perturb_equilibrium precondition check"}})

    # a deliberately violated precondition must be rejected, not fail
    big = TestFunction((0.0, 0.0), 0.5, amplitude=1.0)
    try:
        eqm.perturb_equilibrium(eq, big, p)
        rows.append({"identity": "precondition Lap f <= Lap V", "status": "fail",
                     "detail": "violating bump was accepted",
                     "provenance": {"value": "perturb_equilibrium, amplitude-1 bump"}})
    except eqm.PreconditionError as exc:
        rows.append({"identity": "precondition Lap f <= Lap V", "status": "precondition-rejected",
                     "detail": f"{exc} ({len(exc.cells)} cells)",
                     "provenance": {"value": "perturb_equilibrium, amplitude-1 bump"}})

    # restriction to a disk inside the support
    if rad is not None:
        B = Disk((0.0, 0.0), 0.5 * rad.R)
        try:
            W, mass_b = eqm.restriction_potential(eq, p, B)
            sol = eqm.solve_obstacle(W, grid)
            pts = grid.points()
            core = np.hypot(pts[..., 0], pts[..., 1]) <= 0.4 * rad.R
            target = rad.density(pts[core]) / mass_b
            rel = float(np.max(np.abs(sol.measure.density[core] - target) / target))
            rows.append(_check("restricted measure density", rel, 0.0, 0.05,
                               {"value": "obstacle-solve of W", "reference": "mu_V|_B / mu_V(B)"}))
            rows.append(_check("mu_V(B)", mass_b, rad.mass_within(B.radius), 5e-3,
                               {"value": "grid cell sum", "reference": "radial closed form"}))
        except (eqm.PreconditionError, eqm.NonConvergenceError) as exc:
            rows.append({"identity": "restriction", "status": "fail", "detail": str(exc),
                         "provenance": {"value": "restriction_potential"}})

    # energy decomposition on random configurations
    from .rng import stream
    rng = stream(seed, "verify/decomposition")
    R = rad.R if rad is not None else eq.support_radius()
    worst = 0.0
    for N in (4, 8, 16):
        for _ in range(20):
            c = smp.iid_null_sample(rad if rad is not None else eq, N, rng)
            B = Disk((0.0, 0.0), 0.5 * R)
            inside = B.contains(c)
            if inside.all() or not inside.any():
                continue
            lhs, rhs = smp.energy_decomposition_check(c, B, p)
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    rows.append(_check("energy decomposition (worst relative)", worst, 0.0, 1e-9,
                       {"value": "H_N", "reference": "H(inside|outside) + H(outside)"}))

    # K_V identity
    if rad is not None:
        fk = TestFunction((0.0, 0.0), 0.5 * rad.R)
        kv = obs.kv_identity_check(fk, eq, p)
        rows.append(_check("K_V(dbar f/Lap V) = f/4 (sup)", kv.sup_error, 0.0, 1e-2,
                           {"value": "cell quadrature of K_V", "reference": "f/4"}))
        rows.append(_check("double-integral Euler-Lagrange identity", abs(kv.elff_residual), 0.0, 1e-6,
                           {"value": "cell quadrature", "reference": "0"}))

    # l_r is the potential of the uniform disk; Newton's bound l_r <= log 1/|z|
    g2 = GridSpec((0.0, 0.0), 2.0, 128)
    m = disk_measure(g2, radius=1.0)
    U = log_potential_of_measure(m).values
    pts = g2.points()
    lr = smoothed_log(pts, 1.0)
    rows.append(_check("l_r = potential of uniform disk (sup)", float(np.max(np.abs(U - lr))), 0.0, 5e-3,
                       {"value": "grid log-potential", "reference": "closed form l_r"}))
    q = stream(seed, "verify/newton").normal(size=(2000, 2)) * 2
    r = stream(seed, "verify/newton-r").uniform(0.05, 3.0, size=50)
    log_q = np.log(np.hypot(q[:, 0], q[:, 1]))
    excess = max(float(np.max(smoothed_log(q, rr) + log_q)) for rr in r)
    rows.append(_check("Newton bound max(l_r - log 1/|z|)", max(excess, 0.0), 0.0, 1e-12,
                       {"value": "l_r on random points", "reference": "log 1/|z|"}))
    return rows


def cmd_verify(cfg: ExperimentConfig, outdir, seed):
    rows = verify_suite(cfg, 0 if seed is None else seed)
    failures = [r["identity"] for r in rows if r["status"] == "fail"]
    _json(os.path.join(outdir, "verify_report.json"), {"checks": rows, "failures": failures})
    obs.write_csv(os.path.join(outdir, "verify_report.csv"), rows,
                  ["identity", "status", "value", "reference", "error", "tolerance", "relative"])
    for r in rows:
        log.info("%-48s %s", r["identity"], r["status"])
    if failures:
        log.error("identity failures: %s", ", ".join(failures))
        return 1
    return 0


def _batch_paths(outdir, paths):
    if paths:
        return [p[:-5] if p.endswith(".json") else p for p in paths]
    return sorted(p[:-5] for p in glob.glob(os.path.join(outdir, "batch_*.json")))


def cmd_analyze(cfg: ExperimentConfig, outdir, paths, seed):
    prefixes = _batch_paths(outdir, paths)
    if not prefixes:
        raise ConfigError("analyze: no batch files given or found in the output directory")
    batches = [smp.read_batch(pfx, cfg.potential) for pfx in prefixes]
    eq = equilibrium_for(cfg)
    ob = cfg.observables
    profile = ob.get("profile", "poly5")
    scales = _as_list(ob.get("scales", [0.25]), "observables.scales", float)
    centers = [tuple(c) for c in ob.get("centers", [[0.0, 0.0]])]

    local_rows, loop_rows = [], []
    for pfx, b in zip(prefixes, batches):
        name = os.path.basename(pfx)
        for s in scales:
            for z0 in centers:
                rep = obs.local_law_report(b, eq, z0, s, profile)
                local_rows.append({"batch": name, **{k: v for k, v in rep.summary().items()
                                                     if k not in ("center", "notes")},
                                   "center_x": z0[0], "center_y": z0[1]})
        bump = TestFunction(tuple(ob.get("rigidity_center", [0.0, 0.0])), float(ob.get("bump_scale", 0.8)),
                            profile, float(ob.get("bump_amplitude", 1.0)))
        for h in (obs.constant_field(1.0), obs.identity_field(), obs.build_h(bump, cfg.potential)):
            lr = obs.loop_residual(b, h)
            loop_rows.append({"batch": name, "N": b.params.N, "beta": b.params.beta, "h": h.label,
                              "estimate_re": lr.estimate.real, "estimate_im": lr.estimate.imag,
                              "std_error": lr.std_error, "z_score": lr.z_score,
                              "frames": lr.sample_count, "skipped": lr.skipped})
    obs.write_csv(os.path.join(outdir, "local_law.csv"), local_rows)
    obs.write_csv(os.path.join(outdir, "loop.csv"), loop_rows)
    summary = {"batches": [os.path.basename(p) for p in prefixes], "local_law": local_rows,
               "loop": loop_rows,
               "notes": "local-law bounds use implicit constant 1; loop residuals should be within "
                        "a few standard errors of zero"}

    by_beta = {}
    for b in batches:
        by_beta.setdefault(b.params.beta, {}).setdefault(b.params.N, b)
    fluct = {}
    for beta, per_N in sorted(by_beta.items()):
        if len(per_N) < 3:
            continue
        f = TestFunction(tuple(ob.get("rigidity_center", [0.0, 0.0])),
                         float(ob.get("rigidity_scale", 1.0)), profile)
        rep = obs.rigidity_scan([per_N[n] for n in sorted(per_N)], f, eq,
                                null_draws=int(ob.get("null_draws", 4000)), seed=0 if seed is None else seed)
        obs.write_csv(os.path.join(outdir, f"rigidity_beta{_beta_tag(beta)}.csv"), rep.rows)
        fluct[repr(beta)] = rep.summary()
    summary["rigidity"] = fluct
    _json(os.path.join(outdir, "analyze_report.json"), summary)
    log.info("analyzed %d batches", len(batches))
    return 0


def cmd_report(cfg, outdir):
    parts = {}
    for name in ("equilibrium_report", "verify_report", "analyze_report", "samples"):
        path = os.path.join(outdir, name + ".json")
        if os.path.exists(path):
            with open(path) as fh:
                parts[name] = json.load(fh)
    if not parts:
        raise ConfigError(f"report: nothing to summarise in {outdir}")
    lines = ["# run summary", ""]
    if "equilibrium_report" in parts:
        e = parts["equilibrium_report"]
        lines.append(f"equilibrium: F = {e['F']['value']:.6g}, support radius = "
                     f"{e['support_radius']['value']:.6g}")
    if "verify_report" in parts:
        v = parts["verify_report"]
        lines.append(f"verify: {len(v['checks'])} checks, {len(v['failures'])} failures")
        for c in v["checks"]:
            lines.append(f"  {c['status']:>22}  {c['identity']}")
    if "samples" in parts:
        for b in parts["samples"]["batches"]:
            lines.append(f"sample: N={b['N']} beta={b['beta']} chain={b['chain']} "
                         f"acceptance={b['acceptance_rate']:.3f}")
    if "analyze_report" in parts:
        a = parts["analyze_report"]
        for r in a["loop"]:
            lines.append(f"loop: {r['batch']} h={r['h']} |res|/se = {r['z_score']:.2f}")
        for beta, r in a.get("rigidity", {}).items():
            lines.append(f"rigidity beta={beta}: gas slope {r['gas_slope']:.3f}, "
                         f"null slope {r['null_slope']:.3f}")
    text = "\n".join(lines) + "\n"
    with open(os.path.join(outdir, "report.md"), "w") as fh:
        fh.write(text)
    _json(os.path.join(outdir, "report.json"), parts)
    sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="coulombgas", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("equilibrium", "sample", "verify", "analyze", "report"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="TOML experiment file")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--threads", type=int, default=1, help="worker processes for sampling")
        if name == "analyze":
            sp.add_argument("batches", nargs="*", help="batch prefixes or .json files")
    return ap


def _setup_logging(outdir):
    log.setLevel(logging.INFO)
    for hd in list(log.handlers):
        log.removeHandler(hd)
        hd.close()
    fh = logging.FileHandler(os.path.join(outdir, "run.log"))
    fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    sh = logging.StreamHandler(sys.stderr)
    sh.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(fh)
    log.addHandler(sh)
    log.propagate = False


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    seed = args.seed if args.seed is not None else cfg.seed
    if seed is not None and not 0 <= seed < 2**64:
        sys.stderr.write("config error: --seed must be an unsigned 64-bit integer\n")
        return 2
    outdir = args.out or cfg.out
    os.makedirs(outdir, exist_ok=True)
    _setup_logging(outdir)
    t0 = time.time()
    log.info("command %s config %s seed %s", args.command, args.config, seed)
    try:
        if args.command == "equilibrium":
            code = cmd_equilibrium(cfg, outdir)
        elif args.command == "sample":
            code = cmd_sample(cfg, outdir, seed, max(1, args.threads))
        elif args.command == "verify":
            code = cmd_verify(cfg, outdir, seed)
        elif args.command == "analyze":
            code = cmd_analyze(cfg, outdir, args.batches, seed)
        else:
            code = cmd_report(cfg, outdir)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    log.info("done in %.1f s (exit %d)", time.time() - t0, code)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
