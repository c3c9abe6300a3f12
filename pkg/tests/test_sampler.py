import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from coulombgas.equilibrium import solve_equilibrium_radial
from coulombgas.kernel import CoincidentPointsError
from coulombgas.observables import batch_means_se, count_in_disk, kostlan_mean_count
from coulombgas.potential import Disk, make_quadratic, restrict_hard_wall
from coulombgas.rng import stream
from coulombgas.sampler import (BatchWriter, ChainConfig, GasParams, conditional_potential,
                                energy_decomposition_check, energy_delta_move, ginibre_radii_sample,
                                grad_energy, iid_null_sample, metropolis_accept, read_batch,
                                read_frames, run_chain, total_energy, write_batch)

from _oracles import pair_distance_bin_probs

QUAD = make_quadratic()
RAD = solve_equilibrium_radial(QUAD)


def _config(N, seed=0, scale=0.7):
    return stream(seed, "test/config").uniform(-scale, scale, (N, 2))


# ---- energies --------------------------------------------------------------------

def test_total_energy_examples():
    assert total_energy([[0, 0], [1, 0]], QUAD, 2) == pytest.approx(2.0)
    assert total_energy([[0.3, 0.4]], QUAD, 5) == pytest.approx(5 * 0.25)
    assert total_energy([[0.1, 0.1], [0.1, 0.1]], QUAD, 2) == np.inf
    walled = restrict_hard_wall(QUAD, Disk((0, 0), 0.5))
    assert total_energy([[0.0, 0.0], [0.6, 0.0]], walled, 2) == np.inf


def test_delta_move_examples():
    c = _config(16)
    assert energy_delta_move(c, 3, c[3], QUAD, 16) == 0.0
    assert energy_delta_move(c, 3, c[5], QUAD, 16) == np.inf
    walled = restrict_hard_wall(QUAD, Disk((0, 0), 1.0))
    assert energy_delta_move(c, 0, [1.5, 0.0], walled, 16) == np.inf
    with pytest.raises(IndexError):
        energy_delta_move(c, 16, [0, 0], QUAD, 16)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 15), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.integers(0, 1000))
def test_delta_move_matches_recompute(j, dx, dy, seed):
    c = _config(16, seed)
    new = c[j] + [dx, dy]
    after = c.copy()
    after[j] = new
    full = total_energy(after, QUAD, 16) - total_energy(c, QUAD, 16)
    delta = energy_delta_move(c, j, new, QUAD, 16)
    assert delta == pytest.approx(full, rel=1e-10, abs=1e-10)


def test_grad_energy_examples():
    g = grad_energy([[-0.5, 0.0], [0.5, 0.0]], QUAD, 2)
    ext = 2 * QUAD.gradient(np.array([[-0.5, 0.0], [0.5, 0.0]]))
    inter = g - ext
    assert np.allclose(inter[0], -inter[1])
    assert np.allclose(inter[0], [2.0, 0.0])  # pushed apart
    one = grad_energy([[0.2, -0.1]], QUAD, 7)
    assert np.allclose(one, 7 * QUAD.gradient(np.array([[0.2, -0.1]])))
    with pytest.raises(CoincidentPointsError):
        grad_energy([[0.1, 0.1], [0.1, 0.1]], QUAD, 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000))
def test_grad_energy_finite_difference(seed):
    c = _config(8, seed)
    d = stream(seed, "test/dir").standard_normal(c.shape)
    eps = 1e-5
    fd = (total_energy(c + eps * d, QUAD, 8) - total_energy(c - eps * d, QUAD, 8)) / (2 * eps)
    an = np.sum(grad_energy(c, QUAD, 8) * d)
    assert fd == pytest.approx(an, rel=1e-5, abs=1e-6)


# ---- chain --------------------------------------------------------------------------

def test_params_validation():
    with pytest.raises(ValueError):
        GasParams(0, 1.0, QUAD)
    with pytest.raises(ValueError):
        GasParams(4, 0.0, QUAD)
    with pytest.raises(ValueError):
        ChainConfig(steps=10, burn_in=10)
    with pytest.raises(ValueError):
        ChainConfig(steps=10, thinning=0)
    with pytest.raises(ValueError):
        ChainConfig(steps=10, algorithm="gibbs")


def test_metropolis_detailed_balance():
    # frozen 3-particle states x, y; the proposal set is {x, y} (symmetric, always the other one)
    beta = 1.0
    x = np.array([[0.0, 0.0], [0.5, 0.1], [-0.3, 0.4]])
    y = x.copy()
    y[0] = [0.2, -0.25]
    hx, hy = total_energy(x, QUAD, 3), total_energy(y, QUAD, 3)
    n = 10**6
    rng = stream(11, "test/detailed-balance")
    ux, uy = rng.random(n), rng.random(n)
    axy = np.array([metropolis_accept(hy - hx, beta, u) for u in ux])
    ayx = np.array([metropolis_accept(hx - hy, beta, u) for u in uy])
    pxy, pyx = axy.mean(), ayx.mean()
    # pi(x) P(x->y) = pi(y) P(y->x), normalised by pi(x)
    lhs, rhs = pxy, np.exp(-beta * (hy - hx)) * pyx
    se = np.hypot(np.sqrt(pxy * (1 - pxy) / n), np.exp(-beta * (hy - hx)) * np.sqrt(pyx * (1 - pyx) / n))
    assert abs(lhs - rhs) <= 3 * max(se, 1.0 / n)
    assert 0 < min(pxy, pyx) < 1 and max(pxy, pyx) == 1.0


def test_single_particle_moment():
    batch = run_chain(GasParams(1, 1.0, QUAD), ChainConfig(steps=100_000, burn_in=1000, seed=3),
                      init=np.zeros((1, 2)))
    r2 = np.sum(batch.configs**2, axis=(1, 2))
    assert abs(r2.mean() - 1.0) <= 3 * batch_means_se(r2)


@pytest.mark.parametrize("algorithm", ["random-walk", "gradient"])
def test_determinism_and_streams(algorithm):
    params = GasParams(8, 1.0, QUAD)
    cfg = ChainConfig(steps=300, burn_in=50, thinning=5, seed=9, algorithm=algorithm)
    a = run_chain(params, cfg, equilibrium=RAD)
    b = run_chain(params, cfg, equilibrium=RAD)
    assert np.array_equal(a.configs, b.configs) and np.array_equal(a.energies, b.energies)
    c = run_chain(params, cfg, equilibrium=RAD, path="chain/1")
    assert not np.array_equal(a.configs, c.configs)
    assert a.n_frames == 50
    assert 0 < a.acceptance_rate < 1
    assert a.metadata["step_size"] == pytest.approx(0.8 / np.sqrt(8))


def test_block_size_does_not_change_output(monkeypatch):
    import coulombgas.sampler as sm
    params = GasParams(6, 1.0, QUAD)
    cfg = ChainConfig(steps=200, burn_in=37, thinning=1, seed=2)
    a = run_chain(params, cfg, equilibrium=RAD)
    assert a.metadata["block_sweeps"] == 1
    cfg3 = ChainConfig(steps=200, burn_in=37, thinning=3, seed=2)
    monkeypatch.setattr(sm, "DEFAULT_BLOCK_MOVES", 6)  # forces one-sweep blocks
    b = run_chain(params, cfg3, equilibrium=RAD)
    monkeypatch.undo()
    c = run_chain(params, cfg3, equilibrium=RAD)
    assert np.array_equal(b.configs, c.configs)
    assert np.array_equal(a.configs[2::3], c.configs)


def test_stored_energies_match_configs():
    batch = run_chain(GasParams(12, 2.0, QUAD), ChainConfig(steps=400, thinning=20, seed=4,
                                                            algorithm="gradient"), equilibrium=RAD)
    for c, e in zip(batch.configs[::5], batch.energies[::5]):
        assert e == pytest.approx(total_energy(c, QUAD, 12), rel=1e-8)


def test_tiny_step_is_nearly_frozen():
    start = iid_null_sample(RAD, 8, 0)
    batch = run_chain(GasParams(8, 1.0, QUAD), ChainConfig(steps=200, step_size=1e-7, seed=1), init=start)
    assert batch.acceptance_rate > 0.999
    assert np.max(np.abs(batch.configs - start)) < 1e-4


def test_low_acceptance_is_flagged_not_fatal():
    with pytest.warns(UserWarning, match="acceptance"):
        batch = run_chain(GasParams(8, 1.0, QUAD), ChainConfig(steps=50, step_size=50.0, seed=1),
                          equilibrium=RAD)
    assert batch.low_acceptance


def test_bad_initial_state():
    with pytest.raises(ValueError):
        run_chain(GasParams(2, 1.0, QUAD), ChainConfig(steps=5), init=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        run_chain(GasParams(2, 1.0, QUAD), ChainConfig(steps=5), init=np.zeros((3, 2)))
    with pytest.raises(ValueError):
        run_chain(GasParams(2, 1.0, QUAD), ChainConfig(steps=5))


@pytest.mark.parametrize("algorithm", ["random-walk", "gradient"])
def test_two_particle_stationarity(algorithm):
    batch = run_chain(GasParams(2, 1.0, QUAD),
                      ChainConfig(steps=400_000, burn_in=1000, thinning=20, seed=5, algorithm=algorithm),
                      equilibrium=RAD)
    d = np.hypot(*(batch.configs[:, 0] - batch.configs[:, 1]).T)
    # 20 equal-probability bins of the exact law; the last one is open-ended
    probs_fine = pair_distance_bin_probs(np.linspace(0, 6, 6001))
    cdf = np.concatenate([[0], np.cumsum(probs_fine)])
    edges = np.interp(np.linspace(0, 1, 21), cdf, np.linspace(0, 6, 6001))
    edges[-1] = np.inf
    expected = pair_distance_bin_probs(edges) * d.size
    observed = np.histogram(d, edges)[0]
    p = stats.chisquare(observed, expected * observed.sum() / expected.sum()).pvalue
    assert p > 0.01


def test_kostlan_matches_chain_count():
    N, r = 16, 0.5
    batch = run_chain(GasParams(N, 1.0, QUAD), ChainConfig(steps=40_000, burn_in=2000, thinning=4, seed=8),
                      equilibrium=RAD)
    counts = count_in_disk(batch.configs, (0, 0), r).astype(float)
    radii = ginibre_radii_sample(N, stream(8, "ginibre"), size=20_000)
    kc = np.sum(radii <= r, axis=1)
    se = np.hypot(batch_means_se(counts), kc.std(ddof=1) / np.sqrt(kc.size))
    assert abs(counts.mean() - kc.mean()) <= 3 * se
    assert abs(kc.mean() - kostlan_mean_count(N, r)) <= 3 * kc.std(ddof=1) / np.sqrt(kc.size)


# ---- oracles ----------------------------------------------------------------------------

def test_ginibre_single_particle_ks():
    r = ginibre_radii_sample(1, 1, size=100_000)[:, 0]
    assert stats.kstest(r**2, stats.expon.cdf).pvalue > 0.01


def test_ginibre_moment_and_order():
    N = 10
    r = ginibre_radii_sample(N, 2, size=20_000)
    assert np.all(np.diff(r, axis=1) >= 0)
    s = np.sum(r**2, axis=1)
    assert abs(s.mean() - (N + 1) / 2) <= 3 * s.std(ddof=1) / np.sqrt(s.size)
    assert ginibre_radii_sample(N, 2).shape == (N,)


def test_iid_null_radial():
    N, draws = 20, 5000
    pts = iid_null_sample(RAD, N, 3, size=draws)
    counts = count_in_disk(pts, (0, 0), 0.5)
    frac = counts / N
    assert abs(frac.mean() - 0.25) <= 3 * frac.std(ddof=1) / np.sqrt(draws)
    assert counts.var(ddof=1) == pytest.approx(N * 0.25 * 0.75, rel=0.1)
    assert np.all(np.hypot(pts[..., 0], pts[..., 1]) <= RAD.R)


def test_iid_null_grid(tmp_path):
    from coulombgas.equilibrium import solve_obstacle
    from coulombgas.grid import GridSpec
    eq = solve_obstacle(QUAD, GridSpec((0, 0), 2.0, 64))
    pts = iid_null_sample(eq, 50, 4, size=200)
    assert np.all(np.hypot(pts[..., 0], pts[..., 1]) <= 1 + 2 * eq.grid.h)
    frac = count_in_disk(pts, (0, 0), 0.5) / 50
    assert abs(frac.mean() - 0.25) <= 3 * frac.std(ddof=1) / np.sqrt(200) + 0.01


# ---- conditioning ----------------------------------------------------------------------

def test_conditional_potential_examples():
    B = Disk((0, 0), 1.0)
    M, W = conditional_potential(np.empty((0, 2)), Disk((0, 0), 100.0), 5, QUAD)
    assert M == 5
    z = np.array([[0.3, 0.2], [-1.0, 2.0]])
    assert np.allclose(W.value(z), QUAD.value(z))

    M, W = conditional_potential([[2.0, 0.0]], B, 2, QUAD)
    assert M == 1
    # W(w) = (N/M)(|w|^2 - V_o(w)), V_o(w) = -(2/N) log(1/|w - 2|)
    for w in ([0.0, 0.0], [0.5, -0.3]):
        dist = np.hypot(w[0] - 2.0, w[1])
        hand = 2 * (w[0] ** 2 + w[1] ** 2 - (2 / 2) * np.log(dist))
        assert float(W.value(np.array(w))) == pytest.approx(hand, rel=1e-14)
    assert W.value(np.array([1.5, 0.0])) == np.inf

    M, W = conditional_potential([[2.0, 0.0], [0.0, -1.5]], B, 6, QUAD)
    pts = np.array([[0.1, 0.2], [-0.4, 0.3]])
    assert np.allclose(W.laplacian(pts), (6 / 4) * QUAD.laplacian(pts))

    with pytest.raises(ValueError):
        conditional_potential([[0.5, 0.0]], B, 4, QUAD)
    with pytest.raises(ValueError):
        conditional_potential([[2.0, 0.0], [3.0, 0.0]], B, 2, QUAD)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([4, 8, 16]), st.integers(0, 10_000))
def test_energy_decomposition(N, seed):
    c = stream(seed, "test/decomp").uniform(-1, 1, (N, 2))
    c[0] = [0.1, 0.0]
    c[1] = [0.9, 0.0]
    lhs, rhs = energy_decomposition_check(c, Disk((0, 0), 0.5), QUAD)
    assert abs(lhs - rhs) <= 1e-9 * abs(lhs)
    perm = stream(seed, "test/perm").permutation(N)
    l2, r2 = energy_decomposition_check(c[perm], Disk((0, 0), 0.5), QUAD)
    assert abs((l2 - r2) - (lhs - rhs)) <= 1e-9 * abs(lhs)


def test_energy_decomposition_two_particles():
    c = np.array([[0.1, 0.2], [1.0, -0.5]])
    lhs, rhs = energy_decomposition_check(c, Disk((0, 0), 0.5), QUAD)
    d = np.hypot(0.9, 0.7)
    closed = -2 * np.log(d) + 2 * (0.05 + 1.25)
    assert lhs == pytest.approx(closed, rel=1e-14) and rhs == pytest.approx(closed, rel=1e-14)
    with pytest.raises(ValueError):
        energy_decomposition_check(c, Disk((0, 0), 5.0), QUAD)


# ---- batch files ------------------------------------------------------------------------

def test_batch_round_trip(tmp_path):
    batch = run_chain(GasParams(5, 0.5, QUAD), ChainConfig(steps=60, thinning=3, seed=1), equilibrium=RAD)
    write_batch(batch, tmp_path / "b")
    back = read_batch(tmp_path / "b")
    assert np.array_equal(back.configs, batch.configs)
    assert np.array_equal(back.energies, batch.energies)
    assert back.params.beta == 0.5 and back.chain == batch.chain
    raw = (tmp_path / "b.bin").read_bytes()
    assert len(raw) == 20 * 5 * 16 + 16 and raw[-16:-8] == b"OCPFRAME"
    assert np.frombuffer(raw[:16], "<f8").tolist() == batch.configs[0, 0].tolist()


def test_interrupted_file_is_readable(tmp_path):
    w = BatchWriter(tmp_path / "part", 4)
    frames = stream(0, "test/frames").random((3, 4, 2))
    for f in frames:
        w(f, 1.0)
    # simulate a kill mid-frame: no close(), half a frame appended after the footer
    w._fh.write(b"\0" * 40)
    w._fh.flush()
    got = read_frames(tmp_path / "part.bin", 4)
    assert np.array_equal(got, frames)
    w._fh.close()
    # footer cut off entirely
    raw = (tmp_path / "part.bin").read_bytes()
    (tmp_path / "cut.bin").write_bytes(raw[:2 * 64 + 30])
    assert np.array_equal(read_frames(tmp_path / "cut.bin", 4), frames[:2])
    (tmp_path / "bare.bin").write_bytes(raw[:2 * 64])  # frame written, footer not yet
    assert np.array_equal(read_frames(tmp_path / "bare.bin", 4), frames[:2])


def test_streaming_sink_matches_batch(tmp_path):
    w = BatchWriter(tmp_path / "s", 6)
    batch = run_chain(GasParams(6, 1.0, QUAD), ChainConfig(steps=40, thinning=4, seed=2), equilibrium=RAD,
                      sink=w)
    w.close({"beta": 1.0})
    assert np.array_equal(read_frames(tmp_path / "s.bin", 6), batch.configs)
