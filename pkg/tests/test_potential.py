import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coulombgas.kernel import CoincidentPointsError
from coulombgas.potential import (DiscreteCharge, Disk, Potential, add_external_charges, check_growth,
                                  exclude_disk, make_quadratic, make_radial, potential_from_config,
                                  restrict_hard_wall, zero_potential)
from coulombgas.testfunctions import TestFunction


def test_quadratic_examples():
    p = make_quadratic()
    assert p.value((1.0, 0.0)) == 1.0
    assert np.allclose(p.laplacian(np.random.default_rng(0).normal(size=(10, 2))), 4.0)
    assert np.allclose(p.gradient((0.3, -0.4)), (0.6, -0.8))
    assert p.finite_region is None and p.growth_margin == 1.0


def test_radial_examples():
    rng = np.random.default_rng(1)
    z = rng.normal(size=(50, 2))
    assert np.allclose(make_radial([1]).value(z), make_quadratic().value(z))
    quartic = make_radial([0, 1])
    for r in (0.3, 0.9, 1.7):
        assert quartic.laplacian((r, 0.0)) == pytest.approx(16 * r * r)
    assert make_radial([1, 1]).value((1.0, 0.0)) == 2.0


@pytest.mark.parametrize("coeffs", [[], [0, 0], [1, -1]])
def test_radial_rejects_bad_coefficients(coeffs):
    with pytest.raises(ValueError):
        make_radial(coeffs)


def _potentials():
    q = make_quadratic()
    charged = add_external_charges(make_radial([0.5, 0.2]), [DiscreteCharge((2.0, 0.5), 0.7),
                                                              DiscreteCharge((-1.5, -2.0), 0.3)], 0.5)
    bumped = q.minus(TestFunction((0.1, 0.0), 0.8, amplitude=0.05))
    return [q, make_radial([0.3, 0.0, 0.4]), charged, bumped, q.scaled(2.5)]


@pytest.mark.parametrize("p", _potentials(), ids=lambda p: p.kind)
def test_finite_difference_consistency(p):
    rng = np.random.default_rng(2)
    z = rng.uniform(-1, 1, size=(100, 2))
    h = 1e-4
    ex, ey = np.array([h, 0]), np.array([0, h])
    fd_grad = np.stack([(p.value(z + ex) - p.value(z - ex)) / (2 * h),
                        (p.value(z + ey) - p.value(z - ey)) / (2 * h)], axis=-1)
    g = p.gradient(z)
    scale = np.abs(g).max()
    assert np.max(np.abs(fd_grad - g)) <= 1e-5 * scale
    fd_lap = (p.value(z + ex) + p.value(z - ex) + p.value(z + ey) + p.value(z - ey) - 4 * p.value(z)) / h**2
    lap = p.laplacian(z)
    assert np.max(np.abs(fd_lap - lap)) <= 1e-5 * max(np.abs(lap).max(), 1) * 1e2  # O(h^2) + rounding
    lg = p.laplacian_gradient(z)
    fd_lg = np.stack([(p.laplacian(z + ex) - p.laplacian(z - ex)) / (2 * h),
                      (p.laplacian(z + ey) - p.laplacian(z - ey)) / (2 * h)], axis=-1)
    assert np.allclose(lg, fd_lg, atol=1e-5 * max(1.0, np.abs(lg).max()))


def test_wirtinger_d():
    p = make_quadratic()
    z = np.array([0.3, -0.7])
    assert p.d(z) == pytest.approx(0.3 + 0.7j)  # dV = conj(z) for |z|^2


def test_external_charge_examples():
    q = make_quadratic()
    one = add_external_charges(q, [DiscreteCharge((2.0, 0.0), 1.0)], 1.0)
    assert one.value((0.0, 0.0)) == pytest.approx(2 * np.log(0.5))
    assert one.laplacian((0.0, 0.0)) == pytest.approx(q.laplacian((0.0, 0.0)))
    assert add_external_charges(q, [], 1.0) is q
    assert one.value((2.0, 0.0)) == np.inf
    with pytest.raises(CoincidentPointsError):
        one.gradient((2.0, 0.0))
    with pytest.raises(ValueError):
        DiscreteCharge((0, 0), -1.0)


def test_external_charges_additive():
    rng = np.random.default_rng(3)
    q = make_quadratic()
    a = [DiscreteCharge(tuple(rng.normal(size=2) * 3), w) for w in rng.random(3)]
    b = [DiscreteCharge(tuple(rng.normal(size=2) * 3), w) for w in rng.random(4)]
    z = rng.uniform(-0.5, 0.5, size=(40, 2))
    two_step = add_external_charges(add_external_charges(q, a, 0.3), b, 0.3)
    one_step = add_external_charges(q, a + b, 0.3)
    assert np.allclose(two_step.value(z), one_step.value(z), rtol=1e-13)
    xy = np.array([c.location for c in a])
    arr = add_external_charges(q, (xy, np.array([c.weight for c in a])), 0.3)
    assert np.allclose(arr.value(z), add_external_charges(q, a, 0.3).value(z), rtol=1e-13)


def test_hard_wall():
    q = make_quadratic()
    w = restrict_hard_wall(q, Disk((0.0, 0.0), 0.5))
    assert w.value((0.3, 0.1)) == q.value((0.3, 0.1))
    assert w.value((0.5, 0.0)) == q.value((0.5, 0.0))  # closed disk
    assert w.value((0.6, 0.0)) == np.inf
    assert np.allclose(w.gradient((0.1, 0.2)), q.gradient((0.1, 0.2)))
    assert w.finite_region == Disk((0.0, 0.0), 0.5)
    with pytest.raises(ValueError):
        Disk((0, 0), 0.0)


def test_excluded_disk():
    q = make_quadratic()
    e = exclude_disk(q, Disk((0.0, 0.0), 0.5))
    assert e.value((0.2, 0.0)) == np.inf and e.value((0.5, 0.0)) == np.inf
    assert e.value((0.8, 0.0)) == pytest.approx(0.64)


def test_growth_examples():
    rep = check_growth(make_quadratic(), [2.0, 5.0, 10.0])
    assert rep.margins[-1] == pytest.approx(100 - 3 * np.log(10))
    assert rep.increasing
    bad = add_external_charges(zero_potential(), [DiscreteCharge((0.0, 0.0), 1.0)], 1.0)
    assert not check_growth(bad, [2.0, 5.0, 10.0]).increasing
    walled = restrict_hard_wall(make_quadratic(), Disk((0, 0), 1.5))
    assert check_growth(walled, [2.0, 5.0]).increasing


def test_scaled_and_minus():
    q = make_quadratic()
    assert q.scaled(3.0).value((1.0, 1.0)) == pytest.approx(6.0)
    f = TestFunction((0, 0), 1.0, amplitude=0.1)
    assert q.minus(f).value((0.0, 0.0)) == pytest.approx(-0.1)
    with pytest.raises(ValueError):
        q.scaled(0.0)


def test_compiled_rejects_bumps():
    q = make_quadratic().minus(TestFunction((0, 0), 1.0, amplitude=0.1))
    with pytest.raises(ValueError):
        q.compiled()


def test_config_round_trip():
    cfg = {"kind": "radial", "coefficients": [1.0, 0.5],
           "charges": [{"x": 3.0, "y": 0.0, "weight": 0.5}], "charge_scale": 0.25,
           "wall": {"center": [0.0, 0.0], "radius": 2.0}}
    p = potential_from_config(cfg)
    z = np.array([[0.1, 0.2], [1.0, -0.3]])
    again = Potential.from_config(p.to_config())
    assert np.allclose(p.value(z), again.value(z))
    assert p.value((2.5, 0.0)) == np.inf
    with pytest.raises(ValueError):
        potential_from_config({"kind": "quadratic", "colour": 1})
    with pytest.raises(ValueError):
        potential_from_config({"kind": "radial", "coefficients": [1], "wall": {"radius": 1, "x": 0}})


@settings(max_examples=50)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 3))
def test_value_infinite_exactly_outside_finite_region(x, y, rad):
    w = restrict_hard_wall(make_quadratic(), Disk((0.2, -0.1), rad))
    inside = (x - 0.2) ** 2 + (y + 0.1) ** 2 <= rad * rad
    assert np.isfinite(w.value((x, y))) == inside
