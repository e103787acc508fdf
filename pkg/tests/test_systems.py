import numpy as np
import pytest

from greedy_idp.errors import AdmissibilityError, ConfigurationError
from greedy_idp.systems import (
    KPP2D,
    PWLINEAR,
    SINE,
    PSystem,
    flux_kpp,
    flux_piecewise_linear,
    flux_psystem,
    flux_sine,
    get_system,
    kruzhkov_pair,
    psystem_pair,
    riemann_invariants,
    square_pair,
)

from oracles import P_AT_1P5


def test_scalar_flux_values():
    np.testing.assert_allclose(flux_piecewise_linear([1.0, 2.0, 3.0]), [1.0, 0.0, 2.0])
    assert flux_sine(np.pi / 2) == pytest.approx(1.0)
    np.testing.assert_allclose(flux_kpp(0.0), [0.0, 1.0])
    np.testing.assert_allclose(flux_kpp(np.pi / 2), [1.0, 0.0], atol=1e-15)
    assert KPP2D.evaluate(np.zeros(3)).shape == (3, 2)
    assert SINE.evaluate(np.zeros(3)).shape == (3, 1)


def test_psystem_flux():
    np.testing.assert_allclose(flux_psystem([1.0, 0.0]), [0.0, 1.0 / 3.0])
    np.testing.assert_allclose(flux_psystem([1.5, 0.0]), [0.0, P_AT_1P5], rtol=1e-15)
    a = flux_psystem([1.2, 0.7])
    b = flux_psystem([1.2, -0.7])
    assert a[0] == -b[0] and a[1] == b[1]
    with pytest.raises(AdmissibilityError):
        flux_psystem([0.0, 1.0])
    with pytest.raises(AdmissibilityError):
        flux_psystem([-1.0, 1.0])


def test_pwlinear_one_sided_derivatives():
    left, right = PWLINEAR.derivative(np.array([1.0, 2.0, 3.0]))
    assert left[:, 0].tolist() == [-1.0, -1.0, 2.0]
    assert right[:, 0].tolist() == [-1.0, 2.0, 2.0]


def test_kruzhkov_pair():
    pw = kruzhkov_pair(PWLINEAR, 2.0)
    assert pw.eta(3.0) == 1.0
    assert pw.eta(2.0) == 0.0
    np.testing.assert_array_equal(pw.q(2.0), [0.0])
    sine = kruzhkov_pair(SINE, np.pi / 2)
    np.testing.assert_allclose(sine.q(np.pi), [-1.0])


def test_square_pair():
    sq = square_pair(SINE)
    np.testing.assert_allclose(sq.q(0.0), [1.0])
    assert sq.eta(0.0) == 0.0
    pw = square_pair(PWLINEAR)
    np.testing.assert_allclose(pw.q(3.0) - pw.q(1.0), [3.5])
    # continuous at the kink
    np.testing.assert_allclose(pw.q(2.0 - 1e-12), pw.q(2.0 + 1e-12), atol=1e-10)
    with pytest.raises(ConfigurationError):
        square_pair(KPP2D)


@pytest.mark.parametrize("flux", [PWLINEAR, SINE, KPP2D])
def test_entropy_flux_compatibility(flux):
    """q' = eta' f' by central differences, away from kinks."""
    rng = np.random.default_rng(11)
    u = rng.uniform(-6.0, 6.0, 200)
    u = u[np.abs(u - 2.0) > 1e-3]
    k = 0.37
    h = 1e-6
    pairs = [kruzhkov_pair(flux, k)]
    if flux is not KPP2D:
        pairs.append(square_pair(flux))
    for pair in pairs:
        u_ok = u[np.abs(u - k) > 1e-3]
        dq = (pair.q(u_ok + h) - pair.q(u_ok - h)) / (2 * h)
        deta = (pair.eta(u_ok + h) - pair.eta(u_ok - h)) / (2 * h)
        expect = deta[:, None] * flux.derivative(u_ok)[0]
        np.testing.assert_allclose(dq, expect, rtol=1e-6, atol=1e-6)


def test_psystem_pair():
    pair = psystem_pair()
    assert pair.eta([1.0, 0.0]) == pytest.approx(1.0 / 6.0)
    assert pair.eta([1.0, 2.0]) == pytest.approx(2.0 + 1.0 / 6.0)
    np.testing.assert_allclose(pair.q([2.5, 0.0]), [0.0])
    with pytest.raises(AdmissibilityError):
        pair.eta([0.0, 1.0])


def test_psystem_entropy_compatibility():
    """dq = eta' . df for the p-system, by central differences."""
    sys = PSystem()
    rng = np.random.default_rng(3)
    v = rng.uniform(0.2, 5.0, 200)
    u = rng.uniform(-3.0, 3.0, 200)
    h = 1e-6
    dq_dv = (sys.entropy_flux(v + h, u) - sys.entropy_flux(v - h, u)) / (2 * h)
    dq_du = (sys.entropy_flux(v, u + h) - sys.entropy_flux(v, u - h)) / (2 * h)
    # eta' = (-p(v), u) and f' = [[0, -1], [p'(v), 0]]
    np.testing.assert_allclose(dq_dv, u * sys.dpressure(v), rtol=1e-6)
    np.testing.assert_allclose(dq_du, sys.pressure(v), rtol=1e-6)


def test_psystem_entropy_is_strictly_convex():
    pair = psystem_pair()
    rng = np.random.default_rng(5)
    a = np.stack([rng.uniform(0.1, 10, 500), rng.uniform(-5, 5, 500)], axis=1)
    b = np.stack([rng.uniform(0.1, 10, 500), rng.uniform(-5, 5, 500)], axis=1)
    assert np.all(pair.eta(0.5 * (a + b)) < 0.5 * (pair.eta(a) + pair.eta(b)))


def test_riemann_invariants():
    wm, wp = riemann_invariants([1.0, 0.0])
    assert (wm, wp) == pytest.approx((-1.0, 1.0))
    wm2, wp2 = riemann_invariants([1.0, 0.75])
    assert (wm2 - wm, wp2 - wp) == pytest.approx((0.75, 0.75))
    v = np.linspace(0.1, 10.0, 50)
    wm, wp = riemann_invariants(np.stack([v, np.full_like(v, 0.3)], axis=1))
    assert np.all(wp > wm)
    assert np.all(np.diff(wp) < 0) and np.all(np.diff(wm) > 0)
    with pytest.raises(AdmissibilityError):
        riemann_invariants([-0.5, 0.0])


def test_pressure_law_is_decreasing_and_convex():
    sys = PSystem()
    v = np.linspace(0.1, 10.0, 100)
    assert np.all(sys.dpressure(v) < 0)
    assert np.all(np.diff(sys.dpressure(v)) > 0)


def test_trapezoid_defect_matches_quadrature():
    rng = np.random.default_rng(8)
    uL = rng.uniform(-4, 4, 50)
    uR = uL + rng.normal(scale=2.0, size=50)
    x, w = np.polynomial.legendre.leggauss(40)
    for flux in (SINE, KPP2D):
        mid, half = 0.5 * (uL + uR), 0.5 * (uR - uL)
        nodes = mid[:, None] + half[:, None] * x
        integral = np.einsum("k,ekd->ed", w, flux.evaluate(nodes)) * half[:, None]
        trap = 0.5 * (uR - uL)[:, None] * (flux.evaluate(uL) + flux.evaluate(uR))
        np.testing.assert_allclose(flux.trapezoid_defect(uL, uR), trap - integral, atol=1e-12)
    # small gaps use the series branch and stay O(gap^3)
    g = SINE.trapezoid_defect(1.0, 1.0 + 1e-5)[0]
    assert abs(g) < 1e-15


def test_pwlinear_defect_only_across_the_kink():
    assert PWLINEAR.trapezoid_defect(0.0, 1.5)[0] == 0.0
    # 1 -> 3: trapezoid 2 * (1 + 2) / 2 = 3, integral 0.5 + 1 = 1.5
    assert PWLINEAR.trapezoid_defect(1.0, 3.0)[0] == pytest.approx(1.5)
    assert PWLINEAR.trapezoid_defect(3.0, 1.0)[0] == pytest.approx(-1.5)


def test_get_system():
    assert get_system("sine") is SINE
    sys = get_system("psystem")
    assert sys.gamma == 3.0 and sys.r == pytest.approx(1.0 / 3.0)
    with pytest.raises(ConfigurationError):
        get_system("euler")
    with pytest.raises(ConfigurationError):
        PSystem(gamma=1.0)
