import numpy as np
import pytest

from greedy_idp.errors import ConfigurationError
from greedy_idp.reference import (
    PSystemTwoShock,
    convergence_rates,
    convergence_table,
    psystem_two_shock,
    pwlinear_exact,
    relative_errors,
    sine_exact,
)
from greedy_idp.systems import PSystem

from oracles import PSYS_SL, PSYS_SR, PSYS_UL, PSYS_UR


def test_pwlinear_exact():
    np.testing.assert_array_equal(pwlinear_exact([-0.6, 0.5, 1.5], 0.5), [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(pwlinear_exact([-0.1, 0.1], 0.0), [1.0, 3.0])


def test_sine_exact():
    np.testing.assert_allclose(sine_exact([-0.9, 0.4, 0.9], 0.8), [3 * np.pi, np.pi / 3, 0.0])


def test_sine_exact_continuous_except_at_the_stationary_shock():
    t = 0.8
    for edge in (-t, t):  # xi = cos(3 pi) and xi = cos(0)
        a, b = sine_exact([edge - 1e-9, edge + 1e-9], t)
        assert abs(a - b) < 1e-3
    left, right = sine_exact([-1e-12, 1e-12], t)
    assert left == pytest.approx(2.5 * np.pi)
    assert right == pytest.approx(0.5 * np.pi)
    assert np.sin(left) == pytest.approx(np.sin(right))


def test_two_shock_data_and_speeds():
    ex = psystem_two_shock()
    assert ex.uL == pytest.approx(PSYS_UL, rel=1e-14)
    assert ex.uR == pytest.approx(PSYS_UR, rel=1e-14)
    sL, sR = ex.speeds
    assert sL == pytest.approx(PSYS_SL, rel=1e-14)
    assert sR == pytest.approx(PSYS_SR, rel=1e-12)
    np.testing.assert_allclose(ex(np.array([0.8]), 0.3)[0], [1.0, 0.0])


def test_two_shock_rankine_hugoniot():
    ex = psystem_two_shock()
    sys = ex.system
    sL, sR = ex.speeds
    L, M, R = np.array([ex.vL, ex.uL]), np.array([1.0, 0.0]), np.array([ex.vR, ex.uR])
    flux = lambda U: sys.evaluate(U)[..., 0]
    np.testing.assert_allclose(sL * (M - L), flux(M) - flux(L), atol=1e-12)
    np.testing.assert_allclose(sR * (R - M), flux(R) - flux(M), atol=1e-12)


def test_two_shock_rejects_other_data():
    with pytest.raises(ConfigurationError):
        PSystemTwoShock(PSystem(), 0.5, 1000.0)


def test_relative_errors():
    m = np.array([0.5, 1.0, 0.5])
    E = np.array([1.0, -1.0, 1.0])
    assert relative_errors(m, E, E) == {"L1": 0.0, "L2": 0.0}
    assert relative_errors(m, E + 0.1, E)["L1"] == pytest.approx(0.1)
    # hand case: errors (0, 0.2, 0.4) on exact (1, 2, 2)
    out = relative_errors(m, np.array([1.0, 2.2, 2.4]), np.array([1.0, 2.0, 2.0]))
    assert out["L1"] == pytest.approx((0.2 + 0.2) / (0.5 + 2 + 1))
    assert out["L2"] == pytest.approx(np.sqrt((0.04 + 0.08) / (0.5 + 4 + 2)))
    # systems: componentwise relative errors are summed
    S = np.stack([E, 2 * E], axis=1)
    assert relative_errors(m, S + [0.1, 0.0], S)["L1"] == pytest.approx(0.1)
    with pytest.raises(ValueError):
        relative_errors(m, E, np.zeros(3))


def test_convergence_rates():
    r = convergence_rates([0.1, 0.05, 0.025], [2e-2, 1e-2, 1e-2])
    assert np.isnan(r[0])
    assert r[1] == pytest.approx(1.0)
    assert r[2] == pytest.approx(0.0)


def test_convergence_table_reproduces_published_rates():
    dofs = [51, 101, 201, 401, 801, 1601]
    errs = [1.31e-1, 1.18e-1, 4.93e-2, 3.65e-2, 1.77e-2, 7.76e-3]
    printed = [0.15, 1.25, 0.43, 1.05, 1.19]
    # the printed errors carry three digits, so the rates agree to about 0.01
    rows = convergence_table(dofs, errs)
    assert [row["dofs"] for row in rows] == dofs
    np.testing.assert_allclose([row["rate"] for row in rows[1:]], printed, atol=0.01)
