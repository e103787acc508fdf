import numpy as np
import pytest

from greedy_idp.errors import ConfigurationError, NothingToUpdate
from greedy_idp.greedy import ViscosityMatrix, assemble_viscosity
from greedy_idp.integrator import (
    Scheme,
    cfl_dt,
    euler_step,
    euler_step_barstate_oracle,
    run,
    ssprk3_step,
    total_mass,
)
from greedy_idp.mesh import build_1d_uniform, build_2d_p1, periodic_dof_map, structured_triangulation
from greedy_idp.rng import RngStream
from greedy_idp.scalar_speeds import KruzhkovSelection
from greedy_idp.systems import KPP2D, PWLINEAR, SINE, PSystem, ScalarFlux

PSYS = PSystem()


def _viscosity(mesh, d):
    d = np.broadcast_to(np.asarray(d, dtype=float), (mesh.n_edges,)).copy()
    return ViscosityMatrix(mesh=mesh, d=d, lam_ij=d, lam_ji=d, lambda_eps=0.0, mode="greedy")


def test_constant_field_is_unchanged():
    mesh = build_1d_uniform(12, (0, 1), "periodic")
    U = np.full(12, 1.7)
    D = assemble_viscosity(mesh, SINE, U, entropy=KruzhkovSelection("fixed"))
    np.testing.assert_allclose(euler_step(mesh, SINE, U, D, 0.01), U, rtol=0, atol=1e-15)
    U2 = np.tile([1.5, 0.2], (12, 1))
    D2 = assemble_viscosity(mesh, PSYS, U2)
    np.testing.assert_allclose(euler_step(mesh, PSYS, U2, D2, 0.01), U2, rtol=1e-15)


def test_three_dof_hand_computation():
    # dofs 0 | 1 | 2 on [0, 2], h = 1; only dof 1 moves
    mesh = build_1d_uniform(2, (0.0, 2.0), "pinned")
    U = np.array([1.0, 2.5, 3.0])
    D = _viscosity(mesh, [0.8, 1.1])
    dt = 0.1
    f = PWLINEAR.evaluate(U)[:, 0]  # 1, 1, 2
    # m_1 = 1; sum_j f_j c_1j = -f_0/2 + f_2/2; viscosity 0.8 (U0 - U1) + 1.1 (U2 - U1)
    expect = 2.5 - dt * ((-0.5 * f[0] + 0.5 * f[2]) - (0.8 * (1.0 - 2.5) + 1.1 * (3.0 - 2.5)))
    out = euler_step(mesh, PWLINEAR, U, D, dt)
    assert out[1] == pytest.approx(expect, rel=1e-15)
    assert out[0] == 1.0 and out[2] == 3.0


def test_barstate_form_matches_on_random_fields():
    rng = np.random.default_rng(7)
    xy, tri = structured_triangulation(8, 8, (-1, 1), (-1, 1), jitter=0.25, seed=1)
    mesh2 = build_2d_p1(xy, tri, periodic_dof_map(8, 8))
    mesh1 = build_1d_uniform(30, (0, 1), "pinned")
    for trial in range(100):
        if trial % 3 == 0:
            mesh, system = mesh1, PSYS
            U = np.stack([rng.uniform(0.3, 3, mesh.n_dofs), rng.uniform(-1, 1, mesh.n_dofs)], axis=1)
            D = assemble_viscosity(mesh, system, U)
        else:
            mesh, system = (mesh1, SINE) if trial % 3 == 1 else (mesh2, KPP2D)
            U = rng.uniform(0, 10, mesh.n_dofs)
            D = assemble_viscosity(mesh, system, U, entropy=KruzhkovSelection("random"),
                                   theta=rng.uniform(size=mesh.n_dofs))
        dt = cfl_dt(mesh, D, 1.0)
        a = euler_step(mesh, system, U, D, dt)
        b = euler_step_barstate_oracle(mesh, system, U, D, dt)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(U).max())


def test_mass_conserved_on_periodic_mesh():
    xy, tri = structured_triangulation(10, 10, (0, 1), (0, 1), jitter=0.2, seed=2)
    mesh = build_2d_p1(xy, tri, periodic_dof_map(10, 10))
    U = np.random.default_rng(3).uniform(0.5, 10, mesh.n_dofs)
    D = assemble_viscosity(mesh, KPP2D, U, entropy=KruzhkovSelection("fixed"))
    out = euler_step(mesh, KPP2D, U, D, cfl_dt(mesh, D, 0.9))
    assert total_mass(mesh, out)[0] == pytest.approx(total_mass(mesh, U)[0], rel=1e-12)


def test_cfl_dt():
    mesh = build_1d_uniform(10, (0, 1), "periodic")
    d = 0.3
    D = _viscosity(mesh, d)
    h = 0.1
    assert cfl_dt(mesh, D, 0.5) == pytest.approx(0.5 * h / (4 * d))
    assert cfl_dt(mesh, _viscosity(mesh, 2 * d), 0.5) == pytest.approx(0.5 * h / (8 * d))
    with pytest.raises(ConfigurationError):
        cfl_dt(mesh, D, 1.5)
    with pytest.raises(NothingToUpdate):
        cfl_dt(mesh, _viscosity(mesh, 0.0), 0.5)


def test_cfl_dt_skips_pinned_rows():
    mesh = build_1d_uniform(4, (0, 1), "pinned")
    D = _viscosity(mesh, [1.0, 0.01, 0.01, 1.0])
    # the end dofs would give (h/2) / 2 = 0.0625; the free dof 1 gives h / 2.02
    assert cfl_dt(mesh, D, 1.0) == pytest.approx(0.25 / 2.02)


def test_scalar_euler_respects_local_bounds():
    rng = np.random.default_rng(5)
    mesh = build_1d_uniform(60, (0, 1), "periodic")
    for flux in (PWLINEAR, SINE):
        for _ in range(20):
            U = rng.uniform(-3, 5, 60)
            D = assemble_viscosity(mesh, flux, U, entropy=KruzhkovSelection("random"),
                                   theta=rng.uniform(size=60))
            out = euler_step(mesh, flux, U, D, cfl_dt(mesh, D, 1.0))
            lo, hi = mesh.stencil_min_max(U)
            assert np.all(out >= lo - 1e-12) and np.all(out <= hi + 1e-12)


def test_ssprk3_constant_field_is_fixed_point():
    mesh = build_1d_uniform(10, (0, 1), "periodic")
    scheme = Scheme(system=SINE, entropy=KruzhkovSelection("fixed"))
    U = np.full(10, 0.4)
    out, dt, checks, restarts = ssprk3_step(mesh, scheme, U)
    np.testing.assert_allclose(out, U, atol=1e-15)
    assert dt > 0 and restarts == 0


def test_ssprk3_is_third_order_for_linear_advection():
    """Local error of one step against the semi-discrete solution operator."""
    c = 1.0
    linear = ScalarFlux("linear", 1, lambda u: c * np.asarray(u, dtype=float),
                        lambda u: (np.full(np.shape(u), c), np.full(np.shape(u), c)))
    n = 16
    mesh = build_1d_uniform(n, (0, 1), "periodic")
    U0 = np.sin(2 * np.pi * mesh.coords[:, 0])
    D = assemble_viscosity(mesh, linear, U0, mode="roe-only")
    # U' = A U for this fixed viscosity; compare with expm by eigen-decomposition
    A = np.zeros((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        A[:, k] = (euler_step(mesh, linear, e, D, 1.0) - e)
    w, V = np.linalg.eig(A)
    scheme = Scheme(system=linear, mode="roe-only", cfl=1.0)
    errs = []
    for dt in (0.02, 0.01):
        exact = np.real(V @ (np.exp(w * dt) * np.linalg.solve(V, U0)))
        out, used, _, _ = ssprk3_step(mesh, scheme, U0, dt_max=dt)
        assert used == dt
        errs.append(np.abs(out - exact).max())
    assert np.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.2)


def test_run_reports_and_snapshots():
    mesh = build_1d_uniform(50, (-1, 1), "pinned")
    x = mesh.coords[:, 0]
    U0 = np.where(x <= 0, 3 * np.pi, 0.0)
    scheme = Scheme(system=SINE, entropy=KruzhkovSelection("random"), rng=RngStream(1), cfl=0.5)
    seen = []
    res = run(mesh, scheme, U0, 0.2, snapshot_times=[0.0, 0.1, 0.2],
              on_step=lambda rep, U: seen.append(rep.step))
    assert res.t == pytest.approx(0.2)
    assert [round(t, 12) for t, _ in res.snapshots] == [0.0, 0.1, 0.2]
    assert seen == list(range(1, res.steps + 1))
    assert all(r.max_principle_violation == 0.0 for r in res.reports)
    assert all(r.entropy_violation == 0.0 for r in res.reports)
    assert res.U.min() >= 0.0 and res.U.max() <= 3 * np.pi


def test_run_is_deterministic():
    mesh = build_1d_uniform(40, (-1, 1), "pinned")
    x = mesh.coords[:, 0]
    U0 = np.where(x <= 0, 3 * np.pi, 0.0)
    outs = []
    for _ in range(2):
        scheme = Scheme(system=SINE, entropy=KruzhkovSelection("random"), rng=RngStream(3))
        outs.append(run(mesh, scheme, U0, 0.1).U)
    assert np.array_equal(outs[0], outs[1])
    scheme = Scheme(system=SINE, entropy=KruzhkovSelection("random"), rng=RngStream(4))
    assert not np.array_equal(outs[0], run(mesh, scheme, U0, 0.1).U)


def test_psystem_step_keeps_riemann_invariant_bounds():
    rng = np.random.default_rng(8)
    mesh = build_1d_uniform(40, (0, 1), "periodic")
    scheme = Scheme(system=PSYS)
    for _ in range(10):
        U = np.stack([rng.uniform(0.2, 4, 40), rng.uniform(-2, 2, 40)], axis=1)
        out, dt, checks, _ = ssprk3_step(mesh, scheme, U)
        assert checks.w_plus == 0.0 and checks.w_minus == 0.0 and checks.entropy == 0.0
        assert np.all(out[:, 0] > 0)


def test_random_entropy_needs_rng():
    mesh = build_1d_uniform(10, (0, 1), "periodic")
    scheme = Scheme(system=SINE, entropy=KruzhkovSelection("random"))
    with pytest.raises(ConfigurationError):
        scheme.viscosity(mesh, np.arange(10.0), 0, 0)
