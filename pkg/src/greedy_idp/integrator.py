"""Forward Euler and SSP-RK3 graph-viscosity time stepping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, ConfigurationError, NothingToUpdate
from .greedy import EPSILON, ViscosityMatrix, assemble_viscosity
from .mesh import GraphMesh
from .rng import RngStream
from .scalar_speeds import KruzhkovSelection
from .systems import PSystem, ScalarFlux, square_pair

__all__ = [
    "StepReport",
    "RunResult",
    "Scheme",
    "flux_divergence",
    "euler_step",
    "euler_step_barstate_oracle",
    "cfl_dt",
    "ssprk3_step",
    "run",
]

ENTROPY_RTOL = 1e-11
INVARIANT_ATOL = 1e-9


def _fluxes(system, U):
    """``F`` with shape ``(N, d)`` for scalars and ``(N, m, d)`` for systems."""
    return system.evaluate(U)


def _dot_c(F, c):
    # F: (E, d) or (E, m, d); c: (E, d)
    if F.ndim == 2:
        return np.sum(F * c, axis=1)
    return np.einsum("emd,ed->em", F, c)


def flux_divergence(mesh: GraphMesh, F) -> np.ndarray:
    """``sum_j F_j . c_ij`` for every dof (including ``j = i``)."""
    i, j = mesh.edges.T
    n = mesh.n_dofs
    out = _dot_c(F, mesh.c_diag)
    a = _dot_c(F[j], mesh.c_ij)
    b = _dot_c(F[i], mesh.c_ji)
    if out.ndim == 1:
        return out + np.bincount(i, a, n) + np.bincount(j, b, n)
    for k in range(out.shape[1]):
        out[:, k] += np.bincount(i, a[:, k], n) + np.bincount(j, b[:, k], n)
    return out


def _diffusion(mesh: GraphMesh, d, V) -> np.ndarray:
    """``sum_{j != i} d_ij (V_j - V_i)``."""
    i, j = mesh.edges.T
    n = mesh.n_dofs
    diff = V[j] - V[i]
    if diff.ndim == 1:
        w = d * diff
        return np.bincount(i, w, n) - np.bincount(j, w, n)
    w = d[:, None] * diff
    return np.stack([np.bincount(i, w[:, k], n) - np.bincount(j, w[:, k], n)
                     for k in range(w.shape[1])], axis=1)


def euler_step(mesh: GraphMesh, system, U, D: ViscosityMatrix, dt: float) -> np.ndarray:
    """One low-order forward Euler step; pinned dofs keep their values."""
    U = np.asarray(U, dtype=float)
    rhs = -flux_divergence(mesh, _fluxes(system, U)) + _diffusion(mesh, D.d, U)
    m = mesh.lumped_mass if U.ndim == 1 else mesh.lumped_mass[:, None]
    out = U + (dt / m) * rhs
    out[mesh.pinned] = U[mesh.pinned]
    return out


def euler_step_barstate_oracle(mesh: GraphMesh, system, U, D: ViscosityMatrix, dt: float) -> np.ndarray:
    """The same update written as a convex combination of bar states (slow, for tests)."""
    U = np.asarray(U, dtype=float)
    F = _fluxes(system, U)
    out = U.copy()
    for e, (i, j) in enumerate(mesh.edges):
        d = D.d[e]
        if d == 0:
            continue
        for a, b, c in ((i, j, mesh.c_ij[e]), (j, i, mesh.c_ji[e])):
            bar = 0.5 * (U[a] + U[b]) - _dot_c((F[b] - F[a])[None], c[None])[0] / (2.0 * d)
            w = 2.0 * dt * d / mesh.lumped_mass[a]
            out[a] = out[a] + w * (bar - U[a])
    out[mesh.pinned] = U[mesh.pinned]
    return out


def cfl_dt(mesh: GraphMesh, D: ViscosityMatrix, cfl: float) -> float:
    """``cfl * min_i m_i / (2 sum_{j != i} d_ij)`` over the free dofs."""
    if not 0 < cfl <= 1:
        raise ConfigurationError(f"CFL number must lie in (0, 1], got {cfl}")
    s = D.row_sums()
    free = ~mesh.pinned & (s > 0)
    if not free.any():
        raise NothingToUpdate("no free dof has a positive viscosity")
    return float(cfl * np.min(mesh.lumped_mass[free] / (2.0 * s[free])))


@dataclass
class StageCheck:
    max_principle: float = 0.0
    entropy: float = 0.0
    w_plus: float = 0.0
    w_minus: float = 0.0


@dataclass
class StepReport:
    step: int
    t: float
    dt: float
    mass: np.ndarray
    max_principle_violation: float = 0.0
    entropy_violation: float = 0.0
    w_plus_violation: float = 0.0
    w_minus_violation: float = 0.0
    min_v: float = float("nan")
    restarts: int = 0
    u_min: float = float("nan")
    u_max: float = float("nan")


@dataclass
class RunResult:
    U: np.ndarray
    t: float
    steps: int
    reports: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (t, U)


@dataclass
class Scheme:
    """Everything the stepper needs besides the mesh and the state."""

    system: object
    mode: str = "greedy"
    entropy: KruzhkovSelection | None = None
    rng: RngStream | None = None
    epsilon: float = EPSILON
    cfl: float = 0.5
    checks: bool = True

    def viscosity(self, mesh, U, step, stage) -> ViscosityMatrix:
        theta = None
        if self.entropy is not None and self.entropy.kind == "random":
            if self.rng is None:
                raise ConfigurationError("random entropy selection needs an RngStream")
            theta = self.rng.theta(step, stage, mesh.n_dofs)
        return assemble_viscosity(mesh, self.system, U, self.mode, self.entropy, theta, self.epsilon)


def _entropy_residual(mesh, system, scheme, U, Unew, D, dt) -> float:
    """Largest scaled violation of the discrete entropy inequality at free dofs."""
    if isinstance(system, ScalarFlux):
        if scheme.mode == "roe-only" or scheme.entropy is None:
            return 0.0
        if scheme.entropy.kind != "square":
            # q depends on k_i; evaluate per (i, j) with the row's k
            return _kruzhkov_residual(mesh, system, U, Unew, D.k, D, dt)
        pair = square_pair(system)
        etaU, etaN = pair.eta(U), pair.eta(Unew)
        qU = pair.q(U)
    else:
        etaU = system.entropy(U[:, 0], U[:, 1])
        etaN = system.entropy(Unew[:, 0], Unew[:, 1])
        qU = system.entropy_flux(U[:, 0], U[:, 1])[:, None]
    i, j = mesh.edges.T
    n = mesh.n_dofs
    div = flux_divergence(mesh, qU)
    visc = _diffusion(mesh, D.d, etaU)
    # magnitudes of the summands, before any cancellation
    div_abs = (np.abs(_dot_c(qU, mesh.c_diag)) + np.bincount(i, np.abs(_dot_c(qU[j], mesh.c_ij)), n)
               + np.bincount(j, np.abs(_dot_c(qU[i], mesh.c_ji)), n))
    w_abs = D.d * (np.abs(etaU[i]) + np.abs(etaU[j]))
    visc_abs = np.bincount(i, w_abs, n) + np.bincount(j, w_abs, n)
    w = mesh.lumped_mass / dt
    scale = w * (np.abs(etaN) + np.abs(etaU)) + div_abs + visc_abs
    return _excess(mesh, w * (etaN - etaU) + div - visc, scale)


def _excess(mesh, res, scale) -> float:
    """Positive part of the residual beyond ``ENTROPY_RTOL * scale`` (roundoff allowance)."""
    free = ~mesh.pinned
    return float(np.max(np.maximum(res[free] - ENTROPY_RTOL * scale[free], 0.0), initial=0.0))


def _kruzhkov_residual(mesh, flux, U, Unew, k, D, dt) -> float:
    i, j = mesh.edges.T
    n = mesh.n_dofs
    fU = flux.evaluate(U)
    fk = flux.evaluate(k)
    etaU = np.abs(U - k)
    etaN = np.abs(Unew - k)
    # q_{k_a}(U_b) . c_ab for both orientations, plus the diagonal term
    q_diag = np.sign(U - k)[:, None] * (fU - fk)
    diag = np.sum(q_diag * mesh.c_diag, axis=1)
    q_ij = np.sign(U[j] - k[i])[:, None] * (fU[j] - fk[i])
    q_ji = np.sign(U[i] - k[j])[:, None] * (fU[i] - fk[j])
    a = np.sum(q_ij * mesh.c_ij, axis=1)
    b = np.sum(q_ji * mesh.c_ji, axis=1)
    div = diag + np.bincount(i, a, n) + np.bincount(j, b, n)
    e_ij = np.abs(U[j] - k[i]) - np.abs(U[i] - k[i])
    e_ji = np.abs(U[i] - k[j]) - np.abs(U[j] - k[j])
    visc = np.bincount(i, D.d * e_ij, n) + np.bincount(j, D.d * e_ji, n)

    # |u - k| and f(u) - f(k) cancel near u = k, so the allowance uses the
    # magnitudes they are formed from
    def mag(F, c):
        return np.sum(np.abs(F) * np.abs(c), axis=1)

    aU, afU, afk = np.abs(U), np.abs(fU), np.abs(fk)
    div_abs = (mag(afU + afk, mesh.c_diag) + np.bincount(i, mag(afU[j] + afk[i], mesh.c_ij), n)
               + np.bincount(j, mag(afU[i] + afk[j], mesh.c_ji), n))
    visc_abs = (np.bincount(i, D.d * (aU[i] + aU[j] + np.abs(k[i])), n)
                + np.bincount(j, D.d * (aU[i] + aU[j] + np.abs(k[j])), n))
    w = mesh.lumped_mass / dt
    scale = w * (aU + np.abs(Unew) + np.abs(k)) + div_abs + visc_abs
    return _excess(mesh, w * (etaN - etaU) + div - visc, scale)


def _stage_checks(mesh, scheme, U, Unew, D, dt) -> StageCheck:
    system = scheme.system
    out = StageCheck()
    free = ~mesh.pinned
    if isinstance(system, ScalarFlux):
        lo, hi = mesh.stencil_min_max(U)
        viol = np.maximum(Unew - hi, lo - Unew)
        out.max_principle = float(np.max(np.maximum(viol[free], 0.0), initial=0.0))
        if scheme.mode != "roe-only":
            out.entropy = _entropy_residual(mesh, system, scheme, U, Unew, D, dt)
    else:
        wm, wp = system.riemann_invariants(U[:, 0], U[:, 1])
        wm_lo, _ = mesh.stencil_min_max(wm)
        _, wp_hi = mesh.stencil_min_max(wp)
        nm, np_ = system.riemann_invariants(Unew[:, 0], Unew[:, 1])
        out.w_plus = float(np.max(np.maximum(np_ - wp_hi - INVARIANT_ATOL, 0.0)[free], initial=0.0))
        out.w_minus = float(np.max(np.maximum(wm_lo - nm - INVARIANT_ATOL, 0.0)[free], initial=0.0))
        out.entropy = _entropy_residual(mesh, system, scheme, U, Unew, D, dt)
    return out


def _admissible(system, U, step, stage):
    if isinstance(system, PSystem):
        try:
            system.check_admissible(U)
        except AdmissibilityError as exc:
            raise AdmissibilityError(f"step {step}, stage {stage}: {exc}") from None
    elif not np.all(np.isfinite(U)):
        raise AdmissibilityError(f"step {step}, stage {stage}: non-finite state")


class _StageTooLarge(Exception):
    def __init__(self, limit):
        self.limit = limit


def _stage_limit(mesh, D) -> float:
    s = D.row_sums()
    free = ~mesh.pinned & (s > 0)
    return float(np.min(mesh.lumped_mass[free] / (2.0 * s[free]), initial=np.inf))


def ssprk3_step(mesh: GraphMesh, scheme: Scheme, U, step: int = 0, dt_max: float = np.inf,
                max_restarts: int = 20):
    """Three-stage SSP Runge-Kutta step; the viscosity is rebuilt at every stage.

    The step size comes from the first stage and is held fixed. If a later
    stage's viscosity makes that step exceed its own limit
    ``min_i m_i / (2 sum_j d_ij)``, the step restarts with ``cfl`` times
    the offending limit. Returns ``(U_new, dt, checks, restarts)`` where
    ``checks`` is the worst :class:`StageCheck`.
    """
    U = np.asarray(U, dtype=float)
    D0 = scheme.viscosity(mesh, U, step, 0)
    dt = min(cfl_dt(mesh, D0, scheme.cfl), dt_max)
    for restart in range(max_restarts + 1):
        try:
            Unew, worst = _rk3(mesh, scheme, U, D0, dt, step)
            return Unew, dt, worst, restart
        except _StageTooLarge as exc:
            dt = min(dt, scheme.cfl * exc.limit)
    raise AdmissibilityError(f"step {step}: stage CFL still violated after {max_restarts} restarts")


def _rk3(mesh, scheme, U, D0, dt, step):
    system = scheme.system
    worst = StageCheck()

    def stage(V, D, k):
        if k > 0 and dt > _stage_limit(mesh, D):
            raise _StageTooLarge(_stage_limit(mesh, D))
        Vn = euler_step(mesh, system, V, D, dt)
        _admissible(system, Vn, step, k)
        if scheme.checks:
            c = _stage_checks(mesh, scheme, V, Vn, D, dt)
            for name in ("max_principle", "entropy", "w_plus", "w_minus"):
                setattr(worst, name, max(getattr(worst, name), getattr(c, name)))
        return Vn

    U1 = stage(U, D0, 0)
    U2 = 0.75 * U + 0.25 * stage(U1, _viscosity_or_zero(scheme, mesh, U1, step, 1), 1)
    U3 = U / 3.0 + 2.0 / 3.0 * stage(U2, _viscosity_or_zero(scheme, mesh, U2, step, 2), 2)
    U3[mesh.pinned] = U[mesh.pinned]
    _admissible(system, U3, step, 3)
    return U3, worst


def _viscosity_or_zero(scheme, mesh, U, step, stage):
    try:
        return scheme.viscosity(mesh, U, step, stage)
    except NothingToUpdate:
        return ViscosityMatrix(mesh=mesh, d=np.zeros(mesh.n_edges), lam_ij=np.zeros(mesh.n_edges),
                               lam_ji=np.zeros(mesh.n_edges), lambda_eps=0.0, mode=scheme.mode)


def total_mass(mesh: GraphMesh, U) -> np.ndarray:
    m = mesh.lumped_mass
    return np.atleast_1d(m @ U)


def run(mesh: GraphMesh, scheme: Scheme, U0, t_final: float, t0: float = 0.0,
        snapshot_times=(), max_steps: int = 10_000_000, on_step=None) -> RunResult:
    """Integrate to ``t_final`` with SSP-RK3.

    ``on_step(report, U)`` is called after each step. A state whose
    wave speeds all vanish does not change, so the loop jumps to the end.
    Inadmissible states raise :class:`AdmissibilityError`.
    """
    U = np.array(U0, dtype=float, copy=True)
    _admissible(scheme.system, U, 0, 0)
    t = float(t0)
    snaps = sorted(float(s) for s in snapshot_times)
    result = RunResult(U=U, t=t, steps=0)
    step = 0
    while t < t_final * (1 - 1e-14) and step < max_steps:
        while snaps and snaps[0] <= t:
            result.snapshots.append((snaps.pop(0), U.copy()))
        horizon = min(t_final, snaps[0]) if snaps else t_final
        try:
            U, dt, chk, restarts = ssprk3_step(mesh, scheme, U, step, dt_max=horizon - t)
        except NothingToUpdate:
            t = t_final
            break
        t = t + dt if horizon - t > dt else horizon
        step += 1
        rep = StepReport(step=step, t=t, dt=dt, mass=total_mass(mesh, U),
                         max_principle_violation=chk.max_principle, entropy_violation=chk.entropy,
                         w_plus_violation=chk.w_plus, w_minus_violation=chk.w_minus,
                         min_v=float(U[:, 0].min()) if U.ndim == 2 else float("nan"),
                         restarts=restarts,
                         u_min=float(U.min()) if U.ndim == 1 else float(U[:, 1].min()),
                         u_max=float(U.max()) if U.ndim == 1 else float(U[:, 1].max()))
        result.reports.append(rep)
        if on_step is not None:
            on_step(rep, U)
    for s in snaps:
        result.snapshots.append((s, U.copy()))
    result.U, result.t, result.steps = U, t, step
    return result
