"""Randomized property suite over wave speeds and single Euler steps.

Trial ``t`` of check group ``g`` draws from
``numpy.random.default_rng([seed, g, t])``, so a failing trial can be
replayed on its own. Faults can be injected to check
that the suite notices broken schemes: ``halve-lambda`` halves every
greedy speed, ``asymmetric-d`` perturbs one side of each viscosity pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import psystem_speeds as ps
from . import scalar_speeds as ss
from .errors import NothingToUpdate
from .greedy import CHECK_RTOL, EPSILON, assemble_viscosity, bar_state
from .integrator import Scheme, _stage_checks, cfl_dt, euler_step, euler_step_barstate_oracle
from .mesh import build_1d_uniform, build_2d_p1, periodic_dof_map, structured_triangulation
from .scalar_speeds import KruzhkovSelection
from .systems import KPP2D, PWLINEAR, SINE, PSystem, square_pair

__all__ = ["FAULTS", "PropertyResult", "PropertyReport", "property_suite"]

FAULTS = ("halve-lambda", "asymmetric-d")
ORACLE_RTOL = 1e-12
BOUND_RTOL = 1e-12
MASS_RTOL = 1e-12
CONVEX_RTOL = 1e-10

PROPERTIES = (
    "bar-state admissibility at the greedy speed",
    "ladder monotonicity",
    "entropy functional convexity",
    "hat bound above the maximum speed",
    "greedy viscosity below GMS viscosity",
    "Euler step equals bar-state form",
    "scalar local maximum principle",
    "scalar per-dof entropy inequality",
    "p-system local Riemann-invariant bounds",
    "mass conservation on periodic meshes",
)


@dataclass
class PropertyResult:
    name: str
    checked: int = 0
    violations: int = 0
    worst: float = 0.0
    trials: list = field(default_factory=list)

    def record(self, bad, excess, trial_ids):
        bad = np.atleast_1d(bad)
        excess = np.atleast_1d(np.asarray(excess, dtype=float))
        trial_ids = np.atleast_1d(trial_ids)
        self.checked += bad.size
        self.violations += int(np.count_nonzero(bad))
        if bad.any():
            self.worst = max(self.worst, float(np.max(excess[bad])))
            room = 10 - len(self.trials)
            if room > 0:
                self.trials.extend(int(t) for t in trial_ids[bad][:room])


@dataclass
class PropertyReport:
    seed: int
    trials: int
    fault: str | None
    results: dict

    @property
    def passed(self) -> bool:
        return all(r.violations == 0 for r in self.results.values())

    @property
    def total_violations(self) -> int:
        return sum(r.violations for r in self.results.values())

    def to_text(self) -> str:
        head = f"property suite: seed={self.seed} trials={self.trials}"
        if self.fault:
            head += f" fault={self.fault}"
        lines = [head]
        for r in self.results.values():
            status = "PASS" if r.violations == 0 else "FAIL"
            line = f"{status} {r.name}: {r.violations} of {r.checked} violated"
            if r.violations:
                line += f", worst excess {r.worst:.3e}, replay with seed={self.seed} trial in {r.trials}"
            lines.append(line)
        lines.append(f"total violations: {self.total_violations}")
        return "\n".join(lines)


def _trial_rngs(seed, group, trials):
    return [np.random.default_rng([seed, group, t]) for t in range(trials)]


# --- pairwise checks -------------------------------------------------------

def _psystem_pairs(rngs):
    rows = []
    for g in rngs:
        v = np.exp(g.uniform(np.log(1e-2), np.log(1e2), 2))
        u = g.uniform(-5.0, 5.0, 2)
        if g.random() < 0.05:
            v[1], u[1] = v[0], u[0]
        elif g.random() < 0.05:
            v[1] = v[0] * (1.0 + 1e-9 * g.standard_normal())
        rows.append((v[0], u[0], v[1], u[1], 1.0 if g.random() < 0.5 else -1.0))
    return np.array(rows)


def _check_psystem_pairs(res, rngs, ids, fault, sys=None):
    sys = sys or PSystem()
    P = _psystem_pairs(rngs)
    UL, UR, n = P[:, 0:2], P[:, 2:4], P[:, 4]
    hat = ps.lambda_max_hat(sys, n, UL, UR)
    floor = EPSILON * hat
    out = ps.greedy_speeds(sys, n, UL, UR, floor)
    lam = out["lambda_greedy"]
    lmax = ps.lambda_max_exact(sys, n, UL, UR)
    vL, uL, vR, uR = ps.reduce_states(n, UL, UR)

    # ladder
    chain = [out["lambda_eps"], out["lambda1"], out["lambda2"], out["lambda3"], out["lambda_e"], out["lambda_sharp"]]
    gap = np.max([np.maximum(a - b, 0.0) / b for a, b in zip(chain[:-1], chain[1:])], axis=0)
    res["ladder monotonicity"].record(gap > 0.0, gap, ids)

    # admissibility of the bar state (and the entropy inequality) at the greedy speed
    test = lam * (0.5 if fault == "halve-lambda" else 1.0)
    vb, ub = ps.bar_state(sys, test, vL, uL, vR, uR)
    ok = vb > 0
    wmL, wpL = sys.riemann_invariants(vL, uL)
    wmR, wpR = sys.riemann_invariants(vR, uR)
    wm, wp = sys.riemann_invariants(np.where(ok, vb, 1.0), ub)
    wscale = np.maximum(np.abs(wpL) + np.abs(wpR) + np.abs(wmL) + np.abs(wmR), 1.0)
    ex_w = np.maximum(wp - np.maximum(wpL, wpR), np.minimum(wmL, wmR) - wm) / wscale
    phi = ps.entropy_functional(sys, test, vL, uL, vR, uR)
    escale = (np.abs(sys.entropy(vL, uL)) + np.abs(sys.entropy(vR, uR))
              + np.abs(sys.entropy_flux(vR, uR) - sys.entropy_flux(vL, uL)) / test)
    ex_e = phi / escale
    excess = np.where(ok, np.maximum(ex_w, ex_e), np.inf)
    res["bar-state admissibility at the greedy speed"].record(excess > CHECK_RTOL, excess, ids)

    # hat bound and GMS comparison
    ex_hat = (lmax - hat) / hat
    res["hat bound above the maximum speed"].record(ex_hat > 1e-12, ex_hat, ids)
    gms = np.maximum(lmax, floor)
    ex_gms = (lam - gms) / gms
    res["greedy viscosity below GMS viscosity"].record(ex_gms > CHECK_RTOL, ex_gms, ids)

    # convexity of t -> Phi(1/t) on the interval where the bar state is admissible
    l1 = np.maximum(ps.lambda1(np.stack([vL, uL], -1), np.stack([vR, uR], -1), 0.0), 1e-300)
    t_hi = np.minimum(0.999 / l1, 1e6)
    ta = np.array([g.uniform(0, 1) for g in rngs]) * t_hi
    tb = np.array([g.uniform(0, 1) for g in rngs]) * t_hi
    ta, tb = np.maximum(ta, 1e-12), np.maximum(tb, 1e-12)
    fa = ps.entropy_functional(sys, 1.0 / ta, vL, uL, vR, uR)
    fb = ps.entropy_functional(sys, 1.0 / tb, vL, uL, vR, uR)
    fm = ps.entropy_functional(sys, 2.0 / (ta + tb), vL, uL, vR, uR)
    cscale = np.abs(fa) + np.abs(fb) + np.abs(sys.entropy(vL, uL)) + np.abs(sys.entropy(vR, uR))
    ex_c = (fm - 0.5 * (fa + fb)) / cscale
    res["entropy functional convexity"].record(ex_c > CONVEX_RTOL, ex_c, ids)


def _check_scalar_pairs(res, rngs, ids, fault):
    fluxes = (SINE, PWLINEAR, KPP2D)
    for which, flux in enumerate(fluxes):
        sel = [t for t, g in enumerate(rngs) if t % 3 == which]
        if not sel:
            continue
        G = [rngs[t] for t in sel]
        tid = ids[sel]
        u = np.array([g.uniform(-1.0, 4.0 * np.pi, 2) for g in G])
        uL, uR = u[:, 0], u[:, 1]
        if flux.dim == 1:
            n = np.array([[1.0 if g.random() < 0.5 else -1.0] for g in G])
        else:
            ang = np.array([g.uniform(0, 2 * np.pi) for g in G])
            n = np.stack([np.cos(ang), np.sin(ang)], -1)
        theta = np.array([g.uniform(0, 1) for g in G])
        k = ss.select_k(theta, np.minimum(uL, uR), np.maximum(uL, uR))
        lam12 = ss.lambda12(flux, n, uL, uR)
        for label, lam in (("kruzhkov", ss.lambda_kruzhkov(flux, k, n, uL, uR)),
                           ("square", ss.lambda_square(flux, n, uL, uR))):
            floor = EPSILON * np.maximum(lam.max(), 1e-300)
            lam = np.maximum(lam, floor)
            gap = np.maximum(lam12 - lam, 0.0) / lam
            res["ladder monotonicity"].record(gap > 0, gap, tid)
            test = lam * (0.5 if fault == "halve-lambda" else 1.0)
            ub = bar_state(flux, n, uL, uR, test)
            lo, hi = np.minimum(uL, uR), np.maximum(uL, uR)
            scale = np.maximum(np.abs(uL) + np.abs(uR), 1.0)
            ex_b = np.maximum(ub - hi, lo - ub) / scale
            if label == "kruzhkov":
                etaL, etaR, etab = np.abs(uL - k), np.abs(uR - k), np.abs(ub - k)
                fk = flux.evaluate(k)
                qL = np.sign(uL - k)[:, None] * (flux.evaluate(uL) - fk)
                qR = np.sign(uR - k)[:, None] * (flux.evaluate(uR) - fk)
            else:
                if flux.dim > 1:
                    # no closed-form square-entropy flux in 2D; bounds only
                    res["bar-state admissibility at the greedy speed"].record(ex_b > BOUND_RTOL, ex_b, tid)
                    continue
                pair = square_pair(flux)
                etaL, etaR, etab = pair.eta(uL), pair.eta(uR), pair.eta(ub)
                qL, qR = pair.q(uL), pair.q(uR)
            dq = np.sum((qR - qL) * n, axis=-1)
            phi = etab - 0.5 * (etaL + etaR) + 0.5 * dq / test
            escale = np.abs(etaL) + np.abs(etaR) + np.abs(dq) / test + 1e-300
            ex = np.maximum(ex_b, phi / escale)
            res["bar-state admissibility at the greedy speed"].record(ex > CHECK_RTOL, ex, tid)
            if label == "kruzhkov":
                # t -> Phi_k(t) is convex: |.| of an affine map plus a linear term
                t_hi = 1.0 / np.maximum(lam12, 1e-3)
                ta = np.array([g.uniform(0, 1) for g in G]) * t_hi
                tb = np.array([g.uniform(0, 1) for g in G]) * t_hi

                def f(t):
                    ubt = 0.5 * (uL + uR) - 0.5 * t * np.sum((flux.evaluate(uR) - flux.evaluate(uL)) * n, -1)
                    return np.abs(ubt - k) - 0.5 * (etaL + etaR) + 0.5 * t * dq

                fa, fb, fm = f(ta), f(tb), f(0.5 * (ta + tb))
                cs = np.abs(fa) + np.abs(fb) + etaL + etaR + 1e-300
                ex_c = (fm - 0.5 * (fa + fb)) / cs
                res["entropy functional convexity"].record(ex_c > CONVEX_RTOL, ex_c, tid)


# --- single-step checks ----------------------------------------------------

def _mesh_pool():
    pool = []
    for cells in (4, 5, 7, 9, 12):
        pool.append(("1d", build_1d_uniform(cells, (0.0, 1.0), "periodic")))
    for side, jitter, seed in ((4, 0.2, 1), (5, 0.3, 2), (6, 0.25, 3)):
        xy, tri = structured_triangulation(side, side, (0.0, 1.0), (0.0, 1.0), jitter=jitter, seed=seed)
        pool.append(("2d", build_2d_p1(xy, tri, periodic_dof_map(side, side))))
    return pool


def _random_state(g, n, kind):
    if kind == "psystem":
        v = np.exp(g.uniform(np.log(0.2), np.log(5.0), n))
        u = g.uniform(-2.0, 2.0, n)
        if g.random() < 0.3:
            v[g.random(n) < 0.5] = v[0]
        return np.stack([v, u], -1)
    U = g.uniform(-1.0, 4.0 * np.pi, n)
    if g.random() < 0.3:
        levels = g.uniform(-1.0, 4.0 * np.pi, 2)
        U = levels[(g.random(n) < 0.5).astype(int)]
    return U


def _check_steps(res, rngs, ids, fault, psys=None):
    psys = psys or PSystem()
    pool = _mesh_pool()
    strategies = (KruzhkovSelection("random"), KruzhkovSelection("fixed", 0.5), KruzhkovSelection("square"))
    for g, t in zip(rngs, ids):
        dim, mesh = pool[int(g.integers(len(pool)))]
        if dim == "2d":
            system, kind = KPP2D, "scalar"
            entropy = strategies[int(g.integers(2))]
        elif g.random() < 0.4:
            system, kind, entropy = psys, "psystem", None
        else:
            system, kind = (SINE if g.random() < 0.5 else PWLINEAR), "scalar"
            entropy = strategies[int(g.integers(3))]
        U = _random_state(g, mesh.n_dofs, kind)
        theta = g.random(mesh.n_dofs)
        scheme = Scheme(system=system, mode="greedy", entropy=entropy, cfl=float(g.uniform(0.1, 1.0)))
        try:
            D = assemble_viscosity(mesh, system, U, "greedy", entropy, theta)
        except NothingToUpdate:
            continue
        if fault == "halve-lambda":
            D = replace(D, d=0.5 * D.d, lam_ij=0.5 * D.lam_ij, lam_ji=0.5 * D.lam_ji)
        dt = cfl_dt(mesh, D, scheme.cfl)
        Unew = euler_step(mesh, system, U, D, dt)
        if fault == "asymmetric-d":
            # the j side of every edge sees 10% more viscosity than the i side
            i, j = mesh.edges.T
            extra = np.zeros_like(Unew)
            w = (0.1 * D.d)[:, None] * (U[i] - U[j]) if U.ndim == 2 else 0.1 * D.d * (U[i] - U[j])
            np.add.at(extra, j, w)
            m = mesh.lumped_mass if U.ndim == 1 else mesh.lumped_mass[:, None]
            Unew = Unew + dt / m * extra

        oracle = euler_step_barstate_oracle(mesh, system, U, D, dt)
        ref = max(np.max(np.abs(oracle)), 1e-300)
        ex_o = float(np.max(np.abs(Unew - oracle))) / ref
        res["Euler step equals bar-state form"].record(ex_o > ORACLE_RTOL, ex_o, t)

        mass0 = mesh.lumped_mass @ U
        mass1 = mesh.lumped_mass @ Unew
        scale = mesh.lumped_mass @ np.abs(U)
        ex_m = float(np.max(np.abs(mass1 - mass0) / np.maximum(scale, 1e-300)))
        res["mass conservation on periodic meshes"].record(ex_m > MASS_RTOL, ex_m, t)

        chk = _stage_checks(mesh, scheme, U, Unew, D, dt)
        if kind == "scalar":
            bound = BOUND_RTOL * max(np.max(np.abs(U)), 1.0)
            ex_mp = chk.max_principle
            res["scalar local maximum principle"].record(ex_mp > bound, ex_mp, t)
            res["scalar per-dof entropy inequality"].record(chk.entropy > 0, chk.entropy, t)
        else:
            ex_w = max(chk.w_plus, chk.w_minus)
            res["p-system local Riemann-invariant bounds"].record(ex_w > 0, ex_w, t)


def property_suite(seed: int = 0, trials: int = 10_000, fault: str | None = None) -> PropertyReport:
    """Run every property on ``trials`` random instances each.

    Violations are counted and reported with the trial ids that produced
    them; nothing is raised.
    """
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; expected one of {FAULTS}")
    res = {name: PropertyResult(name) for name in PROPERTIES}
    ids = np.arange(trials)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        _check_psystem_pairs(res, _trial_rngs(seed, 1, trials), ids, fault)
        _check_scalar_pairs(res, _trial_rngs(seed, 2, trials), ids, fault)
        _check_steps(res, _trial_rngs(seed, 3, trials), ids, fault)
    return PropertyReport(seed=seed, trials=trials, fault=fault, results=res)
