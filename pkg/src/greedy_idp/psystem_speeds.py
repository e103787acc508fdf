"""Wave speeds for the p-system with a gamma-law pressure.

States are arrays whose last axis is ``(v, u)``. Everything is batched
over leading axes. The direction ``n = +-1`` is folded into the data
before any speed is computed: the Riemann problem along ``n`` with data
``(v_L, u_L), (v_R, u_R)`` is the one along ``+1`` with ``(v_L, n u_L),
(v_R, n u_R)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import WaveSpeedError
from .rootfind import bracket_min
from .systems import PSystem

__all__ = [
    "RiemannDiagnostics",
    "reduce_states",
    "phi",
    "dphi",
    "initial_guess",
    "lambda_max_exact",
    "lambda_max_hat",
    "bar_state",
    "lambda1",
    "lambda23",
    "lambda_entropy_psys",
    "greedy_speeds",
]

NEWTON_TOL = 1e-10
NEWTON_MAXITER = 100
CHECK_RTOL = 1e-9
# constraint values this far below zero (relative to the states' magnitude)
# are roundoff and count as satisfied; otherwise nearly equal states chase the cap
ROUNDOFF_RTOL = 64 * np.finfo(float).eps
# below this relative gap the secant slope is replaced by a midpoint tangent
_SECANT_RGAP = 1e-6


@dataclass
class RiemannDiagnostics:
    v_star: np.ndarray
    v0: np.ndarray
    phi_at_vmin: np.ndarray
    branch: np.ndarray  # True where both waves are shocks
    newton_iterates: list = field(default_factory=list)


def reduce_states(n, UL, UR):
    """Fold the direction into the velocities: ``(v, n u)``."""
    UL = np.asarray(UL, dtype=float)
    UR = np.asarray(UR, dtype=float)
    n = np.asarray(n, dtype=float)
    if n.ndim and n.shape[-1:] == (1,) and n.ndim == UL.ndim:
        n = n[..., 0]
    sign = np.sign(n)
    return UL[..., 0], sign * UL[..., 1], UR[..., 0], sign * UR[..., 1]


def _split(U):
    U = np.asarray(U, dtype=float)
    return U[..., 0], U[..., 1]


def _f_side(sys: PSystem, v, vz):
    shock = v <= vz
    with np.errstate(invalid="ignore"):
        s = -np.sqrt(np.maximum((sys.pressure(v) - sys.pressure(vz)) * (vz - v), 0.0))
        r = sys.tail_integral(vz) - sys.tail_integral(v)
    return np.where(shock, s, r)


def _df_side(sys: PSystem, v, vz):
    shock = v < vz
    g = (sys.pressure(v) - sys.pressure(vz)) * (vz - v)
    dg = sys.dpressure(v) * (vz - v) - (sys.pressure(v) - sys.pressure(vz))
    with np.errstate(divide="ignore", invalid="ignore"):
        s = -dg / (2.0 * np.sqrt(g))
    return np.where(shock & (g > 0), s, sys.sound_speed(v))


def phi(sys: PSystem, v, UL, UR):
    """``f_L(v) + f_R(v) + u_L - u_R`` for (already direction-folded) data."""
    vL, uL = _split(UL)
    vR, uR = _split(UR)
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise ValueError("phi is defined for v > 0 only")
    return _f_side(sys, v, vL) + _f_side(sys, v, vR) + uL - uR


def dphi(sys: PSystem, v, UL, UR):
    vL, _ = _split(UL)
    vR, _ = _split(UR)
    return _df_side(sys, v, vL) + _df_side(sys, v, vR)


def initial_guess(sys: PSystem, UL, UR):
    """Intersection of ``w_+ = max w_+`` and ``w_- = min w_-``; lies below ``v*``."""
    vL, uL = _split(UL)
    vR, uR = _split(UR)
    wmL, wpL = sys.riemann_invariants(vL, uL)
    wmR, wpR = sys.riemann_invariants(vR, uR)
    wp_max = np.maximum(wpL, wpR)
    wm_min = np.minimum(wmL, wmR)
    g = sys.gamma
    return (g * sys.r) ** (1.0 / (g - 1.0)) * (4.0 / ((g - 1.0) * (wp_max - wm_min))) ** (2.0 / (g - 1.0))


def _chord_speed(sys: PSystem, vmin, v):
    """``sqrt((p(vmin) - p(v)) / (v - vmin))`` for ``v < vmin``, stable near ``v = vmin``."""
    gap = vmin - v
    close = gap <= _SECANT_RGAP * vmin
    with np.errstate(divide="ignore", invalid="ignore"):
        chord = np.sqrt((sys.pressure(v) - sys.pressure(vmin)) / gap)
    return np.where(close, sys.sound_speed(0.5 * (v + vmin)), chord)


def lambda_max_hat(sys: PSystem, n, UL, UR):
    """Guaranteed upper bound on the maximum wave speed, no iteration."""
    vL, uL, vR, uR = reduce_states(n, UL, UR)
    vmin = np.minimum(vL, vR)
    v0 = initial_guess(sys, np.stack([vL, uL], -1), np.stack([vR, uR], -1))
    below = v0 < vmin
    near = below & (vmin - v0 <= _SECANT_RGAP * vmin)
    with np.errstate(divide="ignore", invalid="ignore"):
        chord = np.sqrt((sys.pressure(v0) - sys.pressure(vmin)) / (vmin - v0))
    # tangent at v0 bounds the secant from above when the gap is tiny
    chord = np.where(near, sys.sound_speed(np.minimum(v0, vmin)), chord)
    return np.where(below, chord, sys.sound_speed(vmin))


def lambda_max_exact(sys: PSystem, n, UL, UR, tol: float = NEWTON_TOL,
                     maxiter: int = NEWTON_MAXITER, return_diagnostics: bool = False):
    """Maximum wave speed of the Riemann problem.

    ``v*`` is found by Newton's method started from :func:`initial_guess`,
    which stays below ``v*`` because ``phi`` is increasing and concave.
    """
    vL, uL, vR, uR = reduce_states(n, UL, UR)
    L = np.stack([vL, uL], -1)
    R = np.stack([vR, uR], -1)
    vmin = np.minimum(vL, vR)
    phi_min = phi(sys, vmin, L, R)
    two_shock = phi_min > 0
    v0 = initial_guess(sys, L, R)
    v = np.where(two_shock, np.minimum(v0, vmin), vmin)
    iterates = [v.copy()]
    active = np.flatnonzero(np.ravel(two_shock))
    vf = v.reshape(-1)
    Lf, Rf = L.reshape(-1, 2), R.reshape(-1, 2)
    for _ in range(maxiter):
        if active.size == 0:
            break
        va = vf[active]
        step = phi(sys, va, Lf[active], Rf[active]) / dphi(sys, va, Lf[active], Rf[active])
        vnew = va - step
        vf[active] = vnew
        iterates.append(vf.reshape(v.shape).copy())
        active = active[np.abs(vnew - va) > tol * va]
    else:
        if active.size:
            raise WaveSpeedError("Newton iteration for v* did not converge", where=active[:10].tolist())
    v = vf.reshape(v.shape)
    lam = np.where(two_shock, _chord_speed(sys, vmin, np.minimum(v, vmin)), sys.sound_speed(vmin))
    if not return_diagnostics:
        return lam
    return lam, RiemannDiagnostics(
        v_star=np.where(two_shock, v, np.nan), v0=v0, phi_at_vmin=phi_min,
        branch=two_shock, newton_iterates=iterates,
    )


def bar_state(sys: PSystem, lam, vL, uL, vR, uR):
    """Components of the auxiliary state for direction-folded data."""
    t = 0.5 / np.asarray(lam, dtype=float)
    vbar = 0.5 * (vL + vR) + t * (uR - uL)
    ubar = 0.5 * (uL + uR) - t * (sys.pressure(vR) - sys.pressure(vL))
    return vbar, ubar


def lambda1(UL, UR, floor):
    """Smallest speed keeping the averaged specific volume positive."""
    vL, uL = _split(UL)
    vR, uR = _split(UR)
    return np.maximum((uL - uR) / (vL + vR), floor)


def _psi(sys, which, vbar, ubar, wp_max, wm_min):
    out = np.full(np.shape(vbar), -np.inf)
    ok = vbar > 0
    wm, wp = sys.riemann_invariants(np.where(ok, vbar, 1.0), ubar)
    val = wp_max - wp if which == 2 else wm - wm_min
    out[ok] = val[ok]
    return out


def lambda23(sys: PSystem, UL, UR, lam_prev, cap, which: int):
    """Ladder speed for ``Psi_2 = max w_+ - w_+`` (``which=2``) or ``Psi_3 = w_- - min w_-``."""
    vL, uL = (np.atleast_1d(a) for a in _split(UL))
    vR, uR = (np.atleast_1d(a) for a in _split(UR))
    lam_prev = np.broadcast_to(np.asarray(lam_prev, dtype=float), vL.shape).copy()
    cap = np.broadcast_to(np.asarray(cap, dtype=float), vL.shape)
    wmL, wpL = sys.riemann_invariants(vL, uL)
    wmR, wpR = sys.riemann_invariants(vR, uR)
    wp_max = np.maximum(wpL, wpR)
    wm_min = np.minimum(wmL, wmR)

    dp = sys.pressure(vR) - sys.pressure(vL)
    du = uR - uL
    if which == 2:
        skip = (du >= 0) & (dp >= 0)
    elif which == 3:
        skip = (du >= 0) & (dp <= 0)
    else:
        raise ValueError("which must be 2 or 3")
    skip |= (vL == vR) & (uL == uR)

    scale = np.maximum(np.abs(wp_max) + np.abs(wm_min), 1.0)
    slack = ROUNDOFF_RTOL * scale
    todo = np.flatnonzero(~skip)
    if todo.size:
        vb, ub = bar_state(sys, lam_prev[todo], vL[todo], uL[todo], vR[todo], uR[todo])
        at_lo = _psi(sys, which, vb, ub, wp_max[todo], wm_min[todo]) + slack[todo]
        ok = at_lo >= 0
        todo, at_lo = todo[~ok], at_lo[~ok]
    if todo.size:
        vb, ub = bar_state(sys, cap[todo], vL[todo], uL[todo], vR[todo], uR[todo])
        at_cap = _psi(sys, which, vb, ub, wp_max[todo], wm_min[todo]) + slack[todo]
        bad = at_cap < -CHECK_RTOL * scale[todo]
        if bad.any():
            raise WaveSpeedError(
                f"Psi_{which} negative at the cap (min {at_cap[bad].min():.3e})",
                where=todo[bad][:10].tolist(),
            )

        def psi(lam, idx):
            e = todo[idx]
            vb, ub = bar_state(sys, lam, vL[e], uL[e], vR[e], uR[e])
            return _psi(sys, which, vb, ub, wp_max[e], wm_min[e]) + slack[e]

        lam_prev[todo] = bracket_min(psi, lam_prev[todo], cap[todo], g_lo=at_lo, g_hi=np.maximum(at_cap, 0.0),
                                     gtol=2 * slack[todo])
    return lam_prev


def entropy_functional(sys: PSystem, lam, vL, uL, vR, uR):
    """``eta(bar u(lam)) - (eta_L + eta_R)/2 + (q_R - q_L)/(2 lam)``, ``-inf``-safe."""
    vb, ub = bar_state(sys, lam, vL, uL, vR, uR)
    out = np.full(np.shape(vb), np.inf)
    ok = vb > 0
    eta_b = sys.entropy(np.where(ok, vb, 1.0), ub)
    mean = 0.5 * (sys.entropy(vL, uL) + sys.entropy(vR, uR))
    dq = sys.entropy_flux(vR, uR) - sys.entropy_flux(vL, uL)
    val = eta_b - mean + 0.5 * dq / lam
    out[ok] = val[ok]
    return out


def lambda_entropy_psys(sys: PSystem, UL, UR, lam3, cap):
    """Smallest speed in ``[lam3, cap]`` satisfying the entropy inequality."""
    vL, uL = (np.atleast_1d(a) for a in _split(UL))
    vR, uR = (np.atleast_1d(a) for a in _split(UR))
    lam3 = np.broadcast_to(np.asarray(lam3, dtype=float), vL.shape).copy()
    cap = np.broadcast_to(np.asarray(cap, dtype=float), vL.shape)
    equal = (vL == vR) & (uL == uR)
    scale = 0.5 * (np.abs(sys.entropy(vL, uL)) + np.abs(sys.entropy(vR, uR)))
    scale += 0.5 * np.abs(sys.entropy_flux(vR, uR) - sys.entropy_flux(vL, uL)) / cap
    scale = np.maximum(scale, 1.0)
    slack = ROUNDOFF_RTOL * scale
    todo = np.flatnonzero(~equal)
    if todo.size:
        at_lo = entropy_functional(sys, lam3[todo], vL[todo], uL[todo], vR[todo], uR[todo]) - slack[todo]
        ok = at_lo <= 0
        todo, at_lo = todo[~ok], at_lo[~ok]
    if todo.size:
        at_cap = entropy_functional(sys, cap[todo], vL[todo], uL[todo], vR[todo], uR[todo]) - slack[todo]
        bad = at_cap > CHECK_RTOL * scale[todo]
        if bad.any():
            raise WaveSpeedError(
                f"entropy functional positive at the cap (max {at_cap[bad].max():.3e})",
                where=todo[bad][:10].tolist(),
            )

        def neg_phi(lam, idx):
            e = todo[idx]
            return slack[e] - entropy_functional(sys, lam, vL[e], uL[e], vR[e], uR[e])

        lam3[todo] = np.maximum(
            bracket_min(neg_phi, lam3[todo], cap[todo], g_lo=-at_lo, g_hi=np.maximum(-at_cap, 0.0),
                        gtol=2 * slack[todo]), lam3[todo])
    return lam3


def _ladder_value(sys, kind, lam, vL, uL, vR, uR, wp_max, wm_min, eta_mean, dq):
    """``Psi_2``, ``Psi_3`` or ``-Phi`` (by ``kind`` = 2, 3, 4); feasible iff ``>= 0``."""
    vb, ub = bar_state(sys, lam, vL, uL, vR, uR)
    ok = vb > 0
    vs = np.where(ok, vb, 1.0)
    z = sys.tail_integral(vs)
    out = np.where(kind == 2, wp_max - (ub + z),
                   np.where(kind == 3, (ub - z) - wm_min,
                            eta_mean - 0.5 * dq / lam - sys.entropy(vs, ub)))
    out[~ok] = -np.inf
    return out


def greedy_speeds(sys: PSystem, n, UL, UR, floor, cap=None):
    """Full ladder ``lambda_1 <= lambda_2 <= lambda_3 <= lambda_e`` per pair.

    Every feasible set is an interval ending at the cap, so the three
    root finds start from ``lambda_1`` and run as one batch; the ladder is
    then the running maximum. Returns a dict of arrays; ``cap`` defaults
    to ``max(floor, lambda_max_hat)``.
    """
    vL, uL, vR, uR = (np.atleast_1d(a) for a in reduce_states(n, UL, UR))
    L = np.stack([vL, uL], -1)
    R = np.stack([vR, uR], -1)
    floor = np.broadcast_to(np.asarray(floor, dtype=float), vL.shape)
    lam_hat = lambda_max_hat(sys, 1.0, L, R)
    if cap is None:
        cap = np.maximum(floor, lam_hat)
    cap = np.broadcast_to(np.asarray(cap, dtype=float), vL.shape)
    equal = (vL == vR) & (uL == uR)
    l1 = np.where(equal, floor, np.minimum(lambda1(L, R, floor), cap))

    dp = sys.pressure(vR) - sys.pressure(vL)
    du = uR - uL
    skip = {2: equal | ((du >= 0) & (dp >= 0)), 3: equal | ((du >= 0) & (dp <= 0)), 4: equal}
    pair = np.concatenate([np.flatnonzero(~skip[k]) for k in (2, 3, 4)])
    kind = np.concatenate([np.full(np.count_nonzero(~skip[k]), k) for k in (2, 3, 4)])
    mu = {k: l1.copy() for k in (2, 3, 4)}

    if pair.size:
        wmL, wpL = sys.riemann_invariants(vL, uL)
        wmR, wpR = sys.riemann_invariants(vR, uR)
        wp_max = np.maximum(wpL, wpR)
        wm_min = np.minimum(wmL, wmR)
        etaL, etaR = sys.entropy(vL, uL), sys.entropy(vR, uR)
        eta_mean = 0.5 * (etaL + etaR)
        dq = sys.entropy_flux(vR, uR) - sys.entropy_flux(vL, uL)

        scale = np.where(kind == 4,
                         0.5 * (np.abs(etaL[pair]) + np.abs(etaR[pair])) + 0.5 * np.abs(dq[pair]) / cap[pair],
                         np.abs(wp_max[pair]) + np.abs(wm_min[pair]))
        scale = np.maximum(scale, 1.0)
        slack = ROUNDOFF_RTOL * scale

        def g(lam, idx):
            e = pair[idx]
            return _ladder_value(sys, kind[idx], lam, vL[e], uL[e], vR[e], uR[e],
                                 wp_max[e], wm_min[e], eta_mean[e], dq[e]) + slack[idx]

        allidx = np.arange(pair.size)
        g_lo = g(l1[pair], allidx)
        need = np.flatnonzero(g_lo < 0)
        if need.size:
            at_cap = g(cap[pair[need]], need)
            e = pair[need]
            bad = at_cap < -CHECK_RTOL * scale[need]
            if bad.any():
                names = {2: "Psi_2", 3: "Psi_3", 4: "entropy inequality"}
                b = np.flatnonzero(bad)
                raise WaveSpeedError(
                    f"{names[int(kind[need][b[0]])]} violated at the cap ({at_cap[b[0]]:.3e})",
                    where=e[b][:10].tolist(),
                )
            sub = lambda lam, idx: g(lam, need[idx])
            root = bracket_min(sub, l1[e], cap[e], g_lo=g_lo[need], g_hi=np.maximum(at_cap, 0.0),
                               gtol=2 * slack[need])
            for k in (2, 3, 4):
                sel = kind[need] == k
                mu[k][e[sel]] = root[sel]

    l2 = np.maximum(l1, mu[2])
    l3 = np.maximum(l2, mu[3])
    le = np.maximum(l3, mu[4])
    return {
        "lambda_eps": floor, "lambda_sharp": cap, "lambda_max_hat": lam_hat,
        "lambda1": l1, "lambda2": l2, "lambda3": l3, "lambda_e": le, "lambda_greedy": le,
    }
