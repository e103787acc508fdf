"""Greedy wave speeds and graph-viscosity assembly.

The generic routines (``bar_state``, ``ladder_speed``, ``entropy_speed``,
``greedy_speed``) work one pair at a time for any system given as
callables; they are the reference against which the batched closed-form
and p-system paths are tested. ``assemble_viscosity`` is the batched
production path used by the time stepper.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import psystem_speeds as ps
from . import scalar_speeds as ss
from .errors import (
    AdmissibilityError,
    ConfigurationError,
    NothingToUpdate,
    WaveSpeedError,
)
from .mesh import GraphMesh
from .rootfind import RTOL, bisect_min
from .systems import PSystem, ScalarFlux

__all__ = [
    "EPSILON",
    "MODES",
    "WaveSpeedBreakdown",
    "ViscosityMatrix",
    "normal_flux",
    "bar_state",
    "lambda_floor",
    "ladder_speed",
    "entropy_speed",
    "entropy_functional",
    "greedy_speed",
    "assemble_viscosity",
]

EPSILON = 1e-8
MODES = ("greedy", "gms", "hat-gms", "roe-only")
CHECK_RTOL = 1e-9


def normal_flux(system, u, n):
    """``f(u) . n``: shape ``(...)`` for scalars, ``(..., m)`` for systems."""
    f = system.evaluate(u)
    n = np.asarray(n, dtype=float)
    if system.m == 1:
        return np.sum(f * n, axis=-1)
    return np.sum(f * n[..., None, :], axis=-1)


def bar_state(system, n, uL, uR, lam):
    """``(uL + uR)/2 - (f(uR) - f(uL)) . n / (2 lam)``."""
    lam = np.asarray(lam, dtype=float)
    if not np.all(lam > 0):
        raise ValueError("bar state needs a positive speed")
    if system.m > 1 and lam.ndim:
        lam = lam[..., None]
    uL = np.asarray(uL, dtype=float)
    uR = np.asarray(uR, dtype=float)
    return 0.5 * (uL + uR) - (normal_flux(system, uR, n) - normal_flux(system, uL, n)) / (2.0 * lam)


def lambda_floor(bound, epsilon: float = EPSILON) -> float:
    """``epsilon * bound``; a zero bound means nothing moves."""
    bound = float(np.max(bound))
    if not np.isfinite(bound):
        raise WaveSpeedError("non-finite wave-speed bound")
    if bound <= 0.0:
        raise NothingToUpdate("all wave speeds vanish")
    return epsilon * bound


def _safe(fn, default):
    def wrapped(x):
        try:
            val = float(fn(x))
        except (AdmissibilityError, FloatingPointError, ValueError):
            return default
        return default if np.isnan(val) else val
    return wrapped


def ladder_speed(psi, lo: float, hi: float, bar, where=None, scale: float = 1.0,
                 rtol: float = RTOL) -> float:
    """Smallest ``lam`` in ``[lo, hi]`` with ``psi(bar(lam)) >= 0``.

    ``psi`` may raise :class:`AdmissibilityError` outside its domain, which
    counts as infeasible.
    """
    if not 0 < lo <= hi:
        raise ValueError(f"bad bracket [{lo}, {hi}]")
    g = _safe(lambda lam: psi(bar(lam)), -np.inf)
    if g(lo) >= 0:
        return float(lo)
    at_hi = g(hi)
    if at_hi < -CHECK_RTOL * max(scale, 1.0):
        raise WaveSpeedError(f"constraint violated at the cap ({at_hi:.3e})", where=where)
    return float(bisect_min(lambda m, idx: np.array([g(x) >= 0 for x in m]), lo, hi, rtol)[0])


def entropy_speed(phi, lo: float, hi: float, where=None, scale: float = 1.0, rtol: float = RTOL) -> float:
    """Smallest ``lam`` in ``[lo, hi]`` with ``phi(1/lam) <= 0``."""
    if not 0 < lo <= hi:
        raise ValueError(f"bad bracket [{lo}, {hi}]")
    g = _safe(lambda lam: phi(1.0 / lam), np.inf)
    if g(lo) <= 0:
        return float(lo)
    at_hi = g(hi)
    if at_hi > CHECK_RTOL * max(scale, 1.0):
        raise WaveSpeedError(f"entropy inequality violated at the cap ({at_hi:.3e})", where=where)
    return float(bisect_min(lambda m, idx: np.array([g(x) <= 0 for x in m]), lo, hi, rtol)[0])


def entropy_functional(system, pair, n, uL, uR):
    """``t -> eta(bar u(1/t)) - (eta_L + eta_R)/2 + t (q_R - q_L) . n / 2``; convex in ``t``."""
    n = np.asarray(n, dtype=float)
    mean = 0.5 * (pair.eta(uL) + pair.eta(uR))
    dq = float(np.sum((np.asarray(pair.q(uR)) - np.asarray(pair.q(uL))) * n))

    def phi(t):
        return float(pair.eta(bar_state(system, n, uL, uR, 1.0 / t))) - float(mean) + 0.5 * t * dq

    return phi


@dataclass
class WaveSpeedBreakdown:
    lambda_eps: float
    lambda_sharp: float
    ladder: list = field(default_factory=list)
    entropy_speeds: list = field(default_factory=list)
    lambda_greedy: float = float("nan")
    lambda_max: float | None = None
    lambda_max_hat: float | None = None


def greedy_speed(system, n, uL, uR, constraints, entropies, floor: float, cap: float,
                 where=None) -> WaveSpeedBreakdown:
    """Walk the constraint ladder, then take the max over the entropy speeds.

    ``constraints`` are callables ``psi(state) -> float`` in ladder order;
    ``entropies`` are :class:`EntropyPair`. With no entropies the result is
    the last ladder speed.
    """
    cap = max(floor, cap)
    out = WaveSpeedBreakdown(lambda_eps=floor, lambda_sharp=cap)
    if np.array_equal(np.asarray(uL), np.asarray(uR)):
        out.ladder = [floor] * len(constraints)
        out.entropy_speeds = [floor] * len(entropies)
        out.lambda_greedy = floor
        return out

    def bar(lam):
        return bar_state(system, n, uL, uR, lam)

    lam = floor
    for k, psi in enumerate(constraints):
        lam = ladder_speed(psi, lam, cap, bar, where=(where, f"Psi_{k + 1}"))
        out.ladder.append(lam)
    lam_L = lam
    for pair in entropies:
        phi = entropy_functional(system, pair, n, uL, uR)
        scale = abs(float(pair.eta(uL))) + abs(float(pair.eta(uR)))
        out.entropy_speeds.append(entropy_speed(phi, lam_L, cap, where=(where, pair.name), scale=scale))
    out.lambda_greedy = max(out.entropy_speeds) if out.entropy_speeds else lam_L
    return out


@dataclass
class ViscosityMatrix:
    """Symmetric graph viscosity on the mesh edges.

    ``lam_ij`` and ``lam_ji`` are the speeds for the two orientations of
    each edge; ``d = max(lam_ij |c_ij|, lam_ji |c_ji|)``. ``details`` holds
    per-orientation ladder arrays (``*_ij`` / ``*_ji``) when available.
    """

    mesh: GraphMesh
    d: np.ndarray
    lam_ij: np.ndarray
    lam_ji: np.ndarray
    lambda_eps: float
    mode: str
    k: np.ndarray | None = None
    details: dict = field(default_factory=dict)

    def row_sums(self) -> np.ndarray:
        """``sum_{j != i} d_ij``."""
        n = self.mesh.n_dofs
        e = self.mesh.edges
        return np.bincount(e[:, 0], self.d, n) + np.bincount(e[:, 1], self.d, n)

    def diagonal(self) -> np.ndarray:
        """``d_ii = -sum_{j != i} d_ij``."""
        return -self.row_sums()

    def to_dense(self) -> np.ndarray:
        n = self.mesh.n_dofs
        D = np.zeros((n, n))
        i, j = self.mesh.edges.T
        D[i, j] = self.d
        D[j, i] = self.d
        D[np.arange(n), np.arange(n)] = self.diagonal()
        return D

    def to_csv(self, path) -> None:
        """One row per ordered pair ``(i, j)``, ``i != j``."""
        e = self.mesh.edges
        cols = ["i", "j", "d_ij", "lambda"] + sorted({k[:-3] for k in self.details})
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for orient, (a, b) in (("_ij", (0, 1)), ("_ji", (1, 0))):
                lam = self.lam_ij if orient == "_ij" else self.lam_ji
                extra = [self.details.get(c + orient) for c in cols[4:]]
                for r in range(len(e)):
                    row = [int(e[r, a]), int(e[r, b]), repr(float(self.d[r])), repr(float(lam[r]))]
                    row += ["" if x is None else repr(float(x[r])) for x in extra]
                    w.writerow(row)


def _check_mode(system, mode):
    if mode not in MODES:
        raise ConfigurationError(f"unknown mode {mode!r}; expected one of {MODES}")
    if isinstance(system, PSystem):
        if mode == "roe-only":
            raise ConfigurationError("roe-only is defined for scalar laws only")
    elif mode in ("gms", "hat-gms"):
        raise ConfigurationError(f"{mode} is defined for the p-system only")


def _scalar_speeds(mesh, flux, U, mode, entropy, theta):
    """Speeds for both orientations of every edge, computed in one batch."""
    i, j = mesh.edges.T
    E = len(i)
    n_ij, n_ji = mesh.edge_normals()
    with np.errstate(invalid="ignore", divide="ignore"):
        nn = np.concatenate([n_ij, n_ji])
        A = np.concatenate([U[i], U[j]])
        B = np.concatenate([U[j], U[i]])
        k = None
        if mode == "roe-only" or entropy is None:
            lam = ss.lambda12(flux, nn, A, B)
        elif entropy.kind == "square":
            lam = ss.lambda_square(flux, nn, A, B)
        else:
            if entropy.kind == "random":
                if theta is None:
                    raise ConfigurationError("random entropy selection needs per-dof theta draws")
                th = np.asarray(theta, dtype=float)
            else:
                th = np.full(mesh.n_dofs, entropy.theta)
            umin, umax = mesh.stencil_min_max(U)
            k = ss.select_k(th, umin, umax)
            lam = ss.lambda_kruzhkov(flux, np.concatenate([k[i], k[j]]), nn, A, B)
    return lam[:E], lam[E:], k


def assemble_viscosity(mesh: GraphMesh, system, U, mode: str = "greedy", entropy=None,
                       theta=None, epsilon: float = EPSILON) -> ViscosityMatrix:
    """Per-edge wave speeds and the graph viscosity ``d_ij``.

    Modes: ``greedy`` (any system), ``roe-only`` (scalar, ``lambda_12``
    only), ``gms`` and ``hat-gms`` (p-system, exact maximum speed and its
    guaranteed upper bound). ``entropy`` is a :class:`KruzhkovSelection`
    for scalar greedy runs; ``theta`` holds one draw per dof for the
    random strategy. Raises :class:`NothingToUpdate` when every speed is 0.
    """
    _check_mode(system, mode)
    U = np.asarray(U, dtype=float)
    c_ij_norm, c_ji_norm = mesh.edge_norms()
    details = {}
    k = None

    if isinstance(system, ScalarFlux):
        lij, lji, k = _scalar_speeds(mesh, system, U, mode, entropy, theta)
        lij = np.where(c_ij_norm > 0, lij, 0.0)
        lji = np.where(c_ji_norm > 0, lji, 0.0)
        floor = lambda_floor(max(lij.max(initial=0.0), lji.max(initial=0.0)), epsilon)
        lij = np.maximum(lij, floor)
        lji = np.maximum(lji, floor)
    else:
        system.check_admissible(U)
        i, j = mesh.edges.T
        s_ij = np.sign(mesh.c_ij[:, 0])
        s_ji = np.sign(mesh.c_ji[:, 0])
        Ui, Uj = U[i], U[j]
        hat_ij = ps.lambda_max_hat(system, s_ij, Ui, Uj)
        hat_ji = ps.lambda_max_hat(system, s_ji, Uj, Ui)
        if mode == "hat-gms":
            lij, lji = hat_ij, hat_ji
            floor = lambda_floor(max(lij.max(), lji.max()), epsilon)
        elif mode == "gms":
            lij = ps.lambda_max_exact(system, s_ij, Ui, Uj)
            lji = ps.lambda_max_exact(system, s_ji, Uj, Ui)
            floor = lambda_floor(max(lij.max(), lji.max()), epsilon)
        else:
            floor = lambda_floor(max(hat_ij.max(), hat_ji.max()), epsilon)
            E = len(i)
            out = ps.greedy_speeds(system, np.concatenate([s_ij, s_ji]),
                                   np.concatenate([Ui, Uj]), np.concatenate([Uj, Ui]), floor)
            lij, lji = out["lambda_greedy"][:E], out["lambda_greedy"][E:]
            for name in ("lambda1", "lambda2", "lambda3", "lambda_e", "lambda_sharp"):
                details[name + "_ij"] = out[name][:E]
                details[name + "_ji"] = out[name][E:]
        lij = np.maximum(lij, floor)
        lji = np.maximum(lji, floor)

    d = np.maximum(lij * c_ij_norm, lji * c_ji_norm)
    return ViscosityMatrix(mesh=mesh, d=d, lam_ij=lij, lam_ji=lji, lambda_eps=floor,
                           mode=mode, k=k, details=details)
