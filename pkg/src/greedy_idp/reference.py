"""Exact solutions of the benchmark Riemann problems and discrete error norms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .systems import PSystem

__all__ = [
    "pwlinear_exact",
    "sine_exact",
    "psystem_two_shock",
    "PSystemTwoShock",
    "relative_errors",
    "convergence_rates",
    "convergence_table",
]


def pwlinear_exact(x, t):
    """Data ``1 | 3`` at ``x = 0``: a shock at speed ``-1`` and a contact at speed ``2``."""
    x = np.asarray(x, dtype=float)
    if t <= 0:
        return np.where(x <= 0.0, 1.0, 3.0)
    return np.where(x <= -t, 1.0, np.where(x <= 2.0 * t, 2.0, 3.0))


def sine_exact(x, t, a: float = 1.0, b: float = 0.0):
    """``f(u) = sin u`` with data ``(2 + a) pi | b pi`` at ``x = 0``.

    A fan from ``(2 + a) pi`` down to ``5 pi / 2``, a stationary shock at
    ``x = 0`` onto ``pi / 2``, then a second fan down to ``b pi``.
    Valid for ``a`` in ``(1/2, 1]`` and ``b`` in ``[0, 1/2)``.
    """
    x = np.asarray(x, dtype=float)
    uL, uR = (2.0 + a) * np.pi, b * np.pi
    if t <= 0:
        return np.where(x <= 0.0, uL, uR)
    xi = x / t
    out = np.full(x.shape, uR)
    left = xi <= np.cos(uL)
    mid = ~left & (xi <= 0.0)
    right = ~left & ~mid & (xi <= np.cos(uR))
    out[left] = uL
    out[mid] = 2.0 * np.pi + np.arccos(np.clip(xi[mid], -1.0, 1.0))
    out[right] = np.arccos(np.clip(xi[right], -1.0, 1.0))
    return out


@dataclass(frozen=True)
class PSystemTwoShock:
    """Two shocks around the middle state ``(v_m, u_m)``."""

    system: PSystem
    vL: float
    vR: float
    x0: float = 0.8
    vm: float = 1.0
    um: float = 0.0

    def __post_init__(self):
        if not (self.vL > self.vm and self.vR > self.vm):
            raise ConfigurationError(
                f"two-shock construction needs vL, vR > {self.vm}, got {self.vL}, {self.vR}")

    @property
    def uL(self) -> float:
        p = self.system.pressure
        return self.um + np.sqrt((self.vm - self.vL) * (p(self.vL) - p(self.vm)))

    @property
    def uR(self) -> float:
        p = self.system.pressure
        return self.um - np.sqrt((self.vm - self.vR) * (p(self.vR) - p(self.vm)))

    @property
    def speeds(self) -> tuple[float, float]:
        p = self.system.pressure
        sL = -np.sqrt((p(self.vm) - p(self.vL)) / (self.vL - self.vm))
        sR = np.sqrt((p(self.vm) - p(self.vR)) / (self.vR - self.vm))
        return float(sL), float(sR)

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        sL, sR = self.speeds
        xi = x - self.x0
        out = np.empty(x.shape + (2,))
        if t <= 0:
            # the data take the right state at the jump point itself
            left, right = xi < 0, xi >= 0
        else:
            left = xi <= sL * t
            right = xi > sR * t
        out[...] = (self.vm, self.um)
        out[left] = (self.vL, self.uL)
        out[right] = (self.vR, self.uR)
        return out


def psystem_two_shock(system: PSystem | None = None, vL: float = 1.5, vR: float = 1000.0,
                      x0: float = 0.8) -> PSystemTwoShock:
    return PSystemTwoShock(system or PSystem(), vL, vR, x0)


def relative_errors(mass, U, U_exact) -> dict:
    """Lumped-mass relative L1 and L2 errors.

    For systems the per-component relative errors are summed.
    """
    mass = np.asarray(mass, dtype=float)
    U = np.asarray(U, dtype=float)
    E = np.asarray(U_exact, dtype=float)
    if U.ndim == 1:
        U, E = U[:, None], E[:, None]
    l1 = l2 = 0.0
    for k in range(U.shape[1]):
        e = U[:, k] - E[:, k]
        ref1 = np.sum(mass * np.abs(E[:, k]))
        if ref1 == 0.0:
            raise ValueError(f"exact solution has zero norm (component {k})")
        l1 += np.sum(mass * np.abs(e)) / ref1
        l2 += np.sqrt(np.sum(mass * e * e) / np.sum(mass * E[:, k] ** 2))
    return {"L1": float(l1), "L2": float(l2)}


def convergence_rates(hs, errs) -> np.ndarray:
    """Observed orders between consecutive resolutions (``nan`` for the first)."""
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    rates = np.full(errs.shape, np.nan)
    rates[1:] = np.log(errs[:-1] / errs[1:]) / np.log(hs[:-1] / hs[1:])
    return rates


def convergence_table(dofs, errs, hs=None) -> list[dict]:
    """Rows ``{dofs, error, rate}``; ``h`` defaults to ``1 / (dofs - 1)``."""
    dofs = np.asarray(dofs)
    hs = 1.0 / (dofs - 1.0) if hs is None else hs
    rates = convergence_rates(hs, errs)
    return [{"dofs": int(n), "error": float(e), "rate": float(r)} for n, e, r in zip(dofs, errs, rates)]
