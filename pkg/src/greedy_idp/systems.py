"""Conserved systems: scalar fluxes, the p-system and their entropy pairs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AdmissibilityError, ConfigurationError

__all__ = [
    "ScalarFlux",
    "PSystem",
    "EntropyPair",
    "PWLINEAR",
    "SINE",
    "KPP2D",
    "flux_piecewise_linear",
    "flux_sine",
    "flux_kpp",
    "flux_psystem",
    "kruzhkov_pair",
    "square_pair",
    "psystem_pair",
    "riemann_invariants",
    "get_system",
]


def flux_piecewise_linear(u):
    u = np.asarray(u, dtype=float)
    return np.where(u <= 2.0, 2.0 - u, 2.0 * u - 4.0)


def flux_sine(u):
    return np.sin(u)


def flux_kpp(u):
    u = np.asarray(u, dtype=float)
    return np.stack([np.sin(u), np.cos(u)], axis=-1)


@dataclass(frozen=True)
class ScalarFlux:
    """A scalar flux ``f: R -> R^d``.

    ``derivative`` returns the one-sided derivatives ``(f'(u-), f'(u+))``,
    each of shape ``(..., d)``; they coincide away from kinks.
    """

    name: str
    dim: int
    _flux: Callable
    _derivative: Callable
    _square_q: Callable | None = None
    _defect: Callable | None = None

    m = 1

    def evaluate(self, u) -> np.ndarray:
        """Flux values with shape ``(..., d)``."""
        f = np.asarray(self._flux(u), dtype=float)
        return f if self.dim > 1 else f[..., None]

    def derivative(self, u):
        left, right = self._derivative(np.asarray(u, dtype=float))
        if self.dim == 1:
            return np.asarray(left, dtype=float)[..., None], np.asarray(right, dtype=float)[..., None]
        return left, right

    def trapezoid_defect(self, uL, uR) -> np.ndarray:
        """``(uR - uL)(f(uL) + f(uR)) / 2 - int_uL^uR f``, shape ``(..., d)``.

        It is O(|uR - uL|^3) for smooth fluxes, so it is evaluated in closed
        form rather than as a difference.
        """
        if self._defect is None:
            raise ConfigurationError(f"flux {self.name} has no closed-form trapezoid defect")
        g = np.asarray(self._defect(np.asarray(uL, dtype=float), np.asarray(uR, dtype=float)), dtype=float)
        return g if self.dim > 1 else g[..., None]

    def check_admissible(self, u) -> None:
        if not np.all(np.isfinite(u)):
            raise AdmissibilityError("non-finite scalar state")


def _pw_derivative(u):
    left = np.where(u <= 2.0, -1.0, 2.0)
    right = np.where(u < 2.0, -1.0, 2.0)
    return left, right


def _sine_derivative(u):
    return np.cos(u), np.cos(u)


def _kpp_derivative(u):
    d = np.stack([np.cos(u), -np.sin(u)], axis=-1)
    return d, d


def _pw_square_q(u):
    # antiderivative of u f'(u), continuous at u = 2
    u = np.asarray(u, dtype=float)
    return np.where(u <= 2.0, -0.5 * u * u, u * u - 6.0)


def _sine_square_q(u):
    return u * np.sin(u) + np.cos(u)


def _hcos_minus_sin(h):
    # h cos h - sin h, with a series where the difference cancels
    h = np.asarray(h, dtype=float)
    h2 = h * h
    series = h * h2 * (-1.0 / 3.0 + h2 * (1.0 / 30.0 - h2 / 840.0))
    return np.where(np.abs(h) < 1e-2, series, h * np.cos(h) - np.sin(h))


def _sine_defect(uL, uR):
    return 2.0 * np.sin(0.5 * (uL + uR)) * _hcos_minus_sin(0.5 * (uR - uL))


def _kpp_defect(uL, uR):
    mid = 0.5 * (uL + uR)
    g = 2.0 * _hcos_minus_sin(0.5 * (uR - uL))
    return np.stack([np.sin(mid) * g, np.cos(mid) * g], axis=-1)


def _pw_defect(uL, uR):
    # zero unless the kink at 2 lies strictly between the states
    lo, hi = np.minimum(uL, uR), np.maximum(uL, uR)
    kink = (lo < 2.0) & (hi > 2.0)
    f = flux_piecewise_linear
    # trapezoid over [lo, hi] minus the two exact trapezoids meeting at 2
    whole = 0.5 * (hi - lo) * (f(lo) + f(hi))
    exact = 0.5 * (2.0 - lo) * f(lo) + 0.5 * (hi - 2.0) * f(hi)
    return np.where(kink, np.sign(uR - uL) * (whole - exact), 0.0)


PWLINEAR = ScalarFlux("pwlinear", 1, flux_piecewise_linear, _pw_derivative, _pw_square_q, _pw_defect)
SINE = ScalarFlux("sine", 1, flux_sine, _sine_derivative, _sine_square_q, _sine_defect)
KPP2D = ScalarFlux("kpp2d", 2, flux_kpp, _kpp_derivative, None, _kpp_defect)


@dataclass(frozen=True)
class EntropyPair:
    """Entropy ``eta`` (convex) and flux ``q`` (shape ``(..., d)``)."""

    name: str
    eta: Callable
    q: Callable


def kruzhkov_pair(flux: ScalarFlux, k: float) -> EntropyPair:
    """``eta_k(u) = |u - k|``, ``q_k(u) = sign(u - k) (f(u) - f(k))``; ``sign(0) = 0``."""
    fk = flux.evaluate(k)

    def eta(u):
        return np.abs(np.asarray(u, dtype=float) - k)

    def q(u):
        u = np.asarray(u, dtype=float)
        return np.sign(u - k)[..., None] * (flux.evaluate(u) - fk)

    return EntropyPair(f"kruzhkov({k:g})", eta, q)


def square_pair(flux: ScalarFlux) -> EntropyPair:
    """``eta(u) = u^2 / 2`` with a closed-form entropy flux."""
    if flux._square_q is None:
        raise ConfigurationError(f"no closed-form square-entropy flux for {flux.name!r}")

    def eta(u):
        u = np.asarray(u, dtype=float)
        return 0.5 * u * u

    def q(u):
        return np.asarray(flux._square_q(np.asarray(u, dtype=float)), dtype=float)[..., None]

    return EntropyPair("square", eta, q)


@dataclass(frozen=True)
class PSystem:
    """Isentropic gas dynamics in Lagrangian coordinates, ``p(v) = r v^-gamma``.

    States are arrays with last axis ``(v, u)``.
    """

    gamma: float = 3.0
    r: float = 1.0 / 3.0

    name = "psystem"
    m = 2
    dim = 1

    def __post_init__(self):
        if not self.gamma > 1.0 or not self.r > 0.0:
            raise ConfigurationError(f"need gamma > 1 and r > 0, got {self.gamma}, {self.r}")

    @property
    def K(self) -> float:
        return 2.0 * np.sqrt(self.r * self.gamma) / (self.gamma - 1.0)

    @property
    def alpha(self) -> float:
        """Exponent ``(gamma - 1) / 2`` in the Riemann invariants."""
        return 0.5 * (self.gamma - 1.0)

    def pressure(self, v):
        return self.r * np.power(v, -self.gamma)

    def dpressure(self, v):
        return -self.r * self.gamma * np.power(v, -self.gamma - 1.0)

    def sound_speed(self, v):
        """``sqrt(-p'(v))``."""
        return np.sqrt(self.r * self.gamma) * np.power(v, -0.5 * (self.gamma + 1.0))

    def tail_integral(self, v):
        """``int_v^inf sqrt(-p'(xi)) dxi = K v^{-(gamma-1)/2}``."""
        return self.K * np.power(v, -self.alpha)

    def check_admissible(self, state) -> None:
        v = np.asarray(state, dtype=float)[..., 0]
        if not np.all(v > 0.0) or not np.all(np.isfinite(state)):
            bad = np.flatnonzero(~(np.ravel(v) > 0.0))
            raise AdmissibilityError(
                f"specific volume must be positive (offending entries {bad[:10].tolist()})"
            )

    def evaluate(self, state) -> np.ndarray:
        """Flux ``(-u, p(v))`` with shape ``(..., 2, 1)``."""
        state = np.asarray(state, dtype=float)
        self.check_admissible(state)
        return np.stack([-state[..., 1], self.pressure(state[..., 0])], axis=-1)[..., None]

    def riemann_invariants(self, v, u):
        z = self.tail_integral(v)
        return u - z, u + z

    def entropy(self, v, u):
        return 0.5 * u * u + self.r * np.power(v, 1.0 - self.gamma) / (self.gamma - 1.0)

    def entropy_flux(self, v, u):
        return u * self.pressure(v)


def flux_psystem(state, gamma: float = 3.0, r: float = 1.0 / 3.0) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    return PSystem(gamma, r).evaluate(state)[..., 0]


def psystem_pair(gamma: float = 3.0, r: float = 1.0 / 3.0) -> EntropyPair:
    """``eta = u^2/2 + int_v^inf p``, ``q = u p(v)``; raises for ``v <= 0``."""
    sys = PSystem(gamma, r)

    def eta(state):
        state = np.asarray(state, dtype=float)
        sys.check_admissible(state)
        return sys.entropy(state[..., 0], state[..., 1])

    def q(state):
        state = np.asarray(state, dtype=float)
        sys.check_admissible(state)
        return sys.entropy_flux(state[..., 0], state[..., 1])[..., None]

    return EntropyPair("psystem", eta, q)


def riemann_invariants(state, gamma: float = 3.0, r: float = 1.0 / 3.0):
    """``(w_-, w_+)`` of a p-system state."""
    state = np.asarray(state, dtype=float)
    sys = PSystem(gamma, r)
    sys.check_admissible(state)
    return sys.riemann_invariants(state[..., 0], state[..., 1])


def get_system(name: str, gamma: float = 3.0, r: float | None = None):
    """Look up a system by its config id."""
    if name == "pwlinear":
        return PWLINEAR
    if name == "sine":
        return SINE
    if name == "kpp2d":
        return KPP2D
    if name == "psystem":
        return PSystem(gamma, 1.0 / gamma if r is None else r)
    raise ConfigurationError(f"unknown system {name!r}")
