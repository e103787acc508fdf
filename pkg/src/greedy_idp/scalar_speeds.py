"""Closed-form greedy wave speeds for scalar conservation laws.

All functions are batched: ``uL``, ``uR`` (and ``k``) have shape ``(E,)``
and the unit vectors ``n`` have shape ``(E, d)`` or ``(d,)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .systems import ScalarFlux

__all__ = [
    "lambda12",
    "lambda_kruzhkov",
    "lambda_square",
    "select_k",
    "KruzhkovSelection",
    "parse_entropy_strategy",
]


def _dot(a, n):
    return np.sum(a * n, axis=-1)


def _as_batch(n, uL, uR, *extra):
    uL = np.asarray(uL, dtype=float)
    uR = np.asarray(uR, dtype=float)
    n = np.asarray(n, dtype=float)
    if n.ndim == 0:
        n = n[None]
    shape = np.broadcast_shapes(uL.shape, uR.shape, *(np.shape(e) for e in extra), n.shape[:-1])
    return n, np.broadcast_to(uL, shape), np.broadcast_to(uR, shape)


def _lambda12_from(flux, n, uL, uR, fL, fR):
    du = uR - uL
    df = _dot(fR - fL, n)
    equal = du == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.abs(df) / np.abs(du)
    if np.any(equal):
        left, right = flux.derivative(uL)
        slope = np.maximum(np.abs(_dot(left, n)), np.abs(_dot(right, n)))
        lam = np.where(equal, slope, lam)
    return lam


def lambda12(flux: ScalarFlux, n, uL, uR) -> np.ndarray:
    """Roe-average speed; the max of one-sided ``|f'.n|`` for equal states."""
    n, uL, uR = _as_batch(n, uL, uR)
    return _lambda12_from(flux, n, uL, uR, flux.evaluate(uL), flux.evaluate(uR))


def lambda_kruzhkov(flux: ScalarFlux, k, n, uL, uR) -> np.ndarray:
    """Smallest speed making the Kruzhkov entropy inequality hold for ``k``."""
    n, uL, uR = _as_batch(n, uL, uR, k)
    k = np.broadcast_to(np.asarray(k, dtype=float), uL.shape)
    fL, fR = flux.evaluate(uL), flux.evaluate(uR)
    lam12 = _lambda12_from(flux, n, uL, uR, fL, fR)
    inside = (k > np.minimum(uL, uR)) & (k < np.maximum(uL, uR))
    if not np.any(inside):
        return lam12
    fk = flux.evaluate(k)
    a = uL + uR - 2.0 * k
    b = _dot(fR - fL, n)
    c = np.abs(uL - k) + np.abs(uR - k)
    d = np.sign(uR - k) * _dot(fR - fk, n) - np.sign(uL - k) * _dot(fL - fk, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = np.maximum((d + b) / (c + a), (d - b) / (c - a))
    return np.where(inside, np.maximum(cand, lam12), lam12)


def lambda_square(flux: ScalarFlux, n, uL, uR) -> np.ndarray:
    """Speed enforcing the entropy inequality for ``eta(u) = u^2 / 2``, maxed with lambda12."""
    n, uL, uR = _as_batch(n, uL, uR)
    lam12 = lambda12(flux, n, uL, uR)
    b = 0.5 * _dot(flux.evaluate(uL) - flux.evaluate(uR), n)
    # c - a^2 = (uL - uR)^2 / 4 and 2ab + d is the trapezoid defect of f.n;
    # both are formed without cancellation
    gap = 0.25 * (uL - uR) ** 2
    lin = _dot(flux.trapezoid_defect(uL, uR), n)
    disc = lin * lin + 4.0 * b * b * gap
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = (lin + np.sqrt(disc)) / (2.0 * gap)
    return np.where(gap > 0.0, np.maximum(lam, lam12), lam12)


def select_k(theta, u_min, u_max) -> np.ndarray:
    """``k = theta * u_min + (1 - theta) * u_max``."""
    theta = np.asarray(theta, dtype=float)
    u_min = np.asarray(u_min, dtype=float)
    u_max = np.asarray(u_max, dtype=float)
    k = theta * u_min + (1.0 - theta) * u_max
    return np.where(u_min == u_max, u_min, k)


@dataclass(frozen=True)
class KruzhkovSelection:
    """How each dof picks its entropy.

    ``kind`` is ``"random"``, ``"fixed"`` (with ``theta``) or ``"square"``.
    """

    kind: str
    theta: float = 0.5

    def __str__(self):
        return f"fixed:{self.theta:g}" if self.kind == "fixed" else self.kind


def parse_entropy_strategy(text: str) -> KruzhkovSelection:
    text = str(text).strip()
    if text in ("random", "square"):
        return KruzhkovSelection(text)
    if text.startswith("fixed"):
        _, _, value = text.partition(":")
        theta = float(value) if value else 0.5
        if not 0.0 < theta < 1.0:
            raise ConfigurationError(f"theta must lie in (0, 1), got {theta}")
        return KruzhkovSelection("fixed", theta)
    raise ConfigurationError(f"unknown entropy strategy {text!r}")
