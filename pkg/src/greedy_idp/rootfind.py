"""Bracketed bisection for the smallest admissible wave speed."""

from __future__ import annotations

import numpy as np

RTOL = 1e-10
MAXITER = 200


def bisect_min(feasible, lo, hi, rtol: float = RTOL, maxiter: int = MAXITER) -> np.ndarray:
    """Smallest ``lam`` in ``[lo, hi]`` with ``feasible(lam)``, batched.

    ``feasible(lam, idx)`` receives the trial speeds and the batch indices
    they belong to and returns a boolean array. The predicate must be
    monotone (false below the answer, true above) and true at ``hi``; the
    caller checks both ends. The right end of the final bracket is
    returned, so the result is always on the admissible side.
    """
    lo = np.array(lo, dtype=float, ndmin=1, copy=True)
    hi = np.array(hi, dtype=float, ndmin=1, copy=True)
    lo, hi = np.broadcast_arrays(lo, hi)
    lo, hi = lo.copy(), hi.copy()
    active = np.flatnonzero(hi - lo > rtol * np.abs(hi))
    for _ in range(maxiter):
        if active.size == 0:
            break
        a, b = lo[active], hi[active]
        # geometric steps while the bracket spans orders of magnitude
        wide = (a > 0) & (b > 4.0 * a)
        mid = np.where(wide, np.sqrt(np.abs(a * b)), 0.5 * (a + b))
        ok = np.asarray(feasible(mid, active), dtype=bool)
        hi[active[ok]] = mid[ok]
        lo[active[~ok]] = mid[~ok]
        active = active[hi[active] - lo[active] > rtol * np.abs(hi[active])]
    return hi


def bracket_min(fun, lo, hi, g_lo=None, g_hi=None, rtol: float = RTOL,
                maxiter: int = MAXITER, gtol=0.0) -> np.ndarray:
    """Like :func:`bisect_min` for a real-valued ``fun`` with ``fun >= 0`` feasible.

    ``fun(lam, idx)`` must be negative on ``[lo, lam*)`` and non-negative on
    ``[lam*, hi]``; ``lo > 0``. Meant for functions concave in ``t = 1/lam``
    (constraints evaluated at a bar state, which is affine in ``t``). Each
    iteration evaluates two points: the chord root between the bracket
    ends, which lands on the feasible side, and the secant root through
    the last two feasible points, which lands on the other side, so both
    ends converge. Non-finite values fall back to bisection, as does any
    step that fails to halve the bracket. An entry also stops once its
    feasible value is at most ``gtol`` (scalar or per entry), the level
    below which ``fun`` is roundoff. Returns the feasible end of the
    final bracket.
    """
    a = np.array(lo, dtype=float, ndmin=1, copy=True)
    b = np.array(hi, dtype=float, ndmin=1, copy=True)
    a, b = np.broadcast_arrays(a, b)
    a, b = a.copy(), b.copy()
    idx_all = np.arange(a.size)
    ga = fun(a, idx_all) if g_lo is None else np.array(g_lo, dtype=float, copy=True)
    gb = fun(b, idx_all) if g_hi is None else np.array(g_hi, dtype=float, copy=True)
    ga = np.where(np.isnan(ga), -np.inf, ga).astype(float)
    gb = np.where(np.isnan(gb), -np.inf, gb).astype(float)
    pb = np.full(a.size, np.nan)  # previous feasible point and value
    pg = np.full(a.size, np.nan)
    stall = np.zeros(a.size, dtype=bool)  # last step did not halve the bracket
    gtol = np.broadcast_to(np.asarray(gtol, dtype=float), a.shape)
    moved = np.zeros(a.size, dtype=bool)  # b came from an evaluation, not from g_hi

    def open_(idx):
        return idx[(b[idx] - a[idx] > rtol * np.abs(b[idx])) & ~(moved[idx] & (gb[idx] <= gtol[idx]))]

    active = open_(np.arange(a.size))
    for _ in range(maxiter):
        if active.size == 0:
            break
        A, B, GA, GB = a[active], b[active], ga[active], gb[active]
        delta = np.minimum(0.4 * rtol * B, 0.25 * (B - A))
        wide = B > 4.0 * A
        mid = np.where(wide, np.sqrt(A * B), 0.5 * (A + B))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            tA, tB = 1.0 / A, 1.0 / B
            x1 = 1.0 / (tB + GB * (tA - tB) / (GB - GA))
            tP = 1.0 / pb[active]
            x2 = 1.0 / (tB - GB * (tB - tP) / (GB - pg[active]))
        ok1 = np.isfinite(GA) & (GB > 0) & (x1 > A) & (x1 < B) & ~stall[active]
        x1 = np.where(ok1, np.clip(x1, A + delta, B - delta), mid)
        ok2 = ok1 & np.isfinite(x2) & (x2 > A) & (x2 < x1)
        x2 = np.where(ok2, np.clip(x2, A + delta, x1 - delta), 0.5 * (A + x1))
        g = np.asarray(fun(np.concatenate([x2, x1]), np.concatenate([active, active])), dtype=float)
        g = np.where(np.isnan(g), -np.inf, g)
        n = active.size
        width = B - A
        for x, gx in ((x2, g[:n]), (x1, g[n:])):
            feas = gx >= 0
            up = feas & (x < b[active])
            e = active[up]
            pb[e], pg[e] = b[e], gb[e]
            b[e], gb[e] = x[up], gx[up]
            moved[e] = True
            dn = ~feas & (x > a[active])
            e = active[dn]
            a[e], ga[e] = x[dn], gx[dn]
        stall[active] = b[active] - a[active] > 0.5 * width
        active = open_(active)
    return b
