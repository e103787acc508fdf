"""Recompute the frozen values in ``oracles.py`` with mpmath (50 digits).

Nothing here imports the package; run ``python tests/make_oracles.py``.
"""

import mpmath as mp

mp.mp.dps = 50
g = mp.mpf(3)
r = 1 / g


def p(v):
    return r * v ** (-g)


def dp(v):
    return -r * g * v ** (-g - 1)


def tail(v):
    K = 2 * mp.sqrt(r * g) / (g - 1)
    return K * v ** (-(g - 1) / 2)


vL, vR, vm = mp.mpf("1.5"), mp.mpf(1000), mp.mpf(1)
uL = mp.sqrt((vm - vL) * (p(vL) - p(vm)))
uR = -mp.sqrt((vm - vR) * (p(vR) - p(vm)))
sL = -mp.sqrt((p(vm) - p(vL)) / (vL - vm))
sR = mp.sqrt((p(vm) - p(vR)) / (vR - vm))


def f_side(v, vz):
    if v <= vz:
        return -mp.sqrt((p(v) - p(vz)) * (vz - v))
    return tail(vz) - tail(v)


def phi(v):
    return f_side(v, vL) + f_side(v, vR) + uL - uR


vstar = mp.findroot(phi, (mp.mpf("0.5"), mp.mpf("1.4")), solver="anderson")
lam_max = mp.sqrt((p(vL) - p(vstar)) / (vstar - vL))

# symmetric compression: smallest lambda with eta(bar) <= eta((1, 0)) for uL=(1,s), uR=(1,-s)
s = mp.mpf("0.3")


def eta(v, u):
    return u * u / 2 + r * v ** (1 - g) / (g - 1)


def phi_sym(lam):
    # bar state is (1 - s/lam, 0); q_R - q_L = -2 s p(1)
    vb = 1 - s / lam
    if vb <= 0:
        return mp.inf
    return eta(vb, 0) - eta(1, s) + (-2 * s * p(1)) / (2 * lam)


# brute-force scan for the first sign change, then bisection
grid = [mp.mpf(k) / 1000 for k in range(301, 5001)]
lo = next(a for a, b in zip(grid, grid[1:]) if phi_sym(a) > 0 and phi_sym(b) <= 0)
hi = lo + mp.mpf(1) / 1000
for _ in range(200):
    mid = (lo + hi) / 2
    lo, hi = (lo, mid) if phi_sym(mid) <= 0 else (mid, hi)
lam_sym = hi

values = {
    "PSYS_UL": uL,
    "PSYS_UR": uR,
    "PSYS_SL": sL,
    "PSYS_SR": sR,
    "PSYS_PHI_VMIN": phi(vL),
    "PSYS_VSTAR": vstar,
    "PSYS_LAMBDA_MAX": lam_max,
    "PSYS_LAMBDA1": (uL - uR) / (vL + vR),
    "PSYS_GMS_D_HALF": lam_max / 2,
    "PSYS_SYM_S": s,
    "PSYS_SYM_LAMBDA_E": lam_sym,
    "PW_LAMBDA_SQUARE": (mp.mpf("1.5") + mp.sqrt(mp.mpf("3.25"))) / 2,
    "SINE_LAMBDA12_EQ2": abs(mp.cos(2)),
    "P_AT_1P5": r * mp.mpf("1.5") ** -3,
}
for k, v in values.items():
    print(f"{k} = {mp.nstr(v, 17)}")
