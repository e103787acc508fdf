"""Experiment registry, configuration files and reproduction drivers."""

from __future__ import annotations

import configparser
import csv
import os
import platform
import tempfile
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError
from .greedy import EPSILON, MODES
from .integrator import RunResult, Scheme, run
from .mesh import GraphMesh, build_1d_uniform, build_2d_p1, periodic_dof_map, structured_triangulation
from .reference import (
    convergence_rates,
    psystem_two_shock,
    pwlinear_exact,
    relative_errors,
    sine_exact,
)
from .rng import RngStream
from .scalar_speeds import parse_entropy_strategy
from .systems import get_system

__all__ = [
    "ExperimentConfig",
    "EXPERIMENTS",
    "default_config",
    "load_config",
    "dump_config",
    "build_problem",
    "run_single",
    "run_experiment",
    "measure_front_speed",
]

KPP_LOW, KPP_HIGH = np.pi / 4.0, 14.0 * np.pi / 4.0
# the kpp2d mesh is the same for every run seed
KPP_MESH_SEED = 0


@dataclass
class ExperimentConfig:
    experiment: str
    dofs: list = field(default_factory=list)
    cfl: float = 0.5
    t_final: float = 1.0
    t0: float = 0.0
    mode: str = "greedy"
    entropy: str = "random"
    seeds: list = field(default_factory=lambda: [0])
    epsilon: float = EPSILON
    snapshots: int = 21
    out: str | None = None

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}; known: {sorted(EXPERIMENTS)}")
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigurationError(f"CFL number must lie in (0, 1], got {self.cfl}")
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if not self.dofs or any(int(n) < 3 for n in self.dofs):
            raise ConfigurationError(f"need mesh sizes >= 3, got {self.dofs}")
        if not 0.0 <= self.t0 < self.t_final:
            raise ConfigurationError(f"need 0 <= t0 < t_final, got {self.t0}, {self.t_final}")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError(f"need distinct seeds, got {self.seeds}")
        parse_entropy_strategy(self.entropy)
        system = get_system(EXPERIMENTS[self.experiment]["system"])
        if self.mode in ("gms", "hat-gms") and system.name != "psystem":
            raise ConfigurationError(f"{self.mode} is defined for the p-system only")
        if self.mode == "roe-only" and system.name == "psystem":
            raise ConfigurationError("roe-only is defined for scalar laws only")


# Defaults follow the published setups. kpp2d sizes count vertices.
EXPERIMENTS = {
    "pwlinear": dict(
        system="pwlinear", domain=(-2.0, 2.0), t_final=0.5, cfl=0.75, mode="greedy",
        entropy="fixed:0.5", dofs=[101, 201, 401, 801, 1601, 3201],
        description="piecewise-linear flux, data 1 | 3 at x = 0",
    ),
    "sonic1d": dict(
        system="sine", domain=(-1.0, 1.0), t_final=0.8, cfl=0.5, mode="greedy",
        entropy="random", dofs=[51, 101, 201, 401, 801, 1601, 3201, 6401],
        description="f(u) = sin u, data 3 pi | 0 at x = 0 (two sonic points)",
    ),
    "kpp2d": dict(
        system="kpp2d", domain=((-2.0, 2.0), (-2.5, 1.5)), t_final=1.0, cfl=0.5, mode="greedy",
        entropy="random", dofs=[30000],
        description="f(u) = (sin u, cos u), 14 pi/4 in the unit disc, pi/4 outside",
    ),
    "psystem": dict(
        system="psystem", domain=(0.0, 1.0), t_final=0.7, cfl=0.5, mode="greedy",
        entropy="random", dofs=[51, 101, 201, 401, 801, 1601],
        description="p-system, gamma = 3, two shocks from vL = 1.5, vR = 1000, jump at 0.8",
    ),
}


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {experiment!r}; known: {sorted(EXPERIMENTS)}")
    spec = EXPERIMENTS[experiment]
    cfg = ExperimentConfig(experiment=experiment, dofs=list(spec["dofs"]), cfl=spec["cfl"],
                           t_final=spec["t_final"], mode=spec["mode"], entropy=spec["entropy"])
    overrides = {k: v for k, v in overrides.items() if v is not None}
    cfg = replace(cfg, **overrides)
    cfg.dofs = [int(n) for n in cfg.dofs]
    cfg.seeds = [int(s) for s in np.atleast_1d(cfg.seeds)]
    cfg.validate()
    return cfg


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key, value: str):
    if key in ("dofs", "seeds"):
        return [int(v) for v in value.replace(",", " ").split()]
    if key in ("cfl", "t_final", "t0", "epsilon"):
        return float(value)
    if key == "snapshots":
        return int(value)
    return value.strip()


def load_config(path, **overrides) -> ExperimentConfig:
    """Read ``key = value`` lines (``#`` comments); keyword overrides win."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    text = Path(path).read_text()
    parser.read_string("[run]\n" + text)
    values = {}
    for key, raw in parser["run"].items():
        key = key.replace("-", "_")
        key = "seeds" if key == "seed" else key
        if key not in _TYPES:
            raise ConfigurationError(f"unknown config key {key!r} in {path}")
        values[key] = _coerce(key, raw)
    if "experiment" not in values and overrides.get("experiment") is None:
        raise ConfigurationError(f"{path} does not name an experiment")
    values.update({k: v for k, v in overrides.items() if v is not None})
    experiment = values.pop("experiment")
    return default_config(experiment, **values)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for key, value in asdict(cfg).items():
        if value is None:
            continue
        if key in ("dofs", "seeds"):
            value = " ".join(str(n) for n in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def build_problem(cfg: ExperimentConfig, n: int):
    """Mesh, system, initial state at ``t0`` and the exact solution (or ``None``)."""
    spec = EXPERIMENTS[cfg.experiment]
    system = get_system(spec["system"])
    if cfg.experiment == "kpp2d":
        # periodic box: side^2 vertices carry (side - 1)^2 dofs
        side = max(int(round(np.sqrt(n))), 3) + 1
        (x0, x1), (y0, y1) = spec["domain"]
        verts, tris = structured_triangulation(side, side, (x0, x1), (y0, y1), jitter=0.25, seed=KPP_MESH_SEED)
        mesh = build_2d_p1(verts, tris, periodic_dof_map(side, side))
        r = np.hypot(mesh.coords[:, 0], mesh.coords[:, 1])
        U0 = np.where(r <= 1.0, KPP_HIGH, KPP_LOW)
        return mesh, system, U0, None
    a, b = spec["domain"]
    mesh = build_1d_uniform(n - 1, (a, b), "pinned")
    x = mesh.coords[:, 0]
    if cfg.experiment == "pwlinear":
        exact = pwlinear_exact
    elif cfg.experiment == "sonic1d":
        exact = sine_exact
    else:
        exact = psystem_two_shock(system)
    return mesh, system, exact(x, cfg.t0), exact


def _scheme(cfg: ExperimentConfig, system, seed: int) -> Scheme:
    entropy = None
    if system.name != "psystem" and cfg.mode == "greedy":
        entropy = parse_entropy_strategy(cfg.entropy)
    return Scheme(system=system, mode=cfg.mode, entropy=entropy, rng=RngStream(seed),
                  epsilon=cfg.epsilon, cfl=cfg.cfl)


@dataclass
class SingleRun:
    n: int
    mesh: GraphMesh
    result: RunResult
    errors: dict | None
    exact: object = None


def run_single(cfg: ExperimentConfig, n: int, seed: int | None = None, checks: bool = True) -> SingleRun:
    seed = cfg.seeds[0] if seed is None else seed
    mesh, system, U0, exact = build_problem(cfg, n)
    scheme = _scheme(cfg, system, seed)
    scheme.checks = checks
    times = np.linspace(cfg.t0, cfg.t_final, max(cfg.snapshots, 2))
    result = run(mesh, scheme, U0, cfg.t_final, t0=cfg.t0, snapshot_times=times)
    errs = None
    if exact is not None:
        errs = relative_errors(mesh.lumped_mass, result.U, exact(mesh.coords[:, 0], cfg.t_final))
    return SingleRun(n=n, mesh=mesh, result=result, errors=errs, exact=exact)


def measure_front_speed(times, x, fields, level: float, window=None) -> float:
    """Speed of the first crossing of ``level`` (left to right) in ``window``.

    Crossing positions are found by linear interpolation between dofs and
    the speed is the least-squares slope over the last half of the time
    window. Raises ``ValueError`` if some snapshot has no crossing.
    """
    times = np.asarray(times, dtype=float)
    x = np.asarray(x, dtype=float)
    lo, hi = (-np.inf, np.inf) if window is None else window
    inside = (x >= lo) & (x <= hi)
    xs = x[inside]
    pos = []
    for f in fields:
        g = np.asarray(f, dtype=float)[inside] - level
        flip = np.flatnonzero((np.sign(g[:-1]) != np.sign(g[1:])) | (g[:-1] == 0))
        if flip.size == 0:
            raise ValueError(f"no crossing of level {level}")
        k = flip[0]
        if g[k] == 0:
            pos.append(xs[k])
        else:
            pos.append(xs[k] + (xs[k + 1] - xs[k]) * g[k] / (g[k] - g[k + 1]))
    pos = np.asarray(pos)
    half = times >= times[0] + 0.5 * (times[-1] - times[0])
    if np.count_nonzero(half) < 2:
        raise ValueError("need at least two snapshots in the last half of the window")
    slope, _ = np.polyfit(times[half], pos[half], 1)
    return float(slope)


def front_speeds(cfg: ExperimentConfig, single: SingleRun) -> dict:
    """Front speeds for the 1D experiments (``{}`` for kpp2d)."""
    snaps = single.result.snapshots
    times = [t for t, _ in snaps]
    x = single.mesh.coords[:, 0]
    if cfg.experiment == "pwlinear":
        return {"left_front": measure_front_speed(times, x, [U for _, U in snaps], 1.5)}
    if cfg.experiment == "psystem":
        ex = single.exact
        u = [U[:, 1] for _, U in snaps]
        return {
            "left_front": measure_front_speed(times, x, u, 0.5 * (ex.uL + ex.um)),
            "right_front": measure_front_speed(times, x, u, 0.5 * (ex.um + ex.uR)),
        }
    return {}


def _atomic_write(path: Path, writer) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_field(path: Path, mesh: GraphMesh, U) -> None:
    U = np.asarray(U)
    coord_names = ["x", "y"][: mesh.dim]
    comp_names = ["u"] if U.ndim == 1 else ["v", "u"]

    def w(fh):
        out = csv.writer(fh)
        out.writerow(coord_names + comp_names)
        vals = U[:, None] if U.ndim == 1 else U
        for c, row in zip(mesh.coords, vals):
            out.writerow([_fmt(a) for a in c] + [_fmt(a) for a in row])

    _atomic_write(path, w)


_STEP_COLS = ["step", "t", "dt", "mass", "max_principle_violation", "entropy_violation",
              "w_plus_violation", "w_minus_violation", "min_v", "u_min", "u_max", "restarts"]


def _write_steps(path: Path, result: RunResult) -> None:
    def w(fh):
        out = csv.writer(fh)
        out.writerow(_STEP_COLS)
        for r in result.reports:
            row = []
            for c in _STEP_COLS:
                v = getattr(r, c)
                row.append(" ".join(_fmt(m) for m in np.atleast_1d(v)) if c == "mass" else _fmt(v))
            out.writerow(row)

    _atomic_write(path, w)


def _write_table(path: Path, rows: list) -> None:
    cols = list(dict.fromkeys(k for r in rows for k in r))

    def w(fh):
        out = csv.writer(fh)
        out.writerow(cols)
        for r in rows:
            out.writerow([_fmt(r.get(c, "")) for c in cols])

    _atomic_write(path, w)


def _manifest(cfg: ExperimentConfig) -> str:
    spec = EXPERIMENTS[cfg.experiment]
    lines = [
        f"package = greedy_idp {__version__}",
        f"numpy = {np.__version__}",
        f"python = {platform.python_version()}",
        f"description = {spec['description']}",
        f"system = {spec['system']}",
        f"domain = {spec['domain']}",
        f"default_cfl = {spec['cfl']}",
        f"default_t_final = {spec['t_final']}",
        f"default_mode = {spec['mode']}",
        f"default_entropy = {spec['entropy']}",
        f"default_dofs = {' '.join(map(str, spec['dofs']))}",
        "time_stepping = SSP-RK3, dt from the first stage, viscosity rebuilt per stage",
        "boundary = 1D end dofs keep their initial values; kpp2d is periodic",
        "rng = numpy SeedSequence keyed by (seed, step, stage), one draw per dof",
    ]
    if spec["system"] == "psystem":
        lines.append("equation_of_state = p(v) = r v^-gamma, gamma = 3, r = 1/3")
    return dump_config(cfg) + "\n".join(lines) + "\n"


def _summarize(cfg, single: SingleRun, seed: int) -> dict:
    res = single.result
    reps = res.reports
    row = {"seed": seed, "dofs": single.mesh.n_dofs}
    if single.errors is not None:
        row.update(L1=single.errors["L1"], L2=single.errors["L2"])
    row["steps"] = res.steps
    row.update(front_speeds(cfg, single))
    row["max_principle_violation"] = max((r.max_principle_violation for r in reps), default=0.0)
    row["entropy_violation"] = max((r.entropy_violation for r in reps), default=0.0)
    row["w_violation"] = max((max(r.w_plus_violation, r.w_minus_violation) for r in reps), default=0.0)
    row["u_min"] = min((r.u_min for r in reps), default=float("nan"))
    row["u_max"] = max((r.u_max for r in reps), default=float("nan"))
    masses = np.array([np.atleast_1d(r.mass) for r in reps])
    if len(masses) > 1:
        drift = np.abs(np.diff(masses, axis=0)) / np.maximum(np.abs(masses[:-1]), 1e-300)
        row["max_mass_drift"] = float(drift.max())
    return row


def _add_rates(rows) -> None:
    if len(rows) > 1 and "L1" in rows[0]:
        h = 1.0 / (np.array([r["dofs"] for r in rows]) - 1.0)
        for key in ("L1", "L2"):
            for r, rate in zip(rows, convergence_rates(h, [r[key] for r in rows])):
                r[f"{key}_rate"] = float(rate)


def _median_rows(by_seed: dict) -> list:
    """Per-size medians over seeds of every numeric column."""
    first = next(iter(by_seed.values()))
    out = []
    for k, row in enumerate(first):
        med = {"seed": "median"}
        for key in row:
            if key == "seed":
                continue
            vals = [rows[k][key] for rows in by_seed.values() if key in rows[k]]
            med[key] = float(np.median(vals)) if key != "dofs" else row["dofs"]
        out.append(med)
    return out


def run_experiment(cfg: ExperimentConfig, out=None, checks: bool = True, progress=None) -> dict:
    """Run every mesh size for every seed; write artifacts when ``out`` is given.

    Returns ``{"rows": [...], "by_seed": {seed: rows}, "runs": {seed: [SingleRun]}}``.
    ``rows`` holds one row per (seed, size) with relative L1/L2 errors and
    rates (1D), step counts, measured front speeds and the worst local-check
    violations; with several seeds it ends with per-size median rows.
    With several seeds the fields and step reports go to ``seed_<s>/``.
    """
    cfg.validate()
    out = out if out is not None else cfg.out
    outdir = Path(out) if out else None
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
        _atomic_write(outdir / "manifest.txt", lambda fh: fh.write(_manifest(cfg)))
    by_seed, runs = {}, {}
    for seed in cfg.seeds:
        sub = outdir
        if outdir is not None and len(cfg.seeds) > 1:
            sub = outdir / f"seed_{seed}"
            sub.mkdir(exist_ok=True)
        rows = []
        for n in cfg.dofs:
            single = run_single(cfg, n, seed=seed, checks=checks)
            row = _summarize(cfg, single, seed)
            rows.append(row)
            runs.setdefault(seed, []).append(single)
            if sub is not None:
                _write_field(sub / f"field_{n}.csv", single.mesh, single.result.U)
                _write_steps(sub / f"steps_{n}.csv", single.result)
            if progress is not None:
                progress(row)
        _add_rates(rows)
        by_seed[seed] = rows
    table = [r for rows in by_seed.values() for r in rows]
    if len(cfg.seeds) > 1:
        table += _median_rows(by_seed)
    if outdir is not None:
        _write_table(outdir / "table.csv", table)
    return {"rows": table, "by_seed": by_seed, "runs": runs}
