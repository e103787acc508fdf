"""Command line entry point: ``greedy-idp run|props|list``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import ConfigurationError
from .experiments import EXPERIMENTS, default_config, dump_config, load_config, run_experiment
from .greedy import MODES
from .props import FAULTS, property_suite


def _fmt_cell(v) -> str:
    if isinstance(v, float):
        return "--" if np.isnan(v) else f"{v:.3e}"
    return str(v)


def format_table(rows, columns=None) -> str:
    """Aligned plain-text table."""
    if not rows:
        return ""
    columns = columns or list(dict.fromkeys(k for r in rows for k in r))
    cells = [[_fmt_cell(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[k]) for row in cells)) for k, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(x.rjust(w) for x, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="greedy-idp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment over a list of mesh sizes")
    r.add_argument("experiment", nargs="?", choices=sorted(EXPERIMENTS),
                   help="experiment id (may come from --config instead)")
    r.add_argument("--config", help="key = value file; command-line flags override it")
    r.add_argument("--dofs", type=int, nargs="+", help="mesh sizes (kpp2d: approximate vertex count)")
    r.add_argument("--cfl", type=float)
    r.add_argument("--t-final", type=float, dest="t_final")
    r.add_argument("--t0", type=float, help="start time; the initial state is the exact solution there")
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--entropy", help="random | fixed:THETA | square")
    r.add_argument("--seed", type=int, nargs="+", dest="seeds", help="one or more RNG seeds")
    r.add_argument("--epsilon", type=float)
    r.add_argument("--snapshots", type=int, help="number of equally spaced snapshots kept per run")
    r.add_argument("--out", help="output directory")
    r.add_argument("--no-checks", action="store_true", help="skip the per-stage local checks")
    r.add_argument("--print-config", action="store_true", help="print the resolved config and exit")

    q = sub.add_parser("props", help="randomized property suite")
    q.add_argument("--trials", type=int, default=10_000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--fault", choices=FAULTS, help="inject a deliberate fault")

    sub.add_parser("list", help="list experiments and their defaults")
    return p


def _resolve(args) -> object:
    overrides = {k: getattr(args, k) for k in
                 ("dofs", "cfl", "t_final", "t0", "mode", "entropy", "seeds", "epsilon", "snapshots", "out")}
    if args.config:
        return load_config(args.config, experiment=args.experiment, **overrides)
    if args.experiment is None:
        raise ConfigurationError("name an experiment or pass --config")
    return default_config(args.experiment, **overrides)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list":
            for name, spec in EXPERIMENTS.items():
                print(f"{name}: {spec['description']}")
                print(f"  domain={spec['domain']} t_final={spec['t_final']} cfl={spec['cfl']} "
                      f"mode={spec['mode']} entropy={spec['entropy']} dofs={spec['dofs']}")
            return 0
        if args.command == "props":
            report = property_suite(seed=args.seed, trials=args.trials, fault=args.fault)
            print(report.to_text())
            return 0 if report.passed or args.fault else 1
        cfg = _resolve(args)
        if args.print_config:
            print(dump_config(cfg), end="")
            return 0

        def progress(row):
            print("  " + "  ".join(f"{k}={_fmt_cell(v)}" for k, v in row.items()), file=sys.stderr, flush=True)

        result = run_experiment(cfg, checks=not args.no_checks, progress=progress)
        cols = [c for c in ("seed", "dofs", "L1", "L1_rate", "L2", "L2_rate", "steps",
                            "left_front", "right_front", "max_principle_violation",
                            "entropy_violation", "w_violation", "max_mass_drift")
                if any(c in r for r in result["rows"])]
        print(format_table(result["rows"], cols))
        return 0
    except ConfigurationError as exc:
        print(f"greedy-idp: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
