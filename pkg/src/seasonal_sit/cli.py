"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 integration or numerical failure, 4 inconsistent regime classification.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import io
from .analysis import classify_regime
from .bifurcation import compare_averaged, sweep_g0
from .config import (
    CompareSection,
    PoincareSection,
    RunConfig,
    SimulateSection,
    build_model,
    load_config,
    load_recipe,
    recipe_names,
)
from .errors import (
    ConfigError,
    Inconsistent,
    IntegrationError,
    NotConverged,
    OutOfRange,
    SuspectCount,
)
from .integrator import flow, integrate
from .model import averaged_model
from .poincare import find_fixed_points, omega_limit, poincare_eval
from .verify import CHECKS, default_models, run_checks

EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INCONSISTENT = 4


class _Run:
    """Resolved configuration, tolerances and output directory for one command."""

    def __init__(self, args: argparse.Namespace, cfg: Optional[RunConfig]):
        self.args = args
        self.cfg = cfg
        num = cfg.numerics if cfg is not None else None
        self.rtol = args.rtol if args.rtol is not None else (num.rtol if num else 1e-10)
        self.atol = args.atol if args.atol is not None else (num.atol if num else 1e-12)
        self.out = Path(args.out)
        self.model = build_model(cfg) if cfg is not None else None

    def path(self, name: str) -> Path:
        return self.out / name


def _load(args) -> Optional[RunConfig]:
    if args.config and args.recipe:
        raise ConfigError("give either --config or --recipe, not both")
    if args.config:
        return load_config(args.config)
    if args.recipe:
        return load_recipe(args.recipe)
    return None


def _require_model(run: _Run):
    if run.model is None:
        raise ConfigError("this command needs --config PATH or --recipe NAME")
    return run.model


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("MOSQ_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"MOSQ_THREADS must be an integer, got {env!r}") from None
    return 1


# -- subcommands --------------------------------------------------------------


def cmd_simulate(run: _Run) -> int:
    m = _require_model(run)
    sec = run.cfg.simulate or SimulateSection()
    w0s = run.args.w0 if run.args.w0 else sec.w0
    t_end = run.args.t_end or sec.t_end or sec.periods * m.period
    tol = run.cfg.numerics.attractor_tol
    sides = [("seasonal", m)]
    if sec.averaged or run.args.averaged:
        sides.append(("averaged", averaged_model(m)))
    summary = []
    for side, model in sides:
        for i, w0 in enumerate(w0s):
            traj = integrate(model, w0, 0.0, t_end, run.rtol, run.atol)
            name = f"simulate_{side}_{i}.csv"
            io.write_csv(run.path(name), ["t", "w"], zip(traj.t, traj.w))
            limit = omega_limit(model, w0, rtol=run.rtol, atol=run.atol)
            phase = math.fmod(t_end, model.period)
            on_orbit = limit if phase == 0.0 or limit == 0.0 else flow(model, limit, 0.0, phase, run.rtol, run.atol)
            near = abs(traj.terminal - on_orbit) <= tol * max(1.0, abs(on_orbit))
            summary.append(
                {
                    "model": side,
                    "w0": w0,
                    "t_end": t_end,
                    "terminal": traj.terminal,
                    "omega_limit": limit,
                    "attractor_value": on_orbit,
                    "near_attractor": near,
                    "file": name,
                }
            )
            print(
                f"{side} w0={io.format_value(float(w0))}: w(t_end)={io.format_value(traj.terminal)} "
                f"limit={io.format_value(limit)} near_attractor={str(near).lower()}"
            )
    io.write_json(run.path("simulate_summary.json"), {"schema_version": 1, "runs": summary})
    return 0


def cmd_poincare(run: _Run) -> int:
    m = _require_model(run)
    sec = run.cfg.poincare or PoincareSection()
    w_max = sec.w_max
    if w_max is None:
        w_max = find_fixed_points(m, run.rtol, run.atol).search_cap
    rows = []
    for k in range(sec.n):
        w = sec.w_min + (w_max - sec.w_min) * k / max(sec.n - 1, 1)
        ev = poincare_eval(m, w, run.rtol, run.atol)
        rows.append((w, ev.P, ev.dP, ev.d2P, ev.d3P))
    io.write_csv(run.path("poincare.csv"), ["w0", "P", "dP", "d2P", "d3P"], rows)
    print(f"wrote {len(rows)} rows to {run.path('poincare.csv')}")
    return 0


def _fixed_point_dicts(fps) -> list[dict]:
    return [
        {"w_star": p.w_star, "multiplier": p.multiplier, "stability": p.stability.value}
        for p in fps.points
    ]


def cmd_fixed_points(run: _Run) -> int:
    m = _require_model(run)
    num = run.cfg.numerics
    fps = find_fixed_points(m, run.rtol, run.atol, n_scan=num.n_scan, tol_mult=num.tol_mult)
    doc = {
        "schema_version": 1,
        "fixed_points": _fixed_point_dicts(fps),
        "delta": fps.delta,
        "search_cap": fps.search_cap,
    }
    io.write_json(run.path("fixed_points.json"), doc)
    for p in fps.points:
        print(f"{io.format_value(p.w_star)}  multiplier={io.format_value(p.multiplier)}  {p.stability.value}")
    return 0


def cmd_classify(run: _Run) -> int:
    m = _require_model(run)
    num = run.cfg.numerics
    report = classify_regime(
        m, run.rtol, run.atol, eps_crit=num.eps_crit, tol_p2=num.tol_p2, n_scan=num.n_scan, tol_mult=num.tol_mult
    )
    io.write_json(run.path("classify.json"), report.to_dict())
    sys.stdout.write(io.to_json(report.to_dict()))
    return 0


def cmd_bifurcate(run: _Run) -> int:
    m = _require_model(run)
    sec = run.cfg.sweep
    if sec is None:
        raise ConfigError("bifurcate needs a [sweep] section")
    num = run.cfg.numerics
    diagram = sweep_g0(
        m,
        sec.g0_min,
        sec.g0_max,
        sec.n_points,
        run.rtol,
        run.atol,
        n_scan=num.sweep_scan,
        refine=sec.refine,
        tol_p2=num.tol_p2,
        threads=_threads(run.args),
    )
    io.write_csv(
        run.path("bifurcation.csv"),
        ["g0", "w_star", "multiplier", "stability", "branch_id"],
        diagram.rows(),
    )
    summary = {"schema_version": 1, **diagram.summary()}
    io.write_json(run.path("bifurcation_summary.json"), summary)
    sys.stdout.write(io.to_json(summary))
    return 0


def cmd_compare_averaged(run: _Run) -> int:
    m = _require_model(run)
    sec = run.cfg.compare or CompareSection()
    comp = compare_averaged(m, sec.w0, sec.horizon_periods, run.rtol, run.atol)
    doc = {"schema_version": 1, **comp.to_dict()}
    io.write_json(run.path("compare_averaged.json"), doc)
    for side, outcome in (("seasonal", comp.seasonal), ("averaged", comp.averaged)):
        case = outcome.regime.case.value if outcome.regime is not None else "Inconsistent"
        limits = ", ".join(
            f"{io.format_value(w0)} -> {io.format_value(lim) if lim is not None else 'not converged'}"
            for w0, lim in outcome.limits.items()
        )
        print(f"{side}: {case}; {limits}")
    return 0


def cmd_verify(run: _Run) -> int:
    args = run.args
    if args.list:
        for name, (desc, _) in CHECKS.items():
            print(f"{name}: {desc}")
        return 0
    models = [("config", run.model)] if run.model is not None else default_models(args.battery_size, args.seed)
    try:
        results = run_checks(args.check or None, models, run.rtol, run.atol, args.seed)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    doc = {
        "schema_version": 1,
        "rtol": run.rtol,
        "atol": run.atol,
        "seed": args.seed,
        "models": [label for label, _ in models],
        "checks": [{k: v for k, v in r.to_dict().items() if k != "seconds"} for r in results],
        "passed": all(r.passed for r in results),
    }
    io.write_json(run.path("verify.json"), doc)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name} ({r.cases} models, {r.skipped} skipped, {r.seconds:.1f}s)")
        for msg in r.failures[:5]:
            print(f"    {msg}")
    return 0 if doc["passed"] else EXIT_VERIFY


COMMANDS = {
    "simulate": (cmd_simulate, "integrate trajectories and write (t, w) CSV files"),
    "poincare": (cmd_poincare, "tabulate P, P', P'', P''' over a grid of initial values"),
    "fixed-points": (cmd_fixed_points, "enumerate fixed points of the period map"),
    "classify": (cmd_classify, "classify the dynamical regime and write a JSON report"),
    "bifurcate": (cmd_bifurcate, "sweep the release density g0 and write a bifurcation diagram"),
    "compare-averaged": (cmd_compare_averaged, "compare seasonal and coefficient-averaged models"),
    "verify": (cmd_verify, "run the invariant battery"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run configuration")
    common.add_argument("--recipe", metavar="NAME", help=f"built-in configuration: {', '.join(recipe_names())}")
    common.add_argument("--out", default=".", metavar="DIR", help="output directory (default: .)")
    common.add_argument("--rtol", type=float, help="relative tolerance (overrides the config)")
    common.add_argument("--atol", type=float, help="absolute tolerance (overrides the config)")
    common.add_argument("--threads", type=int, help="worker processes for sweeps (env MOSQ_THREADS)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")

    parser = argparse.ArgumentParser(prog="seasonal-sit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "simulate":
            p.add_argument("--w0", type=float, action="append", help="initial value (repeatable)")
            p.add_argument("--t-end", type=float, help="final time")
            p.add_argument("--averaged", action="store_true", help="also simulate the averaged model")
        if name == "verify":
            p.add_argument("--check", action="append", metavar="NAME", help="run only this check (repeatable)")
            p.add_argument("--list", action="store_true", help="list the available checks")
            p.add_argument("--battery-size", type=int, default=20, help="random configurations (default 20)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = COMMANDS[args.command][0]
    try:
        run = _Run(args, _load(args))
        run.out.mkdir(parents=True, exist_ok=True)
        return handler(run)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Inconsistent as exc:
        print(f"inconsistent classification: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except (IntegrationError, NotConverged, OutOfRange, SuspectCount) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
