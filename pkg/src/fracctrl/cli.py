"""Command line front end: ``fracctrl <subcommand> [--scenario PATH] ...``.

Exit codes: 0 ok, 1 configuration error, 2 non-convergence, 3 failed
hypothesis or self-test check.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .control import build_gramian
from .fbm import FbmGrid, QCovariance, fbm_cov, sample_qfbm
from .hypotheses import estimate_constants, hypothesis_table, p_integral
from .scenario import ConfigError, Scenario, load_scenario, shipped_scenario
from .solver import NonConvergence, monte_carlo, simulate_controlled

EXIT_OK, EXIT_CONFIG, EXIT_NONCONV, EXIT_CHECK = 0, 1, 2, 3


def _load(args) -> Scenario:
    scen = load_scenario(args.scenario) if args.scenario else shipped_scenario()
    solver, control = {}, {}
    if getattr(args, "seed", None) is not None:
        solver["seed"] = args.seed
    if getattr(args, "paths", None) is not None:
        solver["n_paths"] = args.paths
    if getattr(args, "workers", None) is not None:
        solver["workers"] = args.workers
    if getattr(args, "tol", None) is not None:
        solver["tol"] = args.tol
    if getattr(args, "reg", None) is not None:
        control["reg"] = args.reg
    if solver or control:
        scen = scen.replace(solver=solver, control=control)
    return scen


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out: Path, scen: Scenario, subcommand: str, seeds, extra=None) -> None:
    """Everything needed to reproduce the outputs; the clock only appears under metadata."""
    _write_json(out / "manifest.json", {
        "scenario": scen.source,
        "subcommand": subcommand,
        "seeds": list(seeds),
        "out_dir": str(out),
        "version": __version__,
        "config_hash": scen.config_hash(),
        "config": scen.config,
        "options": extra or {},
        "metadata": {"created": _dt.datetime.now(_dt.timezone.utc).isoformat()},
    })


def cmd_simulate(args) -> int:
    scen = _load(args)
    out = _out_dir(args)
    write_manifest(out, scen, "simulate", [scen.seed], {"reg": scen.reg, "tol": scen.tol})
    try:
        rep = simulate_controlled(scen.model, scen.seed, scen.reg, scen.tol, scen.max_iter,
                                  scen.outer_max, scen.outer_rtol)
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    rep.trajectory.to_csv(out / "trajectory.csv")
    rep.law.to_csv(out / "control.csv")
    _write_json(out / "report.json", rep.summary())
    print(f"terminal error {rep.terminal_error:.6e} (relative {rep.relative_error:.3e}), "
          f"control energy {rep.control_energy:.6e}, status {rep.status}")
    return EXIT_OK


PATH_FIELDS = ("terminal_error", "relative_error", "control_energy", "tail_energy",
               "iterations", "outer_iterations", "status")


def cmd_montecarlo(args) -> int:
    scen = _load(args)
    out = _out_dir(args)
    write_manifest(out, scen, "montecarlo", [scen.seed],
                   {"n_paths": scen.n_paths, "reg": scen.reg, "tol": scen.tol})
    stats = monte_carlo(scen.model, scen.n_paths, scen.seed, scen.reg, scen.tol, scen.max_iter,
                        scen.outer_max, scen.outer_rtol, workers=scen.workers)
    with (out / "paths.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("path", "seed") + PATH_FIELDS)
        for rep in stats.reports:
            s = rep.summary()
            w.writerow([rep.path_index, rep.seed] + [repr(s[k]) if isinstance(s[k], float) else s[k]
                                                    for k in PATH_FIELDS])
    _write_json(out / "aggregate.json", stats.summary())
    te = stats.terminal_error
    print(f"{len(stats.reports)}/{stats.n_paths} paths: mean terminal error {te['mean']:.6e} "
          f"+- {te['se']:.2e}, mean control energy {stats.control_energy['mean']:.6e}")
    if stats.failures:
        print(f"error: failed paths {stats.failures}", file=sys.stderr)
        return EXIT_NONCONV if "NonConvergence" in stats.failures else EXIT_CONFIG
    return EXIT_OK


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.6e}"
    return str(v)


def cmd_check(args) -> int:
    scen = _load(args)
    model = scen.model
    gram = build_gramian(model, scen.reg)
    k = estimate_constants(model, gram, seed=scen.seed)
    table = hypothesis_table(model, k, p_integral(model))
    print(f"scenario {scen.source}  T={model.t_end}  reg={scen.reg:g}")
    print("constants:")
    for name, v in table["constants"].items():
        print(f"  {name:<13} {_fmt(v)}")
    print(f"  {'p_integral':<13} {_fmt(table['p_integral'])}")
    print("hypotheses:")
    for name, row in table["hypotheses"].items():
        detail = ", ".join(f"{key}={_fmt(v)}" for key, v in row.items() if key != "holds")
        print(f"  {name}  {'PASS' if row['holds'] else 'FAIL'}  {detail}")
    h6 = table["hypotheses"]["H6"]
    print(f"condition lhs {h6['lhs']:.12e} (grouped as in the growth estimate: {h6['step1_lhs']:.12e})")
    print(f"nu {table['nu']:.12e}")
    if args.out:
        out = _out_dir(args)
        write_manifest(out, scen, "check-hypotheses", [scen.seed], {"reg": scen.reg})
        _write_json(out / "hypotheses.json", table)
    return EXIT_OK if table["all_hold"] else EXIT_CHECK


def cmd_fbm_sample(args) -> int:
    scen = _load(args)
    model = scen.model
    grid = FbmGrid(model.t_end, model.n_steps, model.hurst)
    q = QCovariance.power_law(model.n_modes, model.sigma.q_power, model.sigma.q_scale)
    out = _out_dir(args)
    write_manifest(out, scen, "fbm-sample", [scen.seed])
    path = sample_qfbm(grid, q, scen.seed)
    path.to_csv(out / "fbm.csv")
    print(f"wrote {grid.n_steps} steps x {q.n_modes} modes to {out / 'fbm.csv'}")
    return EXIT_OK


def _selftest_checks():
    """Small oracle-backed checks that run in a few seconds."""
    from scipy.special import gamma as sgamma

    from .fraccalc import SampledFn, rl_integral
    from .specfun import MLParams, mainardi_density, mittag_leffler

    yield "E_{1,1}(-1) = exp(-1)", abs(mittag_leffler(MLParams(1.0, 1.0), -1.0) - math.exp(-1.0)), 1e-14
    yield "E_{1/2,1}(-1) = exp(1) erfc(1)", abs(mittag_leffler(MLParams(0.5, 1.0), -1.0) - 0.4275835761558070), 1e-13
    yield "E_{0.75,0.75}(-1)", abs(mittag_leffler(MLParams(0.75, 0.75), -1.0) - 0.23223772010096144), 1e-12
    yield "eta_{1/2}(1) = exp(-1/4)/sqrt(pi)", abs(mainardi_density(0.5, 1.0) - math.exp(-0.25) / math.sqrt(math.pi)), 1e-12
    yield "fBm covariance at (0.5, 1), H=0.75", abs(fbm_cov(0.5, 1.0, 0.75) - 0.5), 1e-15
    f = SampledFn.from_function(lambda t: t, 1.0, 1024)
    yield "J^0.5 t at t=1", abs(rl_integral(f, 0.5).values[-1] - 1.0 / sgamma(2.5)), 1e-8


def cmd_selftest(args) -> int:
    ok = True
    for name, err, tol in _selftest_checks():
        good = bool(err <= tol)
        ok &= good
        print(f"{'PASS' if good else 'FAIL'}  {name}  error {err:.2e} (tol {tol:.0e})")
    return EXIT_OK if ok else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracctrl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--scenario", metavar="PATH", help="scenario TOML (default: shipped scenario)")
        p.add_argument("--seed", type=int, help="seed (overrides [solver] seed)")
        p.add_argument("--out", metavar="DIR", required=out_required, help="output directory")
        p.add_argument("--reg", type=float, help="Gramian regularisation (overrides [control] reg)")
        p.add_argument("--tol", type=float, help="Picard tolerance (overrides [solver] tol)")

    p = sub.add_parser("simulate", help="one controlled path")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("montecarlo", help="independent controlled paths and their statistics")
    common(p)
    p.add_argument("--paths", type=int, help="number of paths (overrides [solver] n_paths)")
    p.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("check-hypotheses", help="constants and the sufficient condition")
    common(p, out_required=False)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("fbm-sample", help="one Q-fBm path on the scenario grid")
    common(p)
    p.set_defaults(func=cmd_fbm_sample)

    p = sub.add_parser("selftest", help="quick oracle checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
