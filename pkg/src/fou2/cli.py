"""Command-line front end: ``fou2 {eval,simulate,fpe,verify}``.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, SimulateBlock, VerifyBlock, load_config, parse_config
from .fpe import DriftSpec, SolverError, analytic_density, default_grid, solve
from .kernel import (
    covariance_quadrature,
    covariance_series,
    diffusion_rate,
    u_of_t_array,
    variance_quadrature,
    variance_series,
)
from .langevin import CapacityError, simulate, write_ensemble, write_ensemble_csv
from .specfun import DomainError, SeriesError

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class NumericFailure(RuntimeError):
    pass


def _fmt(v) -> str:
    return f"{v:.17g}"


def _header(cfg: RunConfig) -> str:
    return f"# fou2 {__version__} config {cfg.to_json()}\n"


def _write_csv(path, cfg, columns, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_header(cfg))
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path, cfg, payload):
    doc = {"fou2_version": __version__, "config": cfg.to_dict(), **payload}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _finite(value, what):
    if not math.isfinite(value):
        raise NumericFailure(f"non-finite {what}")
    return value


def cmd_eval(cfg: RunConfig, out: str) -> int:
    block = cfg.eval
    if block is None:
        raise ConfigError("eval needs an 'eval' block")
    p, ctl = cfg.params, cfg.series
    if block.mode == "variance":
        beta = block.beta if block.beta is not None else max(block.t)
        t = np.array(block.t)
        try:
            u = u_of_t_array(p, t, beta, ctl)
        except (SeriesError, ArithmeticError) as exc:
            raise NumericFailure(f"U(t) on beta={beta}: {exc}") from exc
        rows = []
        for ti, ui in zip(t, u):
            try:
                row = (
                    ti,
                    variance_series(p, ti, ctl),
                    variance_quadrature(p, ti, block.n_nodes),
                    ui,
                    diffusion_rate(p, ti, ctl),
                )
            except (SeriesError, ArithmeticError) as exc:
                raise NumericFailure(f"t={ti}: {exc}") from exc
            rows.append(tuple(_finite(v, f"value at t={ti}") for v in row))
        columns = ("t", "sigma2_series", "sigma2_quadrature", "U_t", "D_t")
    else:
        rows = []
        for ti, si in zip(block.t, block.s):
            try:
                cs = covariance_series(p, ti, si, ctl)
                cq = covariance_quadrature(p, ti, si, block.n_nodes) if si > 0 else 0.0
            except (SeriesError, ArithmeticError) as exc:
                raise NumericFailure(f"(t, s)=({ti}, {si}): {exc}") from exc
            rows.append((ti, si, _finite(cs, f"C({ti},{si})"), _finite(cq, f"C({ti},{si})")))
        columns = ("t", "s", "C_series", "C_quadrature")
    path = os.path.join(out, "eval.csv")
    _write_csv(path, cfg, columns, rows)
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out: str, threads: int) -> int:
    block = cfg.simulate
    if block is None:
        raise ConfigError("simulate needs a 'simulate' block")
    p, ctl = cfg.params, cfg.series
    ens = simulate(p, block.dt, block.n_steps, block.n_paths, block.seed, block.scheme, threads, ctl)
    write_ensemble(os.path.join(out, "ensemble.bin"), ens, cfg.to_dict())
    if block.csv:
        write_ensemble_csv(os.path.join(out, "ensemble.csv"), ens, f"fou2 {__version__} config {cfg.to_json()}")
    idx = np.arange(0, block.n_steps + 1, block.summary_stride)
    if idx[-1] != block.n_steps:
        idx = np.append(idx, block.n_steps)
    x = ens.paths[:, idx]
    var = np.mean(x * x, axis=0)
    rows = []
    for k, col, v in zip(idx, x.T, var):
        t = float(k * block.dt)
        analytic = variance_series(p, t, ctl) if t > 0 else 0.0
        if block.n_paths > 1 and k > 0:
            se = float(np.std(col * col, ddof=1) / math.sqrt(block.n_paths))
            flag = "pass" if abs(v - analytic) <= 3.0 * se else "fail"
        else:
            se, flag = None, "n/a"
        rows.append({"t": t, "variance": float(v), "se": se, "sigma2": analytic, "flag": flag})
    _write_json(os.path.join(out, "summary.json"), cfg, {"rows": rows})
    n_fail = sum(r["flag"] == "fail" for r in rows)
    print(f"simulated {block.n_paths} paths x {block.n_steps} steps; {n_fail} of {len(rows)} times outside 3 SE")
    return EXIT_OK


def cmd_fpe(cfg: RunConfig, out: str) -> int:
    block = cfg.fpe
    if block is None:
        raise ConfigError("fpe needs an 'fpe' block")
    p, ctl = cfg.params, cfg.series
    d = block.drift
    drift = DriftSpec(d.kind, g=d.g, omega=d.omega)
    grid = default_grid(p, drift, block.x0, block.t0, block.t1, block.n_x, block.n_t, ctl=ctl)
    snaps = block.snapshots or (block.t1,)
    report = solve(p, grid, drift, block.x0, snaps, block.tol, ctl)
    moments = []
    for i, snap in enumerate(report.snapshots):
        path = os.path.join(out, f"fpe_snapshot_{i:03d}.csv")
        _write_csv(path, cfg, ("x", "P"), zip(snap.x, snap.values))
        mean, var = snap.moments()
        entry = {"t": snap.t, "mass": snap.mass(), "mean": mean, "variance": var}
        if drift.kind != "harmonic":
            entry["expected_mean"] = block.x0 + (drift.g * (snap.t - block.t0) if drift.kind == "linear" else 0.0)
            entry["expected_variance"] = variance_series(p, snap.t, ctl)
        if drift.kind == "free":
            ref = analytic_density(p, snap.t, block.x0, snap.x, ctl)
            entry["l1_vs_analytic"] = float(np.sum(np.abs(snap.values - ref)) * snap.dx)
        moments.append(entry)
    payload = {
        "grid": {"x_min": grid.x_min, "x_max": grid.x_max, "n_x": grid.n_x, "dx": grid.dx},
        "steps_accepted": report.steps_accepted,
        "steps_rejected": report.steps_rejected,
        "max_mass_drift": report.max_mass_drift,
        "min_before_clip": report.min_before_clip,
        "clipped": report.clipped,
        "boundary_leakage": report.boundary_leakage,
        "moments": moments,
    }
    _write_json(os.path.join(out, "fpe_report.json"), cfg, payload)
    print(f"fpe: {len(moments)} snapshot(s), max mass drift {report.max_mass_drift:.3e}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: str | None) -> int:
    from . import verify

    results = verify.run(cfg.verify.tier)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<{width}}  measured={r.measured:.3e}  expected {r.expected}  ({r.seconds:.1f}s)")
    if out is not None:
        rows = [vars(r) for r in results]
        _write_json(os.path.join(out, "verify_report.json"), cfg, {"tier": cfg.verify.tier, "checks": rows})
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fou2", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fou2 {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("eval", "simulate", "fpe", "verify"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=name != "verify", help="JSON run configuration")
        cmd.add_argument("--out", default=".", help="output directory")
        if name == "simulate":
            cmd.add_argument("--seed", type=int, help="override simulate.seed")
            cmd.add_argument("--threads", type=int, default=1, help="worker threads (output does not depend on this)")
        if name == "verify":
            cmd.add_argument("--tier", help="quick or full")
    return parser


_DEFAULT_VERIFY = {"schema_version": 1, "params": {"alpha": 0.8, "gamma": 0.9, "lambda": 0.7}}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else parse_config(_DEFAULT_VERIFY)
        if args.command == "simulate" and args.seed is not None:
            if cfg.simulate is None:
                raise ConfigError("--seed needs a 'simulate' block")
            cfg = replace(cfg, simulate=SimulateBlock(**{**vars(cfg.simulate), "seed": args.seed}))
        if args.command == "verify" and args.tier is not None:
            cfg = replace(cfg, verify=VerifyBlock(args.tier))
        if getattr(args, "threads", 1) < 1:
            raise ConfigError("--threads must be at least 1")
        os.makedirs(args.out, exist_ok=True)
        if args.command == "eval":
            return cmd_eval(cfg, args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, args.threads)
        if args.command == "fpe":
            return cmd_fpe(cfg, args.out)
        return cmd_verify(cfg, args.out)
    except (ConfigError, DomainError, CapacityError) as exc:
        print(f"fou2: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericFailure, SeriesError, SolverError, ArithmeticError) as exc:
        print(f"fou2: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
