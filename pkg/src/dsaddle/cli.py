"""Command line entry point: ``dsaddle {run,benchmark,params,validate} CONFIG``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .benchmark import BenchmarkMismatch, NotConverged, benchmark_saddle, save_benchmark
from .config import ConfigError, RunConfig, load_config
from .data import EmptyDataset, ParseError, TooFewSamples
from .params import InfeasibleConstants
from .problems import SingleClassDataset
from .runner import build, execute, get_benchmark, plan_switch
from .topology import InvalidSize, UnconnectableGraph, spectral_check
from .trace import write_trace

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

_CONFIG_ERRORS = (ConfigError, ParseError, EmptyDataset, TooFewSamples, InvalidSize, UnconnectableGraph,
                  SingleClassDataset, BenchmarkMismatch, FileNotFoundError)
_NUMERIC_ERRORS = (InfeasibleConstants, NotConverged, FloatingPointError, np.linalg.LinAlgError)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dsaddle", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name, help_ in (
        ("run", "run the configured algorithm and write a trace CSV"),
        ("benchmark", "compute the reference saddle point and save it"),
        ("params", "print derived step sizes and the switch plan"),
        ("validate", "check topology and parameter feasibility only"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", type=Path)
        if name in ("run", "benchmark"):
            p.add_argument("--out", type=Path, default=None, help="output file (overrides the config)")
        if name == "run":
            p.add_argument("--seed", type=int, default=None)
            p.add_argument("--trace-every", type=int, default=None)
    return ap


def _overrides(cfg: RunConfig, args) -> RunConfig:
    kw = {}
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    if getattr(args, "trace_every", None) is not None:
        kw["trace_every"] = args.trace_every
    if getattr(args, "out", None) is not None and args.cmd == "run":
        kw["out"] = str(args.out)
    return cfg.replace(**kw) if kw else cfg


def _cmd_run(cfg: RunConfig) -> int:
    b = build(cfg)
    bench = get_benchmark(b)
    res, trace = execute(b, bench)
    write_trace(trace, cfg.out)
    sw = "" if res.switch_iter is None else f", switched at {res.switch_iter}"
    print(f"wrote {len(trace)} rows to {cfg.out} (grads={res.grads}, comms={res.comms}, bits={res.bits}{sw})")
    return EXIT_OK


def _cmd_benchmark(cfg: RunConfig, out: Path | None) -> int:
    b = build(cfg)
    sol = benchmark_saddle(b.problem, cfg.benchmark_iters, cfg.benchmark_tol, b.config_hash)
    path = out or Path(cfg.out).with_suffix(".bench.json")
    save_benchmark(sol, path)
    print(f"saved benchmark to {path} (residual={sol.residual:.3e}, iterations={sol.iterations})")
    return EXIT_OK


def _cmd_params(cfg: RunConfig) -> int:
    b = build(cfg)
    rows = b.hp.as_rows()
    bench = get_benchmark(b)
    if bench is not None:
        plan = plan_switch(b, bench)
        rows += [
            ("switch.T0_prime", plan.T0_prime),
            ("switch.T0", plan.T0),
            ("switch.epsilon0", plan.epsilon0),
            ("switch.phi0", plan.phi0),
            ("switch.C_max", plan.C_max),
            ("switch.C1", plan.C1),
            ("switch.V_e", plan.V_e),
            ("switch.T_total", plan.T_total if plan.T_total is not None else float("nan")),
        ]
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v:.6g}" if isinstance(v, float) else f"{k:<{width}}  {v}")
    return EXIT_OK


def _cmd_validate(cfg: RunConfig) -> int:
    b = build(cfg)
    rep = spectral_check(b.topo)
    print(f"topology {cfg.topology}({cfg.nodes}): row-sum dev {rep.row_sum_deviation:.2e}, "
          f"symmetry dev {rep.symmetry_deviation:.2e}, eig range [{rep.eig_min:.6f}, {rep.eig_max:.6f}], "
          f"multiplicity of 1: {rep.eig_one_multiplicity}")
    print(f"kappa_f={b.hp.kappa_f:.6g} kappa_g={b.hp.kappa_g:.6g} rho0={b.hp.rho0:.6f} rho={b.hp.rho:.6f}: feasible")
    return EXIT_OK if rep.ok else EXIT_NUMERIC


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _overrides(load_config(args.config), args)
        if args.cmd == "run":
            return _cmd_run(cfg)
        if args.cmd == "benchmark":
            return _cmd_benchmark(cfg, args.out)
        if args.cmd == "params":
            return _cmd_params(cfg)
        return _cmd_validate(cfg)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
