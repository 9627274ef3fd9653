"""Glue between a :class:`RunConfig` and the library: build, plan, run."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .benchmark import BenchmarkSolution, benchmark_saddle, config_digest, load_benchmark
from .compression import Quantizer
from .config import RunConfig
from .data import load_libsvm, partition, synthetic_logistic
from .lyapunov import limit_points, lyapunov
from .params import HyperParams, derive_params
from .problems import SaddleProblem, auc_maximization, robust_logistic
from .scheduler import SwitchPlan, compute_cmax_c1_ve, theoretical_switch
from .solver import (
    PracticalSwitch,
    RunResult,
    TheoreticalSwitch,
    compression_delta,
    init_state,
    run_cdpssg,
    run_cdpsvrg,
    run_gsgo,
)
from .topology import NetworkTopology, build_topology
from .trace import Recorder, RunTrace

__all__ = ["Built", "build", "get_benchmark", "initial_phi0", "plan_switch", "execute"]


@dataclass
class Built:
    cfg: RunConfig
    problem: SaddleProblem
    topo: NetworkTopology
    quantizer: Quantizer | None
    hp: HyperParams

    @property
    def config_hash(self) -> str:
        return config_digest(self.cfg.problem_key())


def build(cfg: RunConfig) -> Built:
    if cfg.data == "synthetic":
        ds = synthetic_logistic(cfg.samples, cfg.features, seed=cfg.data_seed)
    else:
        ds = load_libsvm(cfg.data)
    pd = partition(ds, cfg.nodes, cfg.batches, seed=cfg.data_seed)
    if cfg.problem == "logistic":
        pr = robust_logistic(pd, cfg.lam, cfg.beta, cfg.radius_x, cfg.radius_y, cfg.strong_convexity)
    else:
        pr = auc_maximization(pd, cfg.lam, cfg.radius_x, cfg.radius_y)
    topo = build_topology(cfg.topology, cfg.nodes)
    q = None if cfg.quant_bits is None else Quantizer(cfg.quant_bits)
    hp = derive_params(pr, topo, compression_delta(q, pr.d_x, pr.d_y), p_ref=cfg.p_ref_value)
    return Built(cfg, pr, topo, q, hp)


def get_benchmark(b: Built) -> BenchmarkSolution | None:
    src = b.cfg.benchmark
    if src == "none":
        return None
    if src == "auto":
        return benchmark_saddle(b.problem, b.cfg.benchmark_iters, b.cfg.benchmark_tol, b.config_hash)
    return load_benchmark(src, expect_hash=b.config_hash)


def initial_phi0(b: Built, bench: BenchmarkSolution) -> float:
    """Exact phase-0 Lyapunov value at the replicated zero start."""
    pr = b.problem
    lp = limit_points(pr, bench.x_star, bench.y_star, b.hp.s0)
    st = init_state(np.zeros(pr.d_x), np.zeros(pr.d_y), b.topo)
    return lyapunov(st, b.hp.phase0, 0, lp, b.topo, b.hp.delta)


def plan_switch(b: Built, bench: BenchmarkSolution) -> SwitchPlan:
    Cm, C1, Ve, _ = compute_cmax_c1_ve(b.hp, b.topo.m, bench.stats)
    return theoretical_switch(b.cfg.epsilon, initial_phi0(b, bench), b.hp, Cm, C1, Ve)


def execute(b: Built, bench: BenchmarkSolution | None = None, stop_below: float | None = None,
            ) -> tuple[RunResult, RunTrace]:
    cfg = b.cfg
    rec = Recorder(b.problem, b.topo, b.hp, bench, every=cfg.trace_every, stop_below=stop_below)
    common = dict(seed=cfg.seed, observer=rec, hp=b.hp)
    if cfg.algorithm == "cdpsvrg":
        res = run_cdpsvrg(b.problem, b.topo, b.quantizer, cfg.T, **common)
    elif cfg.algorithm == "gsgo":
        res = run_gsgo(b.problem, b.topo, b.quantizer, cfg.T, **common)
    else:
        if cfg.switching == "practical":
            sw = PracticalSwitch(cfg.threshold, cfg.gossip_iters)
        else:
            T0 = cfg.T0_value
            if T0 is None:
                if bench is None:
                    raise ValueError("T0 = auto needs a benchmark")
                T0 = plan_switch(b, bench).switch_iter
            sw = TheoreticalSwitch(T0)
        res = run_cdpssg(b.problem, b.topo, b.quantizer, cfg.T, cfg.epsilon, sw, **common)
    return res, rec.trace
