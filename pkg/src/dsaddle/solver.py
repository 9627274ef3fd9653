"""Compressed decentralized primal-dual hybrid gradient iteration and run drivers.

Per-node quantities are stacked row-wise: ``X`` is ``m x d_x``, ``Y`` is
``m x d_y``. One iteration evaluates an oracle at every node, then runs one
compressed exchange for the primal block and one for the dual block.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Protocol

import numpy as np

from .compression import CommState, Quantizer, bits_transmitted, comm_round
from .oracles import GSGOracle, ReferenceState, SamplingDistribution, SVRGOracle
from .params import HyperParams, PhaseParams, derive_params
from .problems import SaddleProblem
from .rng import StreamBank
from .scheduler import PracticalOutcome, practical_switch, t0_prime
from .topology import NetworkTopology

__all__ = [
    "NodeState",
    "IterRecord",
    "RunResult",
    "TheoreticalSwitch",
    "PracticalSwitch",
    "init_state",
    "ipdhg_step",
    "compression_delta",
    "run_cdpsvrg",
    "run_cdpssg",
    "run_gsgo",
]


class Oracle(Protocol):
    tag: str

    def __call__(self, X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]: ...


@dataclass
class NodeState:
    X: np.ndarray
    Y: np.ndarray
    Dx: np.ndarray
    Dy: np.ndarray
    cx: CommState
    cy: CommState
    refs: ReferenceState | None = None

    @property
    def m(self) -> int:
        return self.X.shape[0]

    def copy(self) -> "NodeState":
        return NodeState(
            self.X.copy(), self.Y.copy(), self.Dx.copy(), self.Dy.copy(), self.cx.copy(), self.cy.copy(),
            None if self.refs is None else self.refs.copy(),
        )


def compression_delta(q: Quantizer | None, d_x: int, d_y: int) -> float:
    """Compression factor used for parameter derivation (the larger block)."""
    if q is None:
        return 0.0
    return q.delta(max(d_x, d_y))


def init_state(
    x0: np.ndarray, y0: np.ndarray, topo: NetworkTopology, alpha_x: float = 1.0, alpha_y: float = 1.0
) -> NodeState:
    """Replicate ``(x0, y0)`` on every node with zero multipliers and ``Hw = W H``."""
    m = topo.m
    X = np.tile(np.asarray(x0, dtype=float), (m, 1))
    Y = np.tile(np.asarray(y0, dtype=float), (m, 1))
    return NodeState(
        X=X,
        Y=Y,
        Dx=np.zeros_like(X),
        Dy=np.zeros_like(Y),
        cx=CommState.initial(X, topo, alpha_x),
        cy=CommState.initial(Y, topo, alpha_y),
    )


def ipdhg_step(
    state: NodeState,
    params: PhaseParams,
    problem: SaddleProblem,
    topo: NetworkTopology,
    quantizer: Quantizer | None,
    oracle: Oracle | Callable,
    rngs: StreamBank | None = None,
    grads: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[NodeState, int]:
    """One synchronous iteration; returns the new state and gradients spent.

    ``grads`` short-circuits the oracle with precomputed ``(Gx, Gy)``.
    """
    s = params.s
    if grads is None:
        Gx, Gy, spent = oracle(state.X, state.Y)
    else:
        (Gx, Gy), spent = grads, 0
    qx = rngs["quantize_x"] if rngs is not None and quantizer is not None else None
    qy = rngs["quantize_y"] if rngs is not None and quantizer is not None else None

    nux = state.X - s * Gx - s * state.Dx
    hx, hwx, cx = comm_round(nux, replace(state.cx, alpha=params.alpha_x), topo, quantizer, qx)
    ex = hx - hwx
    Dx = state.Dx + (params.gamma_x / (2.0 * s)) * ex if s > 0 else state.Dx.copy()
    X = problem.prox_g_rows(nux - (params.gamma_x / 2.0) * ex)

    nuy = state.Y + s * Gy - s * state.Dy
    hy, hwy, cy = comm_round(nuy, replace(state.cy, alpha=params.alpha_y), topo, quantizer, qy)
    ey = hy - hwy
    Dy = state.Dy + (params.gamma_y / (2.0 * s)) * ey if s > 0 else state.Dy.copy()
    Y = problem.prox_r_rows(nuy - (params.gamma_y / 2.0) * ey)

    return NodeState(X, Y, Dx, Dy, cx, cy, state.refs), spent


@dataclass(frozen=True)
class TheoreticalSwitch:
    """Switch after a fixed number of phase-0 iterations."""

    T0: int


@dataclass(frozen=True)
class PracticalSwitch:
    threshold: float = 1e-8
    gossip_iters: int = 20


@dataclass
class IterRecord:
    """What an observer sees after each iteration (``t`` counts from 1).

    An observer that returns a truthy value stops the run after that iteration.
    """

    t: int
    tag: str
    grads: int
    comms: int
    bits: int
    state: NodeState
    params: PhaseParams
    phase: int
    wall_ns: int


@dataclass
class RunResult:
    state: NodeState
    hp: HyperParams
    grads: int
    comms: int
    bits: int
    switch_iter: int | None
    practical: PracticalOutcome | None = None
    tags: list[str] = field(default_factory=list)


def _engine(
    problem: SaddleProblem,
    topo: NetworkTopology,
    quantizer: Quantizer | None,
    T: int,
    seed: int,
    observer: Callable[[IterRecord], None] | None,
    hp: HyperParams | None,
    p_ref: float | None,
    dist: SamplingDistribution | None,
    x0: np.ndarray | None,
    y0: np.ndarray | None,
    switch_at: int | None,
    practical: PracticalSwitch | None,
    epsilon: float | None,
) -> RunResult:
    if T < 1:
        raise ValueError("T must be at least 1")
    if problem.m != topo.m:
        raise ValueError(f"problem has {problem.m} nodes, topology has {topo.m}")
    m = topo.m
    if dist is None:
        dist = SamplingDistribution.uniform(m, problem.n)
    if hp is None:
        delta = compression_delta(quantizer, problem.d_x, problem.d_y)
        hp = derive_params(problem, topo, delta, p_ref=p_ref, n=dist.n, p_min=dist.p_min)
    x0 = np.zeros(problem.d_x) if x0 is None else np.asarray(x0, dtype=float)
    y0 = np.zeros(problem.d_y) if y0 is None else np.asarray(y0, dtype=float)

    bank = StreamBank(seed, m)
    state = init_state(x0, y0, topo, hp.phase0.alpha_x, hp.phase0.alpha_y)
    gsg = GSGOracle(problem, dist, bank["batch"])
    svr: SVRGOracle | None = None
    step_bits = bits_transmitted(problem.d_x, quantizer, m) + bits_transmitted(problem.d_y, quantizer, m)

    grads = comms = bits = 0
    phase = 0
    tags: list[str] = []
    outcome: PracticalOutcome | None = None
    target = switch_at
    X_prev = Y_prev = None
    t_start = time.perf_counter_ns()

    for t in range(T):
        if phase == 0 and practical is not None and target is None and t == t0_prime(hp.rho0):
            outcome = practical_switch(
                problem, hp, topo, x0, y0, state.X, state.Y, X_prev, Y_prev, epsilon,
                practical.threshold, practical.gossip_iters,
            )
            grads += outcome.grads
            comms += outcome.gossip_rounds
            bits += outcome.gossip_bits
            target = outcome.switch_iter
        if phase == 0 and target is not None and t >= target:
            refs, cost = ReferenceState.at(problem, state.X, state.Y, hp.p_ref)
            grads += cost
            state.refs = refs
            svr = SVRGOracle(problem, dist, refs, bank["batch"], bank["refresh"])
            phase = 1
        params = hp.phase1 if phase else hp.phase0
        oracle = svr if phase else gsg
        if practical is not None and phase == 0:
            X_prev, Y_prev = state.X, state.Y
        state, spent = ipdhg_step(state, params, problem, topo, quantizer, oracle, bank)
        grads += spent
        comms += 2
        bits += step_bits
        tags.append(oracle.tag)
        if observer is not None:
            rec = IterRecord(t + 1, oracle.tag, grads, comms, bits, state, params, phase,
                             time.perf_counter_ns() - t_start)
            if observer(rec):
                break

    return RunResult(state, hp, grads, comms, bits, target if phase else None, outcome, tags)


def run_cdpsvrg(
    problem: SaddleProblem,
    topo: NetworkTopology,
    quantizer: Quantizer | None,
    T: int,
    seed: int = 0,
    observer: Callable[[IterRecord], None] | None = None,
    *,
    hp: HyperParams | None = None,
    p_ref: float | None = None,
    dist: SamplingDistribution | None = None,
    x0: np.ndarray | None = None,
    y0: np.ndarray | None = None,
) -> RunResult:
    """SVRG oracle from the first iteration (references set at ``z_0``)."""
    return _engine(problem, topo, quantizer, T, seed, observer, hp, p_ref, dist, x0, y0, 0, None, None)


def run_gsgo(
    problem: SaddleProblem,
    topo: NetworkTopology,
    quantizer: Quantizer | None,
    T: int,
    seed: int = 0,
    observer: Callable[[IterRecord], None] | None = None,
    **kw,
) -> RunResult:
    """Plain stochastic oracle throughout (phase-0 parameters)."""
    return _engine(problem, topo, quantizer, T, seed, observer, kw.get("hp"), kw.get("p_ref"), kw.get("dist"),
                   kw.get("x0"), kw.get("y0"), None, None, None)


def run_cdpssg(
    problem: SaddleProblem,
    topo: NetworkTopology,
    quantizer: Quantizer | None,
    T: int,
    epsilon: float | None = None,
    switching: TheoreticalSwitch | PracticalSwitch = PracticalSwitch(),
    seed: int = 0,
    observer: Callable[[IterRecord], None] | None = None,
    *,
    hp: HyperParams | None = None,
    p_ref: float | None = None,
    dist: SamplingDistribution | None = None,
    x0: np.ndarray | None = None,
    y0: np.ndarray | None = None,
) -> RunResult:
    """Plain stochastic oracle until the switch point, SVRG afterwards.

    With :class:`TheoreticalSwitch` the switch iteration is given. With
    :class:`PracticalSwitch` it is detected at ``T0'`` by gossip, which needs
    ``epsilon``.
    """
    if isinstance(switching, TheoreticalSwitch):
        if switching.T0 < 0:
            raise ValueError("T0 must be non-negative")
        return _engine(problem, topo, quantizer, T, seed, observer, hp, p_ref, dist, x0, y0, switching.T0, None,
                       None)
    if epsilon is None or not 0.0 < epsilon < 1.0:
        raise ValueError("practical switching needs epsilon in (0, 1)")
    return _engine(problem, topo, quantizer, T, seed, observer, hp, p_ref, dist, x0, y0, None, switching, epsilon)
