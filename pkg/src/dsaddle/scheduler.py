"""Switching-point arithmetic and the gossip-based practical detector.

The switch from the plain stochastic oracle to SVRG happens after ``T0``
iterations. With a known saddle point, ``T0`` follows from the initial
Lyapunov value ``Phi0``. Without it, each node estimates ``Phi0`` from
iterates at ``T0' = ceil(log 2 / -log rho0)`` and network averages obtained
by accelerated gossip.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .params import HyperParams
from .problems import SaddleProblem
from .topology import NetworkTopology

__all__ = [
    "DegenerateVariance",
    "DegenerateVarianceWarning",
    "GradStats",
    "SwitchPlan",
    "PracticalOutcome",
    "t0_prime",
    "t0_from_epsilon0",
    "compute_cmax_c1_ve",
    "theoretical_switch",
    "accelerated_gossip",
    "gossip_momentum",
    "local_phi0",
    "practical_switch",
]


class DegenerateVariance(ValueError):
    pass


class DegenerateVarianceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class GradStats:
    """Gradient statistics at the saddle point.

    ``C_x`` and ``C_y`` sum the squared batch-gradient norms over all nodes
    and batches. ``mean_x_sq`` and ``mean_y_sq`` are the squared norms of the
    node-averaged local gradients.
    """

    C_x: float
    C_y: float
    mean_x_sq: float
    mean_y_sq: float


@dataclass(frozen=True)
class SwitchPlan:
    T0_prime: int
    T0: int | np.ndarray
    epsilon0: float | np.ndarray
    phi0: float | np.ndarray
    C_max: float
    C1: float
    V_e: float
    rho0: float
    rho: float
    T_total: float | None = None
    degenerate: bool = False

    @property
    def switch_iter(self) -> int:
        """Single global switch iteration (the latest node's ``T0``)."""
        return int(np.max(self.T0))


def t0_prime(rho0: float) -> int:
    """Iterations for the phase-0 Lyapunov bound to halve."""
    return int(math.ceil(math.log(2.0) / -math.log(rho0)))


def t0_from_epsilon0(epsilon0, rho0: float):
    """``ceil(log eps0 / log rho0)``, clipped below at zero."""
    e = np.asarray(epsilon0, dtype=float)
    T = np.ceil(np.log(e) / math.log(rho0))
    T = np.maximum(T, 0).astype(np.int64)
    return int(T) if T.ndim == 0 else T


def c_max(hp: HyperParams) -> float:
    p0, p1 = hp.phase0, hp.phase1
    terms = [
        (p1.M_x + p1.c_tilde_x) / p0.M_x,
        (p1.M_y + p1.c_tilde_y) / p0.M_y,
        2.0,
    ]
    if p1.gamma_x > 0 and p1.gamma_y > 0:
        terms += [
            p1.s**2 * p0.gamma_x / (p0.s**2 * p1.gamma_x),
            p1.s**2 * p0.gamma_y / (p0.s**2 * p1.gamma_y),
        ]
    return max(terms)


def compute_cmax_c1_ve(hp: HyperParams, m: int, stats: GradStats) -> tuple[float, float, float, bool]:
    """``(C_max, C1, V_e, degenerate)``.

    ``degenerate`` flags ``V_e == 0``, which happens when every batch gradient
    vanishes at the saddle point (an unconstrained interior solution).
    """
    Cm = c_max(hp)
    C1 = 2.0 * m * math.sqrt(hp.delta) * (hp.s - hp.s0) ** 2 * (stats.mean_x_sq + stats.mean_y_sq)
    Ve = 2.0 * hp.s0**2 * (stats.C_x + stats.C_y) / ((1.0 - hp.rho0) * hp.n**2 * hp.p_min)
    return Cm, C1, Ve, Ve == 0.0


def theoretical_switch(
    epsilon: float,
    phi0: float,
    hp: HyperParams,
    C_max: float,
    C1: float,
    V_e: float,
    strict: bool = False,
) -> SwitchPlan:
    """Switch point ``T0`` and the total-iteration estimate ``T(eps)``.

    If ``V_e`` and ``C1`` both vanish the bound carries no variance term. With
    ``strict`` this raises :class:`DegenerateVariance`; otherwise it warns and
    falls back to ``T0 = T0'``.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0,1), got {epsilon}")
    if not phi0 > 0.0:
        raise ValueError(f"phi0 must be positive, got {phi0}")
    Tp = t0_prime(hp.rho0)
    eps0 = epsilon / (2.0 * C_max * phi0)
    if V_e == 0.0 and C1 == 0.0:
        msg = "V_e and C1 are zero; the switch point is undefined, falling back to T0'"
        if strict:
            raise DegenerateVariance(msg)
        warnings.warn(msg, DegenerateVarianceWarning, stacklevel=2)
        return SwitchPlan(Tp, Tp, eps0, phi0, C_max, C1, V_e, hp.rho0, hp.rho, None, True)
    T0 = t0_from_epsilon0(eps0, hp.rho0)
    inner = 2.0 * math.sqrt(C_max * phi0 * (C_max * V_e + C1)) / epsilon
    T_total = 2.0 / -math.log(hp.rho) * math.log(inner)
    return SwitchPlan(Tp, T0, eps0, phi0, C_max, C1, V_e, hp.rho0, hp.rho, T_total, False)


def gossip_momentum(topo: NetworkTopology) -> float:
    lam2 = topo.second_largest_abs_eig
    r = math.sqrt(max(0.0, 1.0 - lam2**2))
    return (1.0 - r) / (1.0 + r)


def accelerated_gossip(values: np.ndarray, topo: NetworkTopology, K: int) -> np.ndarray:
    """Heavy-ball consensus ``v_{k+1} = (1+eta) W v_k - eta v_{k-1}`` for ``K`` rounds.

    ``values`` is an ``m``-vector or an ``m x d`` array; rows are node values.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    v0 = np.asarray(values, dtype=float)
    W = topo.W
    eta = gossip_momentum(topo)
    prev, cur = v0, W @ v0
    for _ in range(K - 1):
        prev, cur = cur, (1.0 + eta) * (W @ cur) - eta * prev
    return cur


def local_phi0(
    hp: HyperParams,
    topo: NetworkTopology,
    x0: np.ndarray,
    y0: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    GX: np.ndarray,
    GY: np.ndarray,
    GX_avg: np.ndarray,
    GY_avg: np.ndarray,
) -> np.ndarray:
    """Per-node estimate of ``Phi0`` with ``z_i`` standing in for the saddle point.

    ``GX``/``GY`` are the local full gradients at ``z_i``; ``GX_avg``/``GY_avg``
    their gossip averages.
    """
    p0 = hp.phase0
    s0 = p0.s
    rd = math.sqrt(hp.delta)
    pinv = topo.pinv_norm

    def sq(A):
        return np.einsum("ij,ij->i", A, A)

    phi = p0.M_x * sq(x0 - X) + p0.M_y * sq(y0 - Y)
    if pinv > 0.0:
        phi = phi + 2 * s0**2 / p0.gamma_x * sq(GX - GX_avg) * pinv
        phi = phi + 2 * s0**2 / p0.gamma_y * sq(GY - GY_avg) * pinv
    if rd > 0.0:
        phi = phi + rd * sq(x0 - X + s0 * GX_avg) + rd * sq(y0 - Y - s0 * GY_avg)
    return phi


@dataclass
class PracticalOutcome:
    """Result of the practical detector at iteration ``T0'``."""

    switch_now: bool
    distances: np.ndarray
    distances_avg: np.ndarray
    phi_local: np.ndarray | None = None
    phi_bar: np.ndarray | None = None
    epsilon0: np.ndarray | None = None
    T0: np.ndarray | None = None
    T0_prime: int = 0
    C_max: float = 0.0
    grads: int = 0
    gossip_rounds: int = 0
    gossip_bits: int = 0

    @property
    def switch_iter(self) -> int:
        if self.switch_now or self.T0 is None:
            return self.T0_prime
        return max(self.T0_prime, int(np.max(self.T0)))


def practical_switch(
    problem: SaddleProblem,
    hp: HyperParams,
    topo: NetworkTopology,
    x0: np.ndarray,
    y0: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    X_prev: np.ndarray,
    Y_prev: np.ndarray,
    epsilon: float,
    threshold: float = 1e-8,
    gossip_iters: int = 20,
) -> PracticalOutcome:
    """Gossip-based switch detection at ``T0'`` without knowledge of the saddle point.

    Three gossip invocations: the squared step lengths, the stacked local
    gradients, and the local ``Phi0`` estimates.
    """
    m = topo.m
    Tp = t0_prime(hp.rho0)
    Cm = c_max(hp)
    dist = np.sum((X - X_prev) ** 2, axis=1) + np.sum((Y - Y_prev) ** 2, axis=1)
    gossip = (lambda v: accelerated_gossip(v, topo, gossip_iters)) if m > 1 else (lambda v: np.asarray(v, float))
    rounds = gossip_iters if m > 1 else 0
    dist_avg = gossip(dist)
    out = PracticalOutcome(
        switch_now=True, distances=dist, distances_avg=dist_avg, T0_prime=Tp, C_max=Cm,
        gossip_rounds=rounds, gossip_bits=rounds * m * 32,
    )
    if not np.all(dist_avg > threshold):
        return out
    GX = np.empty_like(X)
    GY = np.empty_like(Y)
    for i in range(m):
        GX[i], GY[i] = problem.grad_full(i, X[i], Y[i])
        out.grads += problem.node_size(i)
    d_x = X.shape[1]
    G_avg = gossip(np.hstack([GX, GY]))
    GX_avg, GY_avg = G_avg[:, :d_x], G_avg[:, d_x:]
    phi = local_phi0(hp, topo, x0, y0, X, Y, GX, GY, GX_avg, GY_avg)
    # heavy-ball gossip may overshoot slightly; keep the estimate positive
    phi_bar = np.maximum(gossip(phi), np.finfo(float).tiny)
    eps0 = epsilon / (2.0 * Cm * phi_bar)
    out.switch_now = False
    out.phi_local = phi
    out.phi_bar = phi_bar
    out.epsilon0 = eps0
    out.T0 = np.asarray(t0_from_epsilon0(eps0, hp.rho0)).reshape(-1)
    out.gossip_rounds += 2 * rounds
    out.gossip_bits += rounds * m * 32 * (1 + X.shape[1] + Y.shape[1])
    return out
