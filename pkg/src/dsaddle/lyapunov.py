"""Lyapunov functions measuring the distance of every iterate block to its limit."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import PhaseParams
from .problems import SaddleProblem
from .solver import NodeState
from .topology import NetworkTopology

__all__ = ["LimitPoints", "limit_points", "lyapunov", "sq_norm_pinv"]


@dataclass(frozen=True)
class LimitPoints:
    """Fixed point of every block for a given step size ``s``."""

    x_star: np.ndarray
    y_star: np.ndarray
    Dx: np.ndarray
    Dy: np.ndarray
    Hx: np.ndarray
    Hy: np.ndarray
    s: float


def limit_points(problem: SaddleProblem, x_star, y_star, s: float) -> LimitPoints:
    """``D* = -/+ (I - J) grad F(1 z*)`` and ``H* = 1 (z* -/+ s * mean_i grad f_i(z*))``."""
    m = problem.m
    GX = np.empty((m, problem.d_x))
    GY = np.empty((m, problem.d_y))
    for i in range(m):
        GX[i], GY[i] = problem.grad_full(i, x_star, y_star)
    mx, my = GX.mean(axis=0), GY.mean(axis=0)
    Hx = np.tile(x_star - s * mx, (m, 1))
    Hy = np.tile(y_star + s * my, (m, 1))
    return LimitPoints(np.asarray(x_star), np.asarray(y_star), -(GX - mx), GY - my, Hx, Hy, s)


def sq_norm_pinv(A: np.ndarray, topo: NetworkTopology) -> float:
    """``trace(A^T (I - W)^+ A)``; zero on a single node."""
    if topo.m == 1:
        return 0.0
    return float(np.sum(A * (topo.pinv_I_minus_W() @ A)))


def lyapunov(
    state: NodeState,
    params: PhaseParams,
    phase: int,
    lp: LimitPoints,
    topo: NetworkTopology,
    delta: float,
) -> float:
    """Phase-0 ``Phi`` or, for ``phase=1``, ``Phi~`` including the reference terms.

    ``lp`` must have been computed with ``s = params.s``.
    """
    if not math.isclose(lp.s, params.s, rel_tol=1e-15, abs_tol=0.0):
        raise ValueError("limit points were computed for a different step size")
    s = params.s
    rd = math.sqrt(delta)
    val = params.M_x * float(np.sum((state.X - lp.x_star) ** 2))
    val += params.M_y * float(np.sum((state.Y - lp.y_star) ** 2))
    if topo.m > 1:
        val += 2 * s**2 / params.gamma_x * sq_norm_pinv(state.Dx - lp.Dx, topo)
        val += 2 * s**2 / params.gamma_y * sq_norm_pinv(state.Dy - lp.Dy, topo)
    if rd > 0:
        val += rd * float(np.sum((state.cx.H - lp.Hx) ** 2))
        val += rd * float(np.sum((state.cy.H - lp.Hy) ** 2))
    if phase == 1:
        if state.refs is None:
            raise ValueError("phase-1 Lyapunov needs reference points")
        val += params.c_tilde_x * float(np.sum((state.refs.x_tilde - lp.x_star) ** 2))
        val += params.c_tilde_y * float(np.sum((state.refs.y_tilde - lp.y_star) ** 2))
    return float(val)
