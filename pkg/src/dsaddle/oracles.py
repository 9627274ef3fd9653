"""Stochastic gradient oracles: plain importance-weighted (GSGO) and SVRG (SVRGO).

Both oracles act on stacked per-node iterates ``X`` (``m x d_x``) and ``Y``
(``m x d_y``), sample one batch index per node, and report how many
per-sample gradients they evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .problems import SaddleProblem

__all__ = [
    "StaleReferenceCache",
    "SamplingDistribution",
    "ReferenceState",
    "gsgo",
    "svrgo",
    "maybe_refresh_reference",
    "GSGOracle",
    "SVRGOracle",
]


class StaleReferenceCache(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplingDistribution:
    """Batch-sampling probabilities ``P_i`` (one row per node)."""

    probs: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.probs, dtype=float)
        if P.ndim != 2:
            raise ValueError("probs must be an m x n array")
        if np.any(P <= 0):
            raise ValueError("every batch needs a positive sampling probability")
        if np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("each row of probs must sum to 1")
        object.__setattr__(self, "probs", P)

    @classmethod
    def uniform(cls, m: int, n: int) -> "SamplingDistribution":
        return cls(np.full((m, n), 1.0 / n))

    @property
    def n(self) -> int:
        return self.probs.shape[1]

    @property
    def p_min(self) -> float:
        return float(self.probs.min())

    def sample(self, i: int, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n, p=self.probs[i]))

    def weight(self, i: int, l: int) -> float:
        """Importance weight ``1 / (n p_il)``."""
        return 1.0 / (self.n * self.probs[i, l])


@dataclass
class ReferenceState:
    """SVRG reference points with their cached full local gradients."""

    x_tilde: np.ndarray
    y_tilde: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    p_ref: float
    valid: np.ndarray
    refreshes: int = 0

    @classmethod
    def empty(cls, m: int, d_x: int, d_y: int, p_ref: float) -> "ReferenceState":
        if not 0.0 <= p_ref <= 1.0:
            raise ValueError(f"p_ref must lie in [0, 1], got {p_ref}")
        z = np.zeros
        return cls(z((m, d_x)), z((m, d_y)), z((m, d_x)), z((m, d_y)), float(p_ref), np.zeros(m, dtype=bool))

    @classmethod
    def at(cls, problem: SaddleProblem, X: np.ndarray, Y: np.ndarray, p_ref: float) -> tuple["ReferenceState", int]:
        """References set to the given iterates; returns the gradient cost too."""
        refs = cls.empty(X.shape[0], X.shape[1], Y.shape[1], p_ref)
        cost = sum(refs.set_node(problem, i, X[i], Y[i]) for i in range(X.shape[0]))
        return refs, cost

    def set_node(self, problem: SaddleProblem, i: int, x: np.ndarray, y: np.ndarray) -> int:
        self.x_tilde[i] = x
        self.y_tilde[i] = y
        self.gx[i], self.gy[i] = problem.grad_full(i, x, y)
        self.valid[i] = True
        self.refreshes += 1
        return problem.node_size(i)

    def copy(self) -> "ReferenceState":
        return ReferenceState(
            self.x_tilde.copy(),
            self.y_tilde.copy(),
            self.gx.copy(),
            self.gy.copy(),
            self.p_ref,
            self.valid.copy(),
            self.refreshes,
        )


def gsgo(problem: SaddleProblem, dist: SamplingDistribution, i: int, x, y, rng) -> tuple[np.ndarray, np.ndarray, int]:
    """Importance-weighted gradient of one sampled batch at node ``i``."""
    l = dist.sample(i, rng)
    gx, gy = problem.grad(i, l, x, y)
    w = dist.weight(i, l)
    if w != 1.0:
        gx, gy = w * gx, w * gy
    return gx, gy, problem.batch_size(i, l)


def svrgo(
    problem: SaddleProblem, dist: SamplingDistribution, refs: ReferenceState, i: int, x, y, rng
) -> tuple[np.ndarray, np.ndarray, int]:
    """Variance-reduced gradient: sampled batch correction plus the cached full gradient."""
    if not refs.valid[i]:
        raise StaleReferenceCache(f"node {i} has no reference point")
    l = dist.sample(i, rng)
    gx, gy = problem.grad(i, l, x, y)
    rx, ry = problem.grad(i, l, refs.x_tilde[i], refs.y_tilde[i])
    w = dist.weight(i, l)
    return w * (gx - rx) + refs.gx[i], w * (gy - ry) + refs.gy[i], 2 * problem.batch_size(i, l)


def maybe_refresh_reference(
    problem: SaddleProblem, refs: ReferenceState, X: np.ndarray, Y: np.ndarray, rngs: Sequence[np.random.Generator]
) -> int:
    """Per node, with probability ``p_ref`` move the reference to the current iterate.

    Mutates ``refs`` in place and returns the number of per-sample gradients
    spent recomputing full local gradients.
    """
    cost = 0
    for i in range(X.shape[0]):
        if rngs[i].random() < refs.p_ref:
            cost += refs.set_node(problem, i, X[i], Y[i])
    return cost


class GSGOracle:
    """Callable oracle over all nodes for the first (cheap) phase."""

    tag = "gsgo"

    def __init__(self, problem: SaddleProblem, dist: SamplingDistribution, rngs: Sequence[np.random.Generator]):
        self.problem, self.dist, self.rngs = problem, dist, rngs

    def __call__(self, X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
        Gx = np.empty_like(X)
        Gy = np.empty_like(Y)
        total = 0
        for i in range(X.shape[0]):
            Gx[i], Gy[i], c = gsgo(self.problem, self.dist, i, X[i], Y[i], self.rngs[i])
            total += c
        return Gx, Gy, total


class SVRGOracle:
    """SVRG oracle over all nodes; refreshes references after each call."""

    tag = "svrgo"

    def __init__(
        self,
        problem: SaddleProblem,
        dist: SamplingDistribution,
        refs: ReferenceState,
        rngs: Sequence[np.random.Generator],
        refresh_rngs: Sequence[np.random.Generator],
    ):
        self.problem, self.dist, self.refs = problem, dist, refs
        self.rngs, self.refresh_rngs = rngs, refresh_rngs

    def __call__(self, X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
        Gx = np.empty_like(X)
        Gy = np.empty_like(Y)
        total = 0
        for i in range(X.shape[0]):
            Gx[i], Gy[i], c = svrgo(self.problem, self.dist, self.refs, i, X[i], Y[i], self.rngs[i])
            total += c
        cost = maybe_refresh_reference(self.problem, self.refs, X, Y, self.refresh_rngs)
        return Gx, Gy, total + cost
