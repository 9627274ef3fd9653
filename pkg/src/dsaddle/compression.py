"""Stochastic b-bit quantization and difference-compressed communication.

The communication round keeps two shadow states per node: ``H`` (the node's
own last reconstruction) and ``Hw`` (the W-weighted mix of its neighbours'
shadows). Only the quantized innovation ``Q(nu - H)`` crosses the network.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .topology import NetworkTopology

__all__ = [
    "NonFiniteInput",
    "DimensionMismatch",
    "Quantizer",
    "CommState",
    "quantize",
    "comm_round",
    "bits_transmitted",
    "FLOAT_BITS",
]

FLOAT_BITS = 32


class NonFiniteInput(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Quantizer:
    """Unbiased infinity-norm quantizer with ``2**bits - 1`` levels."""

    bits: int

    def __post_init__(self):
        if int(self.bits) != self.bits or self.bits < 1:
            raise ValueError(f"bits must be a positive integer, got {self.bits!r}")

    @property
    def levels(self) -> int:
        return 2**self.bits - 1

    def delta(self, d: int) -> float:
        """Compression factor ``d / (4 tau^2)`` for vectors of dimension ``d``."""
        return d / (4.0 * self.levels**2)


def quantize(u: np.ndarray, q: Quantizer, rng: np.random.Generator) -> np.ndarray:
    """Stochastically round ``u`` onto the grid ``s * k / tau`` with ``s = max|u|``.

    The rounding is unbiased: each magnitude is pushed to the upper grid point
    with probability equal to its fractional position in the cell.
    """
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise NonFiniteInput("quantize received a non-finite value")
    s = np.max(np.abs(u)) if u.size else 0.0
    if s == 0.0:
        return np.zeros_like(u)
    tau = q.levels
    scaled = np.abs(u) / s * tau
    low = np.floor(scaled)
    # draw for every coordinate, so the stream advance does not depend on u
    up = rng.random(u.shape) < (scaled - low)
    return s * np.sign(u) * (low + up) / tau


@dataclass
class CommState:
    """Shadow states of one variable block, stacked over nodes (``m x d``)."""

    H: np.ndarray
    Hw: np.ndarray
    alpha: float

    @classmethod
    def initial(cls, z0: np.ndarray, topo: NetworkTopology, alpha: float) -> "CommState":
        z0 = np.asarray(z0, dtype=float)
        return cls(H=z0.copy(), Hw=topo.W @ z0, alpha=float(alpha))

    def copy(self) -> "CommState":
        return CommState(self.H.copy(), self.Hw.copy(), self.alpha)


def comm_round(
    nu: np.ndarray,
    state: CommState,
    topo: NetworkTopology,
    q: Quantizer | None,
    rngs: Sequence[np.random.Generator] | None = None,
    *,
    exact_shortcut: bool = True,
) -> tuple[np.ndarray, np.ndarray, CommState]:
    """One compressed exchange of the stacked payload ``nu`` (shape ``m x d``).

    Args:
        nu: payload per node.
        state: shadow states; not modified.
        topo: network, supplies ``W``.
        q: quantizer, or ``None`` for exact transmission.
        rngs: one generator per node (needed when ``q`` is given).
        exact_shortcut: with ``q=None`` return ``nu_hat = nu`` and
            ``nu_hat_w = W nu`` directly instead of going through the shadow
            differences. Both are equal in exact arithmetic; the shortcut is
            also bitwise equal to plain uncompressed mixing.

    Returns:
        ``(nu_hat, nu_hat_w, new_state)``.
    """
    nu = np.asarray(nu, dtype=float)
    if nu.shape != state.H.shape or nu.shape != state.Hw.shape or nu.shape[0] != topo.m:
        raise DimensionMismatch(
            f"payload shape {nu.shape} does not match shadow shape {state.H.shape} on {topo.m} nodes"
        )
    a = state.alpha
    if q is None and exact_shortcut:
        nu_hat = nu.copy()
        nu_hat_w = topo.W @ nu
    else:
        diff = nu - state.H
        if q is None:
            Q = diff
        else:
            if rngs is None or len(rngs) != topo.m:
                raise ValueError("comm_round needs one rng per node when quantizing")
            Q = np.stack([quantize(diff[i], q, rngs[i]) for i in range(topo.m)])
        nu_hat = state.H + Q
        nu_hat_w = state.Hw + topo.W @ Q
    new = CommState(
        H=(1.0 - a) * state.H + a * nu_hat,
        Hw=(1.0 - a) * state.Hw + a * nu_hat_w,
        alpha=a,
    )
    return nu_hat, nu_hat_w, new


def bits_transmitted(d: int, q: Quantizer | None, m: int) -> int:
    """Bits sent by ``m`` nodes for one vector of dimension ``d``.

    A quantized vector costs a sign bit plus ``b`` level bits per coordinate and
    one 32-bit scale. Without compression every coordinate is a 32-bit float.
    """
    if q is None:
        return m * d * FLOAT_BITS
    return m * (d * (q.bits + 1) + FLOAT_BITS)
