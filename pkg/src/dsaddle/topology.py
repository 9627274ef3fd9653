"""Communication graphs and Metropolis-Hastings mixing matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "InvalidSize",
    "UnconnectableGraph",
    "NetworkTopology",
    "SpectralReport",
    "build_topology",
    "spectral_check",
    "TOPOLOGY_KINDS",
]

TOPOLOGY_KINDS = ("ring", "torus2d", "complete", "path")


class InvalidSize(ValueError):
    pass


class UnconnectableGraph(ValueError):
    pass


@dataclass(frozen=True)
class NetworkTopology:
    """Undirected graph plus a symmetric doubly stochastic weight matrix.

    The spectral fields refer to the Laplacian-like matrix ``I - W``:
    ``lambda_max_IW`` is its largest eigenvalue and ``lambda_second_min_IW``
    its second smallest one (zero eigenvalue excluded).
    """

    kind: str
    m: int
    adjacency: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)
    eigvals_W: np.ndarray = field(repr=False)
    eigvecs_W: np.ndarray = field(repr=False)
    lambda_max_IW: float
    lambda_second_min_IW: float
    kappa_g: float

    @classmethod
    def single_node(cls) -> "NetworkTopology":
        """Degenerate one-node network (``W = [1]``), used for centralized runs."""
        one = np.ones((1, 1))
        return cls(
            kind="single",
            m=1,
            adjacency=np.zeros((1, 1), dtype=bool),
            W=one,
            eigvals_W=np.ones(1),
            eigvecs_W=one.copy(),
            lambda_max_IW=0.0,
            lambda_second_min_IW=0.0,
            kappa_g=1.0,
        )

    @property
    def I_minus_W(self) -> np.ndarray:
        return np.eye(self.m) - self.W

    def pinv_I_minus_W(self) -> np.ndarray:
        """Moore-Penrose pseudo-inverse of ``I - W`` from the cached eigenpairs."""
        lam = 1.0 - self.eigvals_W
        keep = lam > 1e-12 * max(1.0, float(np.max(np.abs(lam))))
        inv = np.zeros_like(lam)
        inv[keep] = 1.0 / lam[keep]
        V = self.eigvecs_W
        return (V * inv) @ V.T

    @property
    def pinv_norm(self) -> float:
        """Largest eigenvalue of ``(I - W)^+``; zero for a single node."""
        if self.m == 1:
            return 0.0
        return 1.0 / self.lambda_second_min_IW

    @property
    def second_largest_abs_eig(self) -> float:
        """Second largest eigenvalue magnitude of ``W`` (the consensus rate)."""
        if self.m == 1:
            return 0.0
        mags = np.sort(np.abs(self.eigvals_W))[::-1]
        return float(mags[1])

    def neighbors(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.adjacency[i])]

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)


def _grid_shape(m: int) -> tuple[int, int]:
    best = None
    for r in range(2, int(math.isqrt(m)) + 1):
        if m % r == 0:
            best = (r, m // r)
    if best is None:
        raise UnconnectableGraph(f"torus2d needs m = r*c with r, c >= 2; m={m} has no such factorization")
    return best


def _adjacency(kind: str, m: int) -> np.ndarray:
    A = np.zeros((m, m), dtype=bool)
    if kind == "complete":
        A[:] = True
    elif kind == "ring":
        for i in range(m):
            A[i, (i + 1) % m] = A[(i + 1) % m, i] = True
    elif kind == "path":
        for i in range(m - 1):
            A[i, i + 1] = A[i + 1, i] = True
    elif kind == "torus2d":
        r, c = _grid_shape(m)
        for i in range(r):
            for j in range(c):
                u = i * c + j
                for v in (((i + 1) % r) * c + j, i * c + (j + 1) % c):
                    A[u, v] = A[v, u] = True
    else:
        raise ValueError(f"unknown topology kind {kind!r}; expected one of {TOPOLOGY_KINDS}")
    np.fill_diagonal(A, False)
    return A


def _metropolis(A: np.ndarray) -> np.ndarray:
    m = A.shape[0]
    deg = A.sum(axis=1)
    W = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            if A[i, j]:
                W[i, j] = W[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    for i in range(m):
        W[i, i] = 1.0 - (W[i, :i].sum() + W[i, i + 1:].sum())
    return W


def build_topology(kind: str, m: int) -> NetworkTopology:
    """Build a connected graph of ``m`` nodes with Metropolis-Hastings weights.

    Edge weights are ``1 / (1 + max(deg_i, deg_j))`` and the diagonal takes the
    remaining mass of each row. For ``torus2d`` the most square ``r x c`` grid
    is used.

    Raises:
        InvalidSize: ``m < 2``.
        UnconnectableGraph: ``torus2d`` with an ``m`` that has no ``r, c >= 2``
            factorization.
    """
    if m < 2:
        raise InvalidSize(f"a network needs at least 2 nodes, got m={m}")
    A = _adjacency(kind, m)
    W = _metropolis(A)
    evals, evecs = np.linalg.eigh(W)
    lam_iw = np.sort(1.0 - evals)
    lam_max = float(lam_iw[-1])
    lam_2 = float(lam_iw[1])
    if lam_2 <= 1e-12:
        raise UnconnectableGraph(f"{kind}({m}) is not connected")
    return NetworkTopology(
        kind=kind,
        m=m,
        adjacency=A,
        W=W,
        eigvals_W=evals,
        eigvecs_W=evecs,
        lambda_max_IW=lam_max,
        lambda_second_min_IW=lam_2,
        kappa_g=lam_max / lam_2,
    )


@dataclass(frozen=True)
class SpectralReport:
    row_sum_deviation: float
    symmetry_deviation: float
    min_diagonal: float
    eig_min: float
    eig_max: float
    eig_one_multiplicity: int

    @property
    def ok(self) -> bool:
        return (
            self.row_sum_deviation <= 1e-12
            and self.symmetry_deviation == 0.0
            and self.min_diagonal > 0.0
            and self.eig_min > -1.0
            and self.eig_one_multiplicity == 1
        )


def spectral_check(topo: NetworkTopology, tol: float = 1e-10) -> SpectralReport:
    """Numerically validate the mixing-matrix assumptions for ``topo``."""
    W = topo.W
    evals = np.linalg.eigvalsh(W)
    return SpectralReport(
        row_sum_deviation=float(np.max(np.abs(W.sum(axis=1) - 1.0))),
        symmetry_deviation=float(np.max(np.abs(W - W.T))),
        min_diagonal=float(np.min(np.diag(W))),
        eig_min=float(evals.min()),
        eig_max=float(evals.max()),
        eig_one_multiplicity=int(np.sum(np.abs(evals - 1.0) <= tol)),
    )
