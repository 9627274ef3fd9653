"""Finite-sum saddle-point problems distributed over nodes and batches.

Node ``i`` holds ``f_i = (1/n) sum_l f_il`` and the global objective is
``sum_i f_i(x, y) + g(x) - r(y)``. Here ``g`` and ``r`` are indicators of
Euclidean balls, so both proximal maps are projections.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .data import PartitionedDataset

__all__ = [
    "SingleClassDataset",
    "ProblemConstants",
    "SaddleProblem",
    "RobustLogistic",
    "AUCMaximization",
    "robust_logistic",
    "auc_maximization",
    "project_ball",
    "project_rows",
]


class SingleClassDataset(ValueError):
    pass


def project_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto the ball of the given radius."""
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm <= radius:
        return v.copy()
    return v * (radius / nrm)


def project_rows(V: np.ndarray, radius: float) -> np.ndarray:
    """Row-wise :func:`project_ball` for stacked per-node vectors."""
    nrm = np.linalg.norm(V, axis=1, keepdims=True)
    scale = np.where(nrm > radius, radius / np.where(nrm > 0, nrm, 1.0), 1.0)
    return V * scale


def _row_sq_norms(X) -> np.ndarray:
    if sp.issparse(X):
        return np.asarray(X.multiply(X).sum(axis=1)).ravel()
    return np.einsum("ij,ij->i", X, X)


@dataclass(frozen=True)
class ProblemConstants:
    L_xx: float
    L_yy: float
    L_xy: float
    L_yx: float
    mu_x: float
    mu_y: float

    @property
    def L(self) -> float:
        return max(self.L_xx, self.L_yy, self.L_xy, self.L_yx)

    @property
    def mu(self) -> float:
        return min(self.mu_x, self.mu_y)

    @property
    def kappa_f(self) -> float:
        return self.L / self.mu


class SaddleProblem:
    """Base class: batch gradients, node gradients, projections and constants.

    Subclasses implement ``_data_sums`` (the unscaled sum of per-sample
    gradients over a row range), ``_data_value`` and ``_regularizer``.
    """

    d_x: int
    d_y: int
    R_x: float
    R_y: float
    constants: ProblemConstants

    def __init__(self, data: PartitionedDataset):
        self.data = data
        self.m = data.m
        self.n = data.n
        self.N = data.N
        self._X = data.features
        self._b = np.asarray(data.labels, dtype=float)

    # constants -----------------------------------------------------------
    @property
    def L(self) -> float:
        return self.constants.L

    @property
    def mu(self) -> float:
        return self.constants.mu

    @property
    def kappa_f(self) -> float:
        return self.constants.kappa_f

    def __getattr__(self, name):
        if name in ("L_xx", "L_yy", "L_xy", "L_yx", "mu_x", "mu_y"):
            return getattr(self.constants, name)
        raise AttributeError(name)

    # sizes ---------------------------------------------------------------
    def batch_size(self, i: int, l: int) -> int:
        a, b = self.data.batch_slices[i][l]
        return b - a

    def node_size(self, i: int) -> int:
        a, b = self.data.node_slices[i]
        return b - a

    # gradients -----------------------------------------------------------
    def _rows(self, start: int, stop: int):
        return self._X[start:stop], self._b[start:stop]

    def _data_sums(self, X, b, x, y) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def _data_value(self, X, b, x, y) -> float:
        raise NotImplementedError

    def _reg_grad(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def _reg_value(self, x, y) -> float:
        raise NotImplementedError

    def grad(self, i: int, l: int, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(grad_x f_il, grad_y f_il)`` at ``(x, y)``."""
        X, b = self._rows(*self.data.batch_slices[i][l])
        sx, sy = self._data_sums(X, b, x, y)
        rx, ry = self._reg_grad(x, y)
        c = self.n / self.N
        return c * sx + rx, c * sy + ry

    def grad_full(self, i: int, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(grad_x f_i, grad_y f_i)``, the batch average at node ``i``."""
        X, b = self._rows(*self.data.node_slices[i])
        sx, sy = self._data_sums(X, b, x, y)
        rx, ry = self._reg_grad(x, y)
        return sx / self.N + rx, sy / self.N + ry

    def grad_x(self, i, l, x, y):
        return self.grad(i, l, x, y)[0]

    def grad_y(self, i, l, x, y):
        return self.grad(i, l, x, y)[1]

    def grad_x_full(self, i, x, y):
        return self.grad_full(i, x, y)[0]

    def grad_y_full(self, i, x, y):
        return self.grad_full(i, x, y)[1]

    def grad_global(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Gradient of the smooth part ``f = sum_i f_i``."""
        X, b = self._X, self._b
        sx, sy = self._data_sums(X, b, x, y)
        rx, ry = self._reg_grad(x, y)
        return sx / self.N + self.m * rx, sy / self.N + self.m * ry

    def value(self, i: int, l: int, x: np.ndarray, y: np.ndarray) -> float:
        X, b = self._rows(*self.data.batch_slices[i][l])
        return self.n / self.N * self._data_value(X, b, x, y) + self._reg_value(x, y)

    def value_full(self, i: int, x: np.ndarray, y: np.ndarray) -> float:
        X, b = self._rows(*self.data.node_slices[i])
        return self._data_value(X, b, x, y) / self.N + self._reg_value(x, y)

    # proximal maps -------------------------------------------------------
    def prox_g(self, v: np.ndarray, step: float = 1.0) -> np.ndarray:
        return project_ball(v, self.R_x)

    def prox_r(self, v: np.ndarray, step: float = 1.0) -> np.ndarray:
        return project_ball(v, self.R_y)

    def prox_g_rows(self, V: np.ndarray) -> np.ndarray:
        return project_rows(V, self.R_x)

    def prox_r_rows(self, V: np.ndarray) -> np.ndarray:
        return project_rows(V, self.R_y)

    # per-batch constant helpers -----------------------------------------
    def _batch_stats(self):
        sq = _row_sq_norms(self._X)
        nrm = np.sqrt(sq)
        out = []
        for i in range(self.m):
            for a, b in self.data.batch_slices[i]:
                out.append((b - a, sq[a:b], nrm[a:b], self._b[a:b]))
        return out


class RobustLogistic(SaddleProblem):
    """Logistic loss under an adversarial feature shift ``y``.

    ``f_il(x, y) = (n/N) sum log(1 + exp(-b x.(a + y))) + lam/(2m)|x|^2 - beta/(2m)|y|^2``
    """

    def __init__(
        self,
        data: PartitionedDataset,
        lam: float,
        beta: float,
        R_x: float,
        R_y: float,
        strong_convexity: str = "nominal",
    ):
        if not (lam > 0 and beta > 0):
            raise ValueError("lam and beta must be positive")
        if not (R_x > 0 and R_y > 0):
            raise ValueError("radii must be positive")
        if strong_convexity not in ("nominal", "local"):
            raise ValueError(f"strong_convexity must be 'nominal' or 'local', got {strong_convexity!r}")
        super().__init__(data)
        self.lam, self.beta = float(lam), float(beta)
        self.R_x, self.R_y = float(R_x), float(R_y)
        self.d_x = self.d_y = data.d
        self.strong_convexity = strong_convexity
        self.constants = self._constants()

    def _constants(self) -> ProblemConstants:
        n, N, m = self.n, self.N, self.m
        Rx, Ry = self.R_x, self.R_y
        Lxx = Lyy = Lxy = 0.0
        for Nij, sq, nrm, _ in self._batch_stats():
            Lxx = max(Lxx, n / (2 * N) * sq.sum() + n * Nij * Ry**2 / (2 * N) + self.lam / m)
            Lyy = max(Lyy, n * Nij * Rx**2 / (4 * N) + self.beta / m)
            Lxy = max(Lxy, n / N * ((1 + Rx * Ry / 4) * Nij + Rx / 4 * nrm.sum()))
        if self.strong_convexity == "nominal":
            mu_x, mu_y = self.lam, self.beta
        else:
            mu_x, mu_y = self.lam / m, self.beta / m
        return ProblemConstants(Lxx, Lyy, Lxy, Lxy, mu_x, mu_y)

    def _weights(self, X, b, x, y):
        margin = b * (X @ x + x @ y)
        # -b * sigmoid(-margin), written to stay finite for large |margin|
        return -b * np.exp(-np.logaddexp(0.0, margin))

    def _data_sums(self, X, b, x, y):
        w = self._weights(X, b, x, y)
        sw = w.sum()
        gx = np.asarray(X.T @ w).ravel() + sw * y
        gy = sw * x
        return gx, gy

    def _data_value(self, X, b, x, y):
        margin = b * (X @ x + x @ y)
        return float(np.logaddexp(0.0, -margin).sum())

    def _reg_grad(self, x, y):
        return self.lam / self.m * x, -self.beta / self.m * y

    def _reg_value(self, x, y):
        return self.lam / (2 * self.m) * float(x @ x) - self.beta / (2 * self.m) * float(y @ y)


class AUCMaximization(SaddleProblem):
    """Square-loss AUC surrogate with primal ``(x, u, v)`` and scalar dual ``y``."""

    def __init__(self, data: PartitionedDataset, lam: float, R_x: float, R_y: float):
        q = data.q
        if not 0.0 < q < 1.0:
            raise SingleClassDataset("AUC maximization needs both positive and negative samples")
        if lam < 0:
            raise ValueError("lam must be non-negative")
        if not (R_x > 0 and R_y > 0):
            raise ValueError("radii must be positive")
        super().__init__(data)
        self.q = q
        self.lam = float(lam)
        self.R_x, self.R_y = float(R_x), float(R_y)
        self.d = data.d
        self.d_x = data.d + 2
        self.d_y = 1
        self.constants = self._constants()

    def _constants(self) -> ProblemConstants:
        n, N, m, q, lam = self.n, self.N, self.m, self.q, self.lam
        Lxx = Lyy = Lxy = 0.0
        for Nij, sq, nrm, b in self._batch_stats():
            pos = (b > 0).astype(float)
            neg = 1.0 - pos
            w = 2 * (1 - q) * pos + 2 * q * neg
            Lt_xx = w * sq + lam / m + w
            Lt_xy = 2 * np.abs(q * neg - (1 - q) * pos) * nrm
            Lxx = max(Lxx, n / N * Lt_xx.sum() + lam / m)
            Lyy = max(Lyy, n / N * Nij * 2 * q * (1 - q))
            Lxy = max(Lxy, n / N * Lt_xy.sum())
        frac = min(self.data.node_sizes()) / N
        mu_x = min(2 * q, 2 * (1 - q)) * frac + lam / m
        mu_y = 2 * q * (1 - q) * frac
        return ProblemConstants(Lxx, Lyy, Lxy, Lxy, mu_x, mu_y)

    def _split(self, w):
        return w[: self.d], w[self.d], w[self.d + 1]

    def _data_sums(self, X, b, w, y):
        x, u, v = self._split(w)
        q = self.q
        pos = b > 0
        s = X @ x
        ep = np.where(pos, s - u, 0.0)
        en = np.where(pos, 0.0, s - v)
        c = np.where(pos, -(1 - q), q)
        yy = float(y[0])
        coef = 2 * (1 - q) * ep + 2 * q * en + 2 * (1 + yy) * c
        gx = np.asarray(X.T @ coef).ravel()
        gu = -2 * (1 - q) * ep.sum()
        gv = -2 * q * en.sum()
        gy = -2 * q * (1 - q) * yy * len(b) + 2 * float(c @ s)
        return np.concatenate([gx, [gu, gv]]), np.array([gy])

    def _data_value(self, X, b, w, y):
        x, u, v = self._split(w)
        q = self.q
        pos = b > 0
        s = X @ x
        yy = float(y[0])
        F = (
            np.where(pos, (1 - q) * (s - u) ** 2, q * (s - v) ** 2)
            - q * (1 - q) * yy**2
            + 2 * (1 + yy) * np.where(pos, -(1 - q) * s, q * s)
        )
        return float(F.sum())

    def _reg_grad(self, w, y):
        g = np.zeros_like(w)
        g[: self.d] = self.lam / self.m * w[: self.d]
        return g, np.zeros_like(y)

    def _reg_value(self, w, y):
        x = w[: self.d]
        return self.lam / (2 * self.m) * float(x @ x)


def robust_logistic(data, lam, beta, R_x, R_y, strong_convexity="nominal") -> RobustLogistic:
    return RobustLogistic(data, lam, beta, R_x, R_y, strong_convexity)


def auc_maximization(data, lam, R_x, R_y) -> AUCMaximization:
    return AUCMaximization(data, lam, R_x, R_y)
