"""Reference saddle point from a centralized, uncompressed, full-gradient run."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .problems import SaddleProblem
from .scheduler import GradStats

__all__ = [
    "NotConverged",
    "BenchmarkMismatch",
    "BenchmarkSolution",
    "benchmark_saddle",
    "fixed_point_residual",
    "grad_stats",
    "save_benchmark",
    "load_benchmark",
]


class NotConverged(RuntimeError):
    def __init__(self, residual: float, tol: float, iterations: int):
        super().__init__(f"residual {residual:.3e} above tol {tol:.3e} after {iterations} iterations")
        self.residual = residual


class BenchmarkMismatch(ValueError):
    pass


@dataclass(frozen=True)
class BenchmarkSolution:
    x_star: np.ndarray = field(repr=False)
    y_star: np.ndarray = field(repr=False)
    residual: float
    step: float
    iterations: int
    stats: GradStats
    config_hash: str = ""


def _step(problem: SaddleProblem) -> float:
    # centralized objective f = sum_i f_i: smoothness up to m*L, modulus m*mu
    m = problem.m
    L = m * problem.L
    mu = m * problem.mu
    return mu / (4.0 * L**2)


def _gda_map(problem: SaddleProblem, x, y, s: float):
    gx, gy = problem.grad_global(x, y)
    m = problem.m
    return problem.prox_g(x - (s / m) * gx), problem.prox_r(y + (s / m) * gy)


def fixed_point_residual(problem: SaddleProblem, x, y, s: float | None = None) -> float:
    """``max(|x - prox(x - (s/m) grad_x f)|, |y - prox(y + (s/m) grad_y f)|)``."""
    s = problem.m * _step(problem) if s is None else s
    xn, yn = _gda_map(problem, x, y, s)
    return float(max(np.linalg.norm(x - xn), np.linalg.norm(y - yn)))


def grad_stats(problem: SaddleProblem, x, y) -> GradStats:
    Cx = Cy = 0.0
    sx = np.zeros(problem.d_x)
    sy = np.zeros(problem.d_y)
    for i in range(problem.m):
        for l in range(problem.n):
            gx, gy = problem.grad(i, l, x, y)
            Cx += float(gx @ gx)
            Cy += float(gy @ gy)
        fx, fy = problem.grad_full(i, x, y)
        sx += fx
        sy += fy
    sx /= problem.m
    sy /= problem.m
    return GradStats(Cx, Cy, float(sx @ sx), float(sy @ sy))


def benchmark_saddle(
    problem: SaddleProblem,
    iterations: int = 50_000,
    tol: float = 1e-8,
    config_hash: str = "",
    x0: np.ndarray | None = None,
    y0: np.ndarray | None = None,
) -> BenchmarkSolution:
    """Projected gradient descent-ascent on ``f = sum_i f_i`` until the prox residual is tiny.

    This is the single-node, uncompressed, full-gradient instance of the
    decentralized iteration (with one node the consensus terms vanish). It
    stops early once the residual is a thousand times below ``tol``.

    Raises:
        NotConverged: the residual is still above ``tol`` after ``iterations``.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    s = problem.m * _step(problem)
    x = np.zeros(problem.d_x) if x0 is None else np.asarray(x0, dtype=float).copy()
    y = np.zeros(problem.d_y) if y0 is None else np.asarray(y0, dtype=float).copy()
    res = np.inf
    k = 0
    for k in range(1, iterations + 1):
        xn, yn = _gda_map(problem, x, y, s)
        res = float(max(np.linalg.norm(x - xn), np.linalg.norm(y - yn)))
        x, y = xn, yn
        if res <= tol * 1e-3:
            break
    res = fixed_point_residual(problem, x, y, s)
    if not res <= tol:
        raise NotConverged(res, tol, k)
    return BenchmarkSolution(x, y, res, s, k, grad_stats(problem, x, y), config_hash)


def save_benchmark(sol: BenchmarkSolution, path: str | Path) -> None:
    """JSON with ``repr``-exact floats, so a reload is bit-identical."""
    doc = {
        "format": "dsaddle-benchmark/1",
        "config_hash": sol.config_hash,
        "residual": sol.residual,
        "step": sol.step,
        "iterations": sol.iterations,
        "x_star": [float(v) for v in sol.x_star],
        "y_star": [float(v) for v in sol.y_star],
        "stats": {
            "C_x": sol.stats.C_x,
            "C_y": sol.stats.C_y,
            "mean_x_sq": sol.stats.mean_x_sq,
            "mean_y_sq": sol.stats.mean_y_sq,
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_benchmark(path: str | Path, expect_hash: str | None = None) -> BenchmarkSolution:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "dsaddle-benchmark/1":
        raise BenchmarkMismatch(f"{path} is not a benchmark file")
    if expect_hash is not None and doc["config_hash"] != expect_hash:
        raise BenchmarkMismatch(
            f"benchmark {path} was computed for config {doc['config_hash']}, expected {expect_hash}"
        )
    return BenchmarkSolution(
        np.array(doc["x_star"], dtype=float),
        np.array(doc["y_star"], dtype=float),
        doc["residual"],
        doc["step"],
        doc["iterations"],
        GradStats(**doc["stats"]),
        doc["config_hash"],
    )


def config_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]
