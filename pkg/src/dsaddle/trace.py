"""Per-iteration metrics and their CSV persistence."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .benchmark import BenchmarkSolution
from .lyapunov import limit_points, lyapunov
from .params import HyperParams
from .problems import SaddleProblem
from .solver import IterRecord, NodeState
from .topology import NetworkTopology

__all__ = ["TRACE_HEADER", "TraceRow", "RunTrace", "Recorder", "dist_sq", "write_trace", "read_trace"]

TRACE_HEADER = ("iter", "oracle", "grads", "comms", "bits", "dist_sq", "lyapunov", "wall_ns")


@dataclass(frozen=True)
class TraceRow:
    iter: int
    oracle: str
    grads: int
    comms: int
    bits: int
    dist_sq: float
    lyapunov: float
    wall_ns: int


@dataclass
class RunTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def first_reaching(self, column: str, level: float) -> TraceRow | None:
        for r in self.rows:
            if getattr(r, column) <= level:
                return r
        return None


def dist_sq(state: NodeState, x_star: np.ndarray, y_star: np.ndarray) -> float:
    """``(1/m) sum_i |z_i - z*|^2``."""
    return float(np.mean(np.sum((state.X - x_star) ** 2, axis=1) + np.sum((state.Y - y_star) ** 2, axis=1)))


class Recorder:
    """Solver observer that builds a :class:`RunTrace`.

    Distances and Lyapunov values are filled when a benchmark is supplied and
    left as NaN otherwise. ``stop_below`` ends the run once ``dist_sq`` falls
    to that level.
    """

    def __init__(
        self,
        problem: SaddleProblem,
        topo: NetworkTopology,
        hp: HyperParams,
        bench: BenchmarkSolution | None = None,
        every: int = 1,
        lyapunov: bool = True,
        stop_below: float | None = None,
    ):
        self.topo, self.hp, self.bench = topo, hp, bench
        self.every = max(1, int(every))
        self.trace = RunTrace()
        self.stop_below = stop_below
        self._lp = {}
        if bench is not None and lyapunov:
            for ph, p in ((0, hp.phase0), (1, hp.phase1)):
                self._lp[ph] = limit_points(problem, bench.x_star, bench.y_star, p.s)

    def __call__(self, rec: IterRecord) -> bool:
        d = lyap = math.nan
        if self.bench is not None:
            d = dist_sq(rec.state, self.bench.x_star, self.bench.y_star)
            if rec.phase in self._lp:
                lyap = lyapunov(rec.state, rec.params, rec.phase, self._lp[rec.phase], self.topo, self.hp.delta)
        stop = self.stop_below is not None and d <= self.stop_below
        if rec.t % self.every == 0 or rec.t == 1 or stop:
            self.trace.rows.append(
                TraceRow(rec.t, rec.tag, rec.grads, rec.comms, rec.bits, float(d), float(lyap), rec.wall_ns)
            )
        return stop


def write_trace(trace: RunTrace | Iterable[TraceRow], path: str | Path) -> None:
    rows = trace.rows if isinstance(trace, RunTrace) else list(trace)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for r in rows:
            w.writerow(
                [r.iter, r.oracle, r.grads, r.comms, r.bits, repr(float(r.dist_sq)), repr(float(r.lyapunov)), r.wall_ns]
            )


def read_trace(path: str | Path) -> RunTrace:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = tuple(next(rd))
        if header != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {header}")
        rows = [
            TraceRow(int(a), b, int(c), int(d), int(e), float(f), float(g), int(h))
            for a, b, c, d, e, f, g, h in rd
        ]
    return RunTrace(rows)
