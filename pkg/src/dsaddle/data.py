"""Datasets: LIBSVM ingestion, seeded partitioning and synthetic generation."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ParseError",
    "EmptyDataset",
    "TooFewSamples",
    "Dataset",
    "PartitionedDataset",
    "load_libsvm",
    "partition",
    "synthetic_logistic",
    "split_sizes",
]


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyDataset(ValueError):
    pass


class TooFewSamples(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray | sp.csr_matrix = field(repr=False)
    labels: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def q(self) -> float:
        """Fraction of positive labels."""
        return float(np.mean(self.labels > 0))


@dataclass(frozen=True)
class PartitionedDataset(Dataset):
    """Dataset rows reordered so that every node and batch is a contiguous range.

    ``node_slices[i]`` is a ``(start, stop)`` pair over rows; ``batch_slices[i]``
    lists the ``n`` sub-ranges of node ``i``.
    """

    node_slices: tuple[tuple[int, int], ...] = ()
    batch_slices: tuple[tuple[tuple[int, int], ...], ...] = ()

    @property
    def m(self) -> int:
        return len(self.node_slices)

    @property
    def n(self) -> int:
        return len(self.batch_slices[0])

    def node_sizes(self) -> list[int]:
        return [b - a for a, b in self.node_slices]

    def batch_sizes(self, i: int) -> list[int]:
        return [b - a for a, b in self.batch_slices[i]]


def load_libsvm(path: str | Path, n_features: int | None = None) -> Dataset:
    """Parse a sparse ``label idx:val ...`` text file (1-based indices).

    Labels ``0`` are mapped to ``-1``; any positive label becomes ``+1``.
    """
    rows, cols, vals, labels = [], [], [], []
    max_idx = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                lab = float(parts[0])
            except ValueError:
                raise ParseError(lineno, f"bad label {parts[0]!r}") from None
            r = len(labels)
            labels.append(1.0 if lab > 0 else -1.0)
            for tok in parts[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ParseError(lineno, f"expected idx:val, got {tok!r}")
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(lineno, f"bad feature token {tok!r}") from None
                if idx < 1:
                    raise ParseError(lineno, f"feature index must be >= 1, got {idx}")
                if not np.isfinite(val):
                    raise ParseError(lineno, f"non-finite feature value in {tok!r}")
                rows.append(r)
                cols.append(idx - 1)
                vals.append(val)
                max_idx = max(max_idx, idx)
    if not labels:
        raise EmptyDataset(f"{path} contains no samples")
    d = max_idx if n_features is None else int(n_features)
    if d < max_idx:
        raise ParseError(0, f"n_features={d} is smaller than the largest index {max_idx}")
    X = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), d), dtype=float)
    return Dataset(features=X, labels=np.asarray(labels))


def split_sizes(total: int, parts: int) -> list[int]:
    """Near-equal sizes; the remainder goes one apiece to the leading parts."""
    base, rem = divmod(total, parts)
    return [base + (1 if k < rem else 0) for k in range(parts)]


def partition(data: Dataset, m: int, n: int, seed: int = 0, shuffle: bool = True) -> PartitionedDataset:
    """Shuffle and cut ``data`` into ``m`` nodes of ``n`` batches each."""
    N = data.N
    if N < m * n:
        raise TooFewSamples(f"need at least m*n={m * n} samples, got {N}")
    order = np.random.default_rng(seed).permutation(N) if shuffle else np.arange(N)
    X = data.features[order]
    y = data.labels[order]
    node_slices, batch_slices = [], []
    start = 0
    for size in split_sizes(N, m):
        node_slices.append((start, start + size))
        b0 = start
        batches = []
        for bs in split_sizes(size, n):
            batches.append((b0, b0 + bs))
            b0 += bs
        batch_slices.append(tuple(batches))
        start += size
    return PartitionedDataset(
        features=X,
        labels=y,
        node_slices=tuple(node_slices),
        batch_slices=tuple(batch_slices),
    )


def synthetic_logistic(N: int, d: int, seed: int = 0, noise: float = 1.0, scale: float = 1.0) -> Dataset:
    """Gaussian features with labels drawn from a logistic model.

    ``noise`` divides the margin before the sigmoid, so larger values give a
    less separable set. Both classes are guaranteed to be present.
    """
    rng = np.random.default_rng(seed)
    A = scale * rng.standard_normal((N, d)) / np.sqrt(d)
    w = rng.standard_normal(d)
    p = 1.0 / (1.0 + np.exp(-(A @ w) / noise))
    b = np.where(rng.random(N) < p, 1.0, -1.0)
    if np.all(b > 0) or np.all(b < 0):
        b[0] = -b[0]
    return Dataset(features=A, labels=b)
