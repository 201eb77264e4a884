"""Kernels and ground costs over a batch of samples.

The MMD objectives consume a :class:`KernelMatrix`, the Wasserstein ones a
:class:`CostMatrix`.  Both are computed once on the full dataset and sliced
per batch by the trainer.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .validation import check_features

SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class KernelMatrix:
    matrix: np.ndarray
    kind: str = "linear"

    def __post_init__(self):
        _check_square(self.matrix, "kernel")
        if not np.allclose(self.matrix, self.matrix.T, atol=SYMMETRY_TOL, rtol=0):
            raise ValueError("kernel matrix is not symmetric")

    def subset(self, idx) -> "KernelMatrix":
        return KernelMatrix(self.matrix[np.ix_(idx, idx)], self.kind)


@dataclass(frozen=True)
class CostMatrix:
    matrix: np.ndarray
    kind: str = "euclidean"

    def __post_init__(self):
        _check_square(self.matrix, "cost")
        m = self.matrix
        if not np.allclose(m, m.T, atol=SYMMETRY_TOL, rtol=0):
            raise ValueError("cost matrix is not symmetric")
        if np.any(m < 0):
            raise ValueError("cost matrix has negative entries")
        if np.any(np.abs(np.diag(m)) > SYMMETRY_TOL):
            raise ValueError("cost matrix diagonal is not zero")

    def subset(self, idx) -> "CostMatrix":
        return CostMatrix(self.matrix[np.ix_(idx, idx)], self.kind)


@dataclass(frozen=True)
class NeighborhoodGraph:
    adjacency: np.ndarray
    threshold: float


def _check_square(m, what):
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} matrix must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{what} matrix has non-finite entries")


def build_kernel(features, kind: str = "linear", sigma: float = 1.0) -> KernelMatrix:
    """Gram matrix of ``features``.

    ``linear`` is the plain inner product, ``gaussian`` is
    ``exp(-||a - b||^2 / (2 sigma^2))``.
    """
    X = check_features(features)
    if kind == "linear":
        K = X @ X.T
        K = 0.5 * (K + K.T)
    elif kind == "gaussian":
        if not sigma > 0:
            raise ValueError(f"gaussian kernel needs sigma > 0, got {sigma}")
        K = np.exp(-cdist(X, X, "sqeuclidean") / (2.0 * sigma**2))
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")
    return KernelMatrix(K, kind)


def build_cost(features, kind: str = "euclidean", quantile: float = 0.05) -> CostMatrix:
    X = check_features(features)
    if kind == "euclidean":
        D = cdist(X, X, "euclidean")
    elif kind == "squared_euclidean":
        D = cdist(X, X, "sqeuclidean")
    elif kind == "shortest_path":
        return shortest_path_cost(X, quantile)
    else:
        raise ValueError(f"unknown cost kind {kind!r}")
    np.fill_diagonal(D, 0.0)
    return CostMatrix(D, kind)


def nearest_rank_quantile(values: np.ndarray, q: float) -> float:
    """Nearest-rank quantile: the ``ceil(q * n)``-th smallest value."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    rank = max(1, int(np.ceil(q * v.size)))
    return float(v[rank - 1])


def neighborhood_graph(features, quantile: float = 0.05, threshold: float | None = None) -> NeighborhoodGraph:
    """Unweighted epsilon-graph; ``threshold`` defaults to the distance quantile."""
    X = check_features(features)
    D = cdist(X, X, "euclidean")
    if threshold is None:
        if not 0.0 < quantile < 1.0:
            raise ValueError(f"quantile must lie in (0, 1), got {quantile}")
        iu = np.triu_indices(X.shape[0], k=1)
        threshold = nearest_rank_quantile(D[iu], quantile)
    W = D <= threshold
    np.fill_diagonal(W, False)
    return NeighborhoodGraph(W, float(threshold))


def hop_distances(adjacency: np.ndarray, unreachable: float | None = None) -> np.ndarray:
    """All-pairs hop counts by one breadth-first search per source.

    Pairs with no connecting path get ``unreachable`` (default: node count).
    """
    n = adjacency.shape[0]
    fill = float(n if unreachable is None else unreachable)
    neighbors = [np.flatnonzero(row) for row in adjacency]
    out = np.full((n, n), fill)
    for src in range(n):
        dist = np.full(n, -1, dtype=np.int64)
        dist[src] = 0
        queue = deque([src])
        while queue:
            x = queue.popleft()
            nxt = dist[x] + 1
            for y in neighbors[x]:
                if dist[y] < 0:
                    dist[y] = nxt
                    queue.append(y)
        reached = dist >= 0
        out[src, reached] = dist[reached]
    return out


def shortest_path_cost(features, quantile: float = 0.05) -> CostMatrix:
    """Hop-count metric on the epsilon-neighbourhood graph.

    Epsilon is the nearest-rank ``quantile`` of all pairwise Euclidean
    distances; disconnected pairs cost the number of samples.
    """
    X = check_features(features)
    if X.shape[0] < 2:
        raise ValueError("shortest-path cost needs at least 2 samples")
    graph = neighborhood_graph(X, quantile)
    return CostMatrix(hop_distances(graph.adjacency), "shortest_path")


def load_matrix_csv(path, kind: str = "cost"):
    """Read a precomputed ``B x B`` kernel or cost from a header-less CSV."""
    path = Path(path)
    rows = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric cell") from exc
    width = {len(r) for r in rows}
    if len(width) != 1 or width.pop() != len(rows):
        raise ValueError(f"{path}: expected a square matrix, got ragged or non-square rows")
    M = np.asarray(rows)
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{path}: matrix has non-finite entries")
    if not np.allclose(M, M.T, atol=1e-6, rtol=0):
        raise ValueError(f"{path}: matrix is not symmetric within 1e-6")
    M = 0.5 * (M + M.T)
    if kind == "cost":
        if np.any(np.abs(np.diag(M)) > 1e-9):
            raise ValueError(f"{path}: cost diagonal is not zero within 1e-9")
        np.fill_diagonal(M, 0.0)
        return CostMatrix(M, "precomputed")
    if kind == "kernel":
        return KernelMatrix(M, "precomputed")
    raise ValueError(f"unknown matrix kind {kind!r}")


def save_matrix_csv(path, matrix) -> None:
    np.savetxt(path, np.asarray(matrix), delimiter=",", fmt="%.17g")
