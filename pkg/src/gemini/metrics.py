"""Clustering evaluation, entropy maps, boundary-MI closed forms and K-Means."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .validation import check_features


# -- adjusted Rand index ----------------------------------------------------------


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray

    @classmethod
    def from_labels(cls, a, b) -> "ContingencyTable":
        a, b = np.asarray(a), np.asarray(b)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError(f"label vectors must be 1-D of equal length, got {a.shape} and {b.shape}")
        _, ia = np.unique(a, return_inverse=True)
        _, ib = np.unique(b, return_inverse=True)
        counts = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
        np.add.at(counts, (ia, ib), 1)
        return cls(counts)

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def _pairs(n):
    n = np.asarray(n, dtype=np.float64)
    return n * (n - 1) / 2.0


def ari(labels, assignments) -> float:
    """Hubert-Arabie adjusted Rand index."""
    labels, assignments = np.asarray(labels), np.asarray(assignments)
    if labels.shape != assignments.shape:
        raise ValueError(f"length mismatch: {labels.shape} vs {assignments.shape}")
    if labels.size < 2:
        raise ValueError("ARI needs at least two samples")
    table = ContingencyTable.from_labels(labels, assignments)
    index = _pairs(table.counts).sum()
    rows = _pairs(table.row_sums).sum()
    cols = _pairs(table.col_sums).sum()
    total = _pairs(labels.size)
    expected = rows * cols / total
    max_index = 0.5 * (rows + cols)
    if max_index == expected:
        # both partitions trivial (all-in-one or all-singletons) and identical in structure
        return 1.0
    return float((index - expected) / (max_index - expected))


# -- entropy ----------------------------------------------------------------------


def renyi_entropy(P, order: float = 2.0) -> np.ndarray:
    """Row-wise Renyi entropy; ``order == 1`` is the Shannon limit."""
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    if not order > 0:
        raise ValueError(f"Renyi order must be positive, got {order}")
    if order == 1.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(P > 0, P * np.log(P), 0.0)
        return -terms.sum(axis=1)
    if np.isinf(order):
        return -np.log(P.max(axis=1))
    return np.log(np.sum(P**order, axis=1)) / (1.0 - order)


def shannon_entropy(P) -> np.ndarray:
    return renyi_entropy(P, 1.0)


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    resolution: int = 100

    @classmethod
    def around(cls, X, resolution: int = 100, margin: float = 0.1) -> "GridSpec":
        X = check_features(X)
        lo, hi = X.min(axis=0), X.max(axis=0)
        pad = margin * np.maximum(hi - lo, 1e-9)
        return cls(lo[0] - pad[0], hi[0] + pad[0], lo[1] - pad[1], hi[1] + pad[1], resolution)

    def points(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        xs = np.linspace(self.x_min, self.x_max, self.resolution)
        ys = np.linspace(self.y_min, self.y_max, self.resolution)
        gx, gy = np.meshgrid(xs, ys)
        return gx, gy, np.column_stack([gx.ravel(), gy.ravel()])


@dataclass(frozen=True)
class EntropyGrid:
    grid: GridSpec
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    order: float

    def rows(self):
        for xv, yv, v in zip(self.x.ravel(), self.y.ravel(), self.values.ravel()):
            yield float(xv), float(yv), float(v)


def predict_proba_fn(model):
    """Turn a model or estimator into ``features -> posterior`` (numpy)."""
    if hasattr(model, "predict_proba"):
        return model.predict_proba
    return lambda X: model.predict(X).numpy()


def renyi_entropy_map(model, grid: GridSpec, order: float = 2.0) -> EntropyGrid:
    gx, gy, pts = grid.points()
    P = predict_proba_fn(model)(pts)
    vals = renyi_entropy(P, order).reshape(gx.shape)
    return EntropyGrid(grid, gx, gy, np.clip(vals, 0.0, None), order)


def decision_grid(model, grid: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    gx, gy, pts = grid.points()
    P = predict_proba_fn(model)(pts)
    return gx, gy, np.argmax(P, axis=1).reshape(gx.shape)


def nonempty_clusters(x, threshold: float | None = None, n_clusters: int | None = None) -> int:
    """Number of clusters in use.

    For a hard assignment vector (1-D integers) a cluster counts when it
    receives at least one sample.  For a posterior matrix (2-D) it counts
    when its batch proportion exceeds ``threshold`` (default ``1 / (10 K)``).
    """
    x = np.asarray(x)
    if x.ndim == 1:
        return int(np.unique(x).size)
    K = x.shape[1]
    thr = 1.0 / (10 * K) if threshold is None else threshold
    return int(np.sum(x.mean(axis=0) > thr))


# -- sharp-boundary mutual information on a two-Gaussian mixture -----------------


def _xlogx(x):
    return x * np.log(x) if x > 0 else 0.0


def binary_entropy(beta: float) -> float:
    return -_xlogx(beta) - _xlogx(1.0 - beta)


def appendix_a_mi(model_kind: str, eps: float, beta: float) -> float:
    """Mutual information of two step-posterior models on a two-cluster mixture.

    Model ``A`` cuts the line at the midpoint of the two means, model ``B``
    assigns the interval between the means to one cluster.  ``eps`` is the
    probability mass each model puts on the other cluster and ``beta`` the
    data mass lying between the means.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if model_kind == "A":
        return _xlogx(eps) + eps * np.log(2.0) + _xlogx(1.0 - eps) + (1.0 - eps) * np.log(2.0)
    if model_kind == "B":
        pi = eps + beta * (1.0 - 2.0 * eps)
        pi_bar = 1.0 - pi
        return (
            _xlogx(eps)
            + _xlogx(1.0 - eps)
            - np.log(pi_bar)
            - (2.0 * beta * eps - beta - eps) * np.log(pi_bar / pi)
        )
    raise ValueError(f"model_kind must be 'A' or 'B', got {model_kind!r}")


def delta_mi(eps: float, beta: float) -> float:
    return appendix_a_mi("A", eps, beta) - appendix_a_mi("B", eps, beta)


def delta_mi_limit(beta: float) -> float:
    """Limit of ``I_A - I_B`` as the boundaries become sharp."""
    return float(np.log(2.0) - binary_entropy(beta))


def mixture_beta(mu0: float, mu1: float, sigma: float) -> float:
    """Mass of ``0.5 N(mu0, s) + 0.5 N(mu1, s)`` lying in ``[mu0, mu1]``."""
    return float(norm.cdf((mu1 - mu0) / sigma) - 0.5)


def _step_posterior(model_kind, x, eps, mu0, mu1):
    if model_kind == "A":
        inside = x > 0.5 * (mu0 + mu1)
    elif model_kind == "B":
        inside = (x >= mu0) & (x <= mu1)
    else:
        raise ValueError(f"model_kind must be 'A' or 'B', got {model_kind!r}")
    return np.where(inside, 1.0 - eps, eps)


def _model_marginal(model_kind, eps, mu0, mu1, sigma):
    if model_kind == "A":
        return 0.5
    beta = mixture_beta(mu0, mu1, sigma)
    return eps + beta * (1.0 - 2.0 * eps)


@dataclass(frozen=True)
class MonteCarloMI:
    mean: float
    std_error: float
    estimates: np.ndarray


def monte_carlo_boundary_mi(
    model_kind: str,
    eps: float,
    mu0: float,
    mu1: float,
    sigma: float,
    n_samples: int = 1000,
    seed: int = 0,
    n_repeats: int = 50,
    marginal: str = "model",
) -> MonteCarloMI:
    """Sample estimate of the step-model mutual information.

    Each repeat draws ``n_samples`` points from the two-Gaussian mixture and
    averages ``KL(p(y|x) || p(y))`` over them.  With ``marginal="model"``
    the cluster proportion is the exact one implied by the mixture (the
    data distribution is known here); ``"empirical"`` uses the sample mean
    of the posterior, which is biased low by ``O(1/n_samples)``.
    """
    if not mu0 < mu1:
        raise ValueError("need mu0 < mu1")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    rng = np.random.default_rng(seed)
    est = np.empty(n_repeats)
    for r in range(n_repeats):
        comp = rng.integers(0, 2, size=n_samples)
        x = np.where(comp == 0, mu0, mu1) + sigma * rng.standard_normal(n_samples)
        p1 = _step_posterior(model_kind, x, eps, mu0, mu1)
        if marginal == "model":
            pi1 = _model_marginal(model_kind, eps, mu0, mu1, sigma)
        elif marginal == "empirical":
            pi1 = p1.mean()
        else:
            raise ValueError(f"unknown marginal {marginal!r}")
        kl = p1 * np.log(p1 / pi1) + (1 - p1) * np.log((1 - p1) / (1 - pi1))
        est[r] = kl.mean()
    se = est.std(ddof=1) / np.sqrt(n_repeats) if n_repeats > 1 else 0.0
    return MonteCarloMI(float(est.mean()), float(se), est)


# -- K-Means ----------------------------------------------------------------------


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    n_iter: int
    history: np.ndarray


def _sq_dists(X, C):
    d = (X * X).sum(axis=1)[:, None] - 2.0 * X @ C.T + (C * C).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = _sq_dists(X, np.array(centers))[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, _sq_dists(X, X[idx : idx + 1])[:, 0])
    return np.array(centers)


def kmeans(features, k: int, seed: int = 0, max_iter: int = 300, init=None, n_init: int = 1) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding.

    An empty cluster is re-seeded at the point farthest from its current
    center, which keeps the result deterministic for a given seed.

    Parameters
    ----------
    init : array of shape (k, n_features), optional
        Starting centers; disables k-means++ and requires ``n_init == 1``.
    n_init : int
        Number of k-means++ restarts drawn from one seeded stream; the run
        with the lowest inertia is returned (the first one on ties).
    """
    X = check_features(features)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n_samples, got k={k}, n={n}")
    if n_init < 1:
        raise ValueError("n_init must be at least 1")
    if init is not None and n_init != 1:
        raise ValueError("explicit init centers allow only n_init=1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        C = kmeans_plus_plus(X, k, rng) if init is None else np.array(init, dtype=np.float64)
        res = _lloyd(X, C, max_iter)
        if best is None or res.inertia < best.inertia:
            best = res
    return best


def _lloyd(X: np.ndarray, C: np.ndarray, max_iter: int) -> KMeansResult:
    n, k = X.shape[0], C.shape[0]
    labels = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        D = _sq_dists(X, C)
        new = np.argmin(D, axis=1)
        sse = float(D[np.arange(n), new].sum())
        history.append(sse)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = labels == j
            if members.any():
                C[j] = X[members].mean(axis=0)
            else:
                far = int(np.argmax(D[np.arange(n), labels]))
                C[j] = X[far]
                labels[far] = j
    D = _sq_dists(X, C)
    labels = np.argmin(D, axis=1)
    inertia = float(D[np.arange(n), labels].sum())
    return KMeansResult(labels, C, inertia, it, np.array(history))
