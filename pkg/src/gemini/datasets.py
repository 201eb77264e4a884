"""Seeded synthetic datasets and feature-file ingestion.

Every generator draws from ``numpy.random.default_rng(seed)`` (PCG64), so a
given ``(parameters, seed)`` pair always produces the same bytes.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .validation import check_features, check_labels


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray | None = None
    name: str = "dataset"
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = check_features(self.features)
        if self.labels is not None:
            self.labels = check_labels(self.labels, self.features.shape[0])
            if self.labels.size and self.labels.min() < 0:
                raise ValueError("labels must be nonnegative")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return 0 if self.labels is None else int(self.labels.max()) + 1


@dataclass(frozen=True)
class GstmParams:
    """Three Gaussian clusters plus one Student-t cluster on the ``(+-a, +-a)`` corners."""

    alpha: float = 5.0
    sigma: float = 1.0
    rho: int = 1
    n_per_cluster: int = 50

    def __post_init__(self):
        if not self.alpha > 0 or not self.sigma > 0:
            raise ValueError("alpha and sigma must be positive")
        if self.rho < 1:
            raise ValueError("rho must be at least 1")
        if self.n_per_cluster < 1:
            raise ValueError("n_per_cluster must be positive")

    @property
    def means(self) -> np.ndarray:
        a = self.alpha
        return np.array([[a, a], [a, -a], [-a, a], [-a, -a]])


def gen_gaussian_mixture(k: int, n: int, means, sigma: float, seed: int) -> Dataset:
    """``n`` isotropic Gaussian draws around each of the ``k`` means."""
    means = np.atleast_2d(np.asarray(means, dtype=np.float64))
    if means.shape[0] != k:
        raise ValueError(f"expected {k} means, got {means.shape[0]}")
    if len(np.unique(means, axis=0)) != k:
        raise ValueError("component means must be distinct")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    X = np.repeat(means, n, axis=0) + sigma * rng.standard_normal((k * n, means.shape[1]))
    y = np.repeat(np.arange(k), n)
    return Dataset(X, y, name="gaussian_mixture", seed=seed)


def _student_noise(rng: np.random.Generator, n: int, dim: int, rho: int) -> np.ndarray:
    """Gaussian draws rescaled by ``sqrt(rho / u)`` with ``u ~ chi2(rho)``.

    ``u`` can underflow to zero; such rows are redrawn so the output is
    always finite.
    """
    out = np.empty((n, dim))
    todo = np.arange(n)
    while todo.size:
        z = rng.standard_normal((todo.size, dim))
        u = rng.chisquare(rho, size=todo.size)
        with np.errstate(divide="ignore", invalid="ignore"):
            draw = z * np.sqrt(rho / u)[:, None]
        ok = np.all(np.isfinite(draw), axis=1)
        out[todo[ok]] = draw[ok]
        todo = todo[~ok]
    return out


def gen_gstm(params: GstmParams = GstmParams(), seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    n = params.n_per_cluster
    mu = params.means
    blocks = [mu[k] + params.sigma * rng.standard_normal((n, 2)) for k in range(3)]
    blocks.append(mu[3] + params.sigma * _student_noise(rng, n, 2, params.rho))
    X = np.concatenate(blocks)
    y = np.repeat(np.arange(4), n)
    meta = {"alpha": params.alpha, "sigma": params.sigma, "rho": params.rho}
    return Dataset(X, y, name="gstm", seed=seed, meta=meta)


def gen_two_moons(n: int, noise: float = 0.05, seed: int = 0) -> Dataset:
    """Two interleaved unit half-circles.

    The upper moon is centred at the origin, the lower one at ``(1, 0.5)``
    and opens upward, as in the usual construction.
    """
    if n < 2 or n % 2:
        raise ValueError(f"n must be a positive even number, got {n}")
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    rng = np.random.default_rng(seed)
    half = n // 2
    t = np.linspace(0.0, np.pi, half)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    lower = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    X = np.concatenate([upper, lower]) + noise * rng.standard_normal((n, 2))
    y = np.repeat([0, 1], half)
    return Dataset(X, y, name="two_moons", seed=seed, meta={"centres": [[0.0, 0.0], [1.0, 0.5]]})


def gstm_oracle_posterior(X, params: GstmParams) -> np.ndarray:
    """Exact component posterior of the GSTM mixture (equal weights).

    The Student cluster follows a bivariate t with ``rho`` degrees of freedom
    and scale ``sigma``.
    """
    from scipy.stats import multivariate_normal, multivariate_t

    X = check_features(X)
    cov = params.sigma**2 * np.eye(2)
    logp = np.column_stack(
        [multivariate_normal(mean=m, cov=cov).logpdf(X) for m in params.means[:3]]
        + [multivariate_t(loc=params.means[3], shape=cov, df=params.rho).logpdf(X)]
    )
    logp -= logp.max(axis=1, keepdims=True)
    p = np.exp(logp)
    return p / p.sum(axis=1, keepdims=True)


# -- files ------------------------------------------------------------------------

_MAGIC = b"GEMD"
_HEAD = struct.Struct("<4sIIB")


def save_dataset(ds: Dataset, path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or ("binary" if path.suffix in (".bin", ".gemd") else "csv")
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            header = [f"f{j}" for j in range(ds.n_features)]
            if ds.labels is not None:
                header.append("label")
            w.writerow(header)
            for i, row in enumerate(ds.features):
                cells = [repr(float(v)) for v in row]
                if ds.labels is not None:
                    cells.append(str(int(ds.labels[i])))
                w.writerow(cells)
    elif fmt == "binary":
        N, D = ds.features.shape
        has = ds.labels is not None
        with path.open("wb") as fh:
            fh.write(_HEAD.pack(_MAGIC, N, D, int(has)))
            fh.write(ds.features.astype("<f8").tobytes())
            if has:
                fh.write(ds.labels.astype("<i4").tobytes())
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")


def load_dataset(path, fmt: str | None = None) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    fmt = fmt or ("binary" if path.suffix in (".bin", ".gemd") else "csv")
    if fmt == "csv":
        return _load_csv(path)
    if fmt == "binary":
        return _load_binary(path)
    raise ValueError(f"unknown dataset format {fmt!r}")


def _load_csv(path: Path) -> Dataset:
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    has_labels = bool(header) and header[-1] == "label"
    n_feat = len(header) - int(has_labels)
    if header[:n_feat] != [f"f{j}" for j in range(n_feat)] or n_feat == 0:
        raise ValueError(f"{path}: header must be f0..f{{D-1}}[,label], got {header}")
    feats, labels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
        try:
            vals = [float(c) for c in row[:n_feat]]
            if has_labels:
                labels.append(int(row[-1]))
        except ValueError as exc:
            raise ValueError(f"{path}: row {lineno} has a non-numeric cell") from exc
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"{path}: row {lineno} has a non-finite value")
        feats.append(vals)
    if not feats:
        raise ValueError(f"{path}: no data rows")
    return Dataset(np.array(feats), np.array(labels) if has_labels else None, name=path.stem)


def _load_binary(path: Path) -> Dataset:
    raw = path.read_bytes()
    if len(raw) < _HEAD.size:
        raise ValueError(f"{path}: truncated header")
    magic, N, D, has = _HEAD.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    expected = _HEAD.size + 8 * N * D + (4 * N if has else 0)
    if len(raw) != expected:
        raise ValueError(f"{path}: header declares N={N}, D={D} ({expected} bytes) but file has {len(raw)} bytes")
    off = _HEAD.size
    X = np.frombuffer(raw, dtype="<f8", count=N * D, offset=off).reshape(N, D).astype(np.float64)
    bad = np.flatnonzero(~np.all(np.isfinite(X), axis=1))
    if bad.size:
        raise ValueError(f"{path}: row {bad[0]} has a non-finite value")
    y = None
    if has:
        y = np.frombuffer(raw, dtype="<i4", count=N, offset=off + 8 * N * D).astype(np.int64)
    return Dataset(X, y, name=path.stem)
