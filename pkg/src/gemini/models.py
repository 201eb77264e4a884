"""Discriminative cluster-assignment models ``p(y | x)``.

Two models are provided:

* :class:`CategoricalTableModel` keeps one free logit row per training
  sample, so it can only be evaluated on sample indices.
* :class:`MlpModel` is a rectifier MLP with a softmax head.

Both expose their trainable leaves through ``parameters()`` and build a
fresh tape on every call to :meth:`predict`.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import EPS_NUM, Tensor
from .validation import check_features


@dataclass
class PosteriorBatch:
    """Row-stochastic soft assignments for a batch of samples."""

    matrix: Tensor
    sample_indices: np.ndarray

    @property
    def n_clusters(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def numpy(self) -> np.ndarray:
        return self.matrix.value


class CategoricalTableModel:
    """One categorical distribution per training sample.

    Parameters
    ----------
    n_samples, n_clusters : int
    init_scale : float
        Standard deviation of the random initial logits.  A zero table is a
        stationary point of several objectives, so a small perturbation is
        needed for training to move at all.
    seed : int
    """

    kind = "categorical"

    def __init__(self, n_samples: int, n_clusters: int, init_scale: float = 0.01, seed: int = 0):
        if n_samples < 1 or n_clusters < 1:
            raise ValueError("table model needs at least one sample and one cluster")
        self.n_samples = int(n_samples)
        self.n_clusters = int(n_clusters)
        self.seed = int(seed)
        rng = np.random.default_rng(seed)
        self.logits = Tensor(init_scale * rng.standard_normal((n_samples, n_clusters)), requires_grad=True)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.n_samples, self.n_clusters]

    def parameters(self) -> list[Tensor]:
        return [self.logits]

    def n_parameters(self) -> int:
        return self.logits.value.size

    def predict(self, indices) -> PosteriorBatch:
        idx = np.asarray(indices, dtype=np.int64).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_samples):
            raise IndexError(f"sample index out of range [0, {self.n_samples})")
        return PosteriorBatch(ad.softmax(ad.take(self.logits, idx)), idx)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class MlpModel:
    """Rectifier MLP ending in a row softmax.

    Parameters
    ----------
    layer_sizes : list of int
        ``[D, h1, ..., K]``.  Weights are Glorot-uniform, biases zero.
    seed : int
    """

    kind = "mlp"

    def __init__(self, layer_sizes, seed: int = 0):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"invalid layer sizes {layer_sizes!r}")
        self.layer_sizes = sizes
        self.seed = int(seed)
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for d_in, d_out in zip(sizes[:-1], sizes[1:]):
            self.weights.append(Tensor(glorot_uniform(rng, d_in, d_out), requires_grad=True))
            self.biases.append(Tensor(np.zeros((1, d_out)), requires_grad=True))

    @property
    def n_clusters(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def n_parameters(self) -> int:
        return sum((a + 1) * b for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    def logits(self, features) -> Tensor:
        h = Tensor(check_features(features))
        if h.shape[1] != self.layer_sizes[0]:
            raise ValueError(f"expected {self.layer_sizes[0]} features, got {h.shape[1]}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = ad.relu(h)
        return h

    def predict(self, features, indices=None) -> PosteriorBatch:
        probs = ad.softmax(self.logits(features))
        idx = np.arange(probs.shape[0]) if indices is None else np.asarray(indices, dtype=np.int64)
        return PosteriorBatch(probs, idx)


def cluster_proportions(p: PosteriorBatch | Tensor) -> Tensor:
    """Batch mean of each posterior column, as a ``1 x K`` tensor."""
    P = p.matrix if isinstance(p, PosteriorBatch) else ad.as_tensor(p)
    if P.shape[0] == 0:
        raise ValueError("cluster proportions of an empty batch")
    return ad.tmean(P, axis=0)


def safe_proportions(p: PosteriorBatch | Tensor) -> Tensor:
    """Proportions clamped below at the numerical epsilon, for use as divisors."""
    return ad.clamp_min(cluster_proportions(p), EPS_NUM)


def hard_assign(p) -> np.ndarray:
    """Row-wise argmax; ``np.argmax`` already breaks ties toward index 0."""
    P = p.numpy() if isinstance(p, (PosteriorBatch, Tensor)) else np.asarray(p)
    return np.argmax(P, axis=1)


# -- checkpoints ------------------------------------------------------------------

_HEADER_LEN = struct.Struct("<I")


def save_checkpoint(model, path) -> None:
    """Write a length-prefixed JSON header followed by little-endian float64 parameters."""
    params = np.concatenate([t.value.ravel() for t in model.parameters()])
    header = json.dumps(
        {
            "layer_sizes": list(model.layer_sizes),
            "model_kind": model.kind,
            "seed": model.seed,
            "n_params": int(params.size),
        },
        sort_keys=True,
    ).encode()
    with Path(path).open("wb") as fh:
        fh.write(_HEADER_LEN.pack(len(header)))
        fh.write(header)
        fh.write(params.astype("<f8").tobytes())


def load_checkpoint(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER_LEN.size:
        raise ValueError(f"{path}: truncated checkpoint")
    (n,) = _HEADER_LEN.unpack_from(raw)
    header = json.loads(raw[_HEADER_LEN.size : _HEADER_LEN.size + n])
    params = np.frombuffer(raw[_HEADER_LEN.size + n :], dtype="<f8")
    if params.size != header["n_params"]:
        raise ValueError(f"{path}: header declares {header['n_params']} parameters, found {params.size}")
    sizes = header["layer_sizes"]
    if header["model_kind"] == "mlp":
        model = MlpModel(sizes, seed=header["seed"])
    elif header["model_kind"] == "categorical":
        model = CategoricalTableModel(sizes[0], sizes[1], seed=header["seed"])
    else:
        raise ValueError(f"{path}: unknown model kind {header['model_kind']!r}")
    offset = 0
    for t in model.parameters():
        k = t.value.size
        t.value = params[offset : offset + k].reshape(t.shape).copy()
        offset += k
    return model
