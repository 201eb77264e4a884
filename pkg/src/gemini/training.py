"""Adam and the gradient-ascent loop that fits a model to a GEMINI."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .autodiff import EPS_NUM
from .datasets import Dataset
from .geometry import CostMatrix, KernelMatrix, build_cost, build_kernel, shortest_path_cost
from .metrics import ari, nonempty_clusters
from .models import CategoricalTableModel, hard_assign
from .objectives import GeminiSpec, eval_gemini

# Euclidean-type geometry for more samples than this is built per batch
# from the batch features instead of being held as an N x N matrix.
FULL_GEOMETRY_LIMIT = 5000


# -- Adam -------------------------------------------------------------------------


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {b}")


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, hyper: AdamHyper = AdamHyper()):
    """One bias-corrected Adam *descent* step.

    Returns new parameter arrays and the updated state; inputs are left
    untouched.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and state must have the same length")
    t = state.t + 1
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, state {m.shape}")
        m = hyper.beta1 * m + (1.0 - hyper.beta1) * g
        v = hyper.beta2 * v + (1.0 - hyper.beta2) * g * g
        m_hat = m / (1.0 - hyper.beta1**t)
        v_hat = v / (1.0 - hyper.beta2**t)
        new_p.append(p - hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, t)


class Adam:
    """Stateful wrapper that updates tensor leaves in place."""

    def __init__(self, params, hyper: AdamHyper = AdamHyper()):
        self.params = list(params)
        self.hyper = hyper
        self.state = AdamState.zeros_like([p.value for p in self.params])

    def step(self, maximise: bool = True) -> None:
        sign = -1.0 if maximise else 1.0
        grads = [sign * (p.grad if p.grad is not None else np.zeros_like(p.value)) for p in self.params]
        values, self.state = adam_step([p.value for p in self.params], grads, self.state, self.hyper)
        for p, v in zip(self.params, values):
            p.value = v

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


# -- configuration and report -----------------------------------------------------


@dataclass(frozen=True)
class GeometryConfig:
    """How to build the kernel (MMD) or ground cost (Wasserstein).

    ``kind`` is one of ``linear``, ``gaussian`` (kernels), ``euclidean``,
    ``squared_euclidean``, ``shortest_path`` (costs) or ``precomputed``
    (``matrix`` must then be given).
    """

    kind: str | None = None
    sigma: float = 1.0
    quantile: float = 0.05
    matrix: np.ndarray | None = field(default=None, repr=False, compare=False)

    def resolved_kind(self, spec: GeminiSpec) -> str | None:
        if spec.needs_kernel:
            return self.kind or "linear"
        if spec.needs_cost:
            return self.kind or "euclidean"
        return None


@dataclass(frozen=True)
class TrainConfig:
    objective: GeminiSpec
    epochs: int = 1000
    batch_size: int = 0
    learning_rate: float = 1e-3
    betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0
    geometry: GeometryConfig = GeometryConfig()
    eps_num: float = EPS_NUM
    log_every: int = 0

    def __post_init__(self):
        if isinstance(self.objective, str):
            object.__setattr__(self, "objective", GeminiSpec.parse(self.objective))
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.batch_size < 0:
            raise ValueError("batch_size must be nonnegative (0 = full batch)")
        AdamHyper(self.learning_rate, *self.betas, self.adam_eps)

    @property
    def adam(self) -> AdamHyper:
        return AdamHyper(self.learning_rate, self.betas[0], self.betas[1], self.adam_eps)

    def echo(self) -> dict:
        out = {
            "objective": self.objective.tag,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "betas": list(self.betas),
            "adam_eps": self.adam_eps,
            "seed": self.seed,
            "geometry": {
                "kind": self.geometry.resolved_kind(self.objective),
                "sigma": self.geometry.sigma,
                "quantile": self.geometry.quantile,
            },
            "eps_num": self.eps_num,
        }
        return out


@dataclass
class RunReport:
    history: list
    proportion_history: list
    proportions: list
    n_nonempty: int
    assignments: list
    max_posterior: list
    config: dict
    ari: float | None = None
    wall_time: float = 0.0
    model_kind: str = ""
    n_parameters: int = 0

    def to_dict(self, include_timing: bool = False) -> dict:
        d = asdict(self)
        if not include_timing:
            d.pop("wall_time")
        return d


class TrainingDiverged(FloatingPointError):
    """Raised when the objective or its gradient stops being finite."""

    def __init__(self, epoch: int, batch: int, trace: list, cause: str = ""):
        self.epoch, self.batch, self.trace = epoch, batch, list(trace)
        tail = ", ".join(f"{v:.6g}" for v in self.trace[-5:])
        super().__init__(f"non-finite objective at epoch {epoch}, batch {batch}; last values [{tail}] {cause}".strip())


# -- geometry ---------------------------------------------------------------------


class BatchGeometry:
    """Serves the kernel or cost restricted to a batch.

    Small datasets (and the global shortest-path metric) get a single full
    matrix that is sliced; large Euclidean-type problems are built from the
    batch features directly, which gives the same entries.
    """

    def __init__(self, features: np.ndarray, spec: GeminiSpec, cfg: GeometryConfig):
        self.spec = spec
        self.cfg = cfg
        self.kind = cfg.resolved_kind(spec)
        self.features = features
        self.full = None
        if self.kind is None:
            return
        n = features.shape[0]
        if self.kind == "precomputed":
            if cfg.matrix is None:
                raise ValueError("precomputed geometry needs a matrix")
            M = np.asarray(cfg.matrix, dtype=np.float64)
            if M.shape != (n, n):
                raise ValueError(f"precomputed matrix has shape {M.shape}, expected {(n, n)}")
            self.full = KernelMatrix(M, "precomputed") if spec.needs_kernel else CostMatrix(M, "precomputed")
        elif self.kind == "shortest_path":
            if not spec.needs_cost:
                raise ValueError("shortest_path is a cost, not a kernel")
            self.full = shortest_path_cost(features, cfg.quantile)
        elif n <= FULL_GEOMETRY_LIMIT:
            self.full = self._build(features)

    def _build(self, X):
        if self.spec.needs_kernel:
            if self.kind not in ("linear", "gaussian"):
                raise ValueError(f"{self.kind!r} is not a kernel kind")
            return build_kernel(X, self.kind, self.cfg.sigma)
        if self.kind not in ("euclidean", "squared_euclidean"):
            raise ValueError(f"{self.kind!r} is not a cost kind")
        return build_cost(X, self.kind)

    def batch(self, idx: np.ndarray):
        if self.kind is None:
            return None
        if self.full is not None:
            if idx.size == self.full.matrix.shape[0] and np.array_equal(idx, np.arange(idx.size)):
                return self.full
            return self.full.subset(idx)
        return self._build(self.features[idx])


# -- training loop ----------------------------------------------------------------


def _predict(model, X, idx):
    if isinstance(model, CategoricalTableModel):
        return model.predict(idx)
    return model.predict(X[idx], indices=idx)


def full_posterior(model, X: np.ndarray, chunk: int = 8192) -> np.ndarray:
    n = X.shape[0]
    parts = [
        _predict(model, X, np.arange(lo, min(lo + chunk, n))).numpy() for lo in range(0, n, chunk)
    ]
    return np.concatenate(parts)


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    if batch_size == 0 or batch_size >= n:
        return [np.arange(n)]
    perm = rng.permutation(n)
    return [np.sort(perm[lo : lo + batch_size]) for lo in range(0, n, batch_size)]


def train(model, dataset: Dataset, config: TrainConfig, callback=None) -> RunReport:
    """Maximise ``config.objective`` over the model parameters.

    Each epoch shuffles the samples with a generator seeded from
    ``config.seed``, then for every batch builds the posterior, evaluates
    the objective on the batch geometry, back-propagates and takes one Adam
    step.  ``history`` holds the mean batch objective of each epoch and
    ``proportion_history`` the cluster proportions seen during that epoch.
    """
    start = time.perf_counter()
    X = dataset.features
    n = X.shape[0]
    if isinstance(model, CategoricalTableModel) and model.n_samples != n:
        raise ValueError(f"table model has {model.n_samples} rows for {n} samples")
    spec = config.objective
    geometry = BatchGeometry(X, spec, config.geometry)
    opt = Adam(model.parameters(), config.adam)
    rng = np.random.default_rng(config.seed)
    history: list[float] = []
    pi_history: list[list[float]] = []
    trace: list[float] = []

    for epoch in range(config.epochs):
        values = []
        pi_sum = np.zeros(model.n_clusters)
        for b, idx in enumerate(_batches(n, config.batch_size, rng)):
            opt.zero_grad()
            try:
                post = _predict(model, X, idx)
                obj = eval_gemini(post, spec, geometry.batch(idx))
                value = obj.item()
                trace.append(value)
                if not np.isfinite(value):
                    raise FloatingPointError("objective is not finite")
                obj.backward()
            except FloatingPointError as exc:
                raise TrainingDiverged(epoch, b, trace, str(exc)) from exc
            opt.step(maximise=True)
            for p in opt.params:
                if not np.all(np.isfinite(p.value)):
                    raise TrainingDiverged(epoch, b, trace, "parameters became non-finite")
            values.append(value)
            pi_sum += post.numpy().sum(axis=0)
        pi_history.append([float(v) for v in pi_sum / n])
        history.append(float(np.mean(values)))
        if callback is not None and config.log_every and (epoch + 1) % config.log_every == 0:
            callback(epoch + 1, history[-1])

    P = full_posterior(model, X)
    assign = hard_assign(P)
    report = RunReport(
        history=history,
        proportion_history=pi_history,
        proportions=[float(v) for v in P.mean(axis=0)],
        n_nonempty=nonempty_clusters(assign),
        assignments=[int(a) for a in assign],
        max_posterior=[float(v) for v in P.max(axis=1)],
        config=config.echo(),
        ari=float(ari(dataset.labels, assign)) if dataset.labels is not None else None,
        model_kind=model.kind,
        n_parameters=int(model.n_parameters()),
    )
    report.wall_time = time.perf_counter() - start
    return report
