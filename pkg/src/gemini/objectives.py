"""The ten generalised mutual-information objectives.

Each objective is a differentiable scalar of a posterior batch ``P``
(``B x K``, rows summing to one) and is meant to be *maximised*.  The batch
plays the role of the data distribution, and ``pi`` is the column mean of
``P``.

================  =========================================================
objective         value
================  =========================================================
``kl_ova``        ``mean_x sum_y p log(p / pi)``
``kl_ovo``        ``mean_x sum_y (p - pi) log(p / pi)``
``tv_ova``        ``mean_x 1/2 sum_y |p - pi|``
``tv_ovo``        ``1/2 mean_x sum_{a,b} |p_a pi_b - p_b pi_a|``
``hellinger_ova`` ``1 - mean_x sum_y sqrt(p pi)``
``hellinger_ovo`` ``mean_x [1 - (sum_y sqrt(p pi))^2]``
``mmd_ova``       ``sum_y pi_y MMD(m_y, u)``
``mmd_ovo``       ``sum_{a != b} pi_a pi_b MMD(m_a, m_b)``
``wasserstein_*`` same as MMD with the exact transport cost
================  =========================================================

where ``m_y`` is column ``y`` of ``P`` normalised to sum to one and ``u``
is the uniform weight vector over the batch.

Clusters whose proportion falls below ``EPS_NUM`` contribute nothing.  All
sums over clusters are order-independent, so relabelling clusters leaves
every value bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import autodiff as ad
from .autodiff import EPS_NUM, Tensor
from .geometry import CostMatrix, KernelMatrix
from .models import PosteriorBatch
from .transport import emd_tensor

DISTANCES = ("kl", "tv", "hellinger", "mmd", "wasserstein")
MODES = ("ova", "ovo")
F_DIVERGENCES = ("kl", "tv", "hellinger")

_ALIASES = {
    "squaredhellinger": "hellinger",
    "squared_hellinger": "hellinger",
    "h2": "hellinger",
    "w": "wasserstein",
}


@dataclass(frozen=True)
class GeminiSpec:
    """Which distance, compared one-vs-all or one-vs-one."""

    distance: str
    mode: str

    def __post_init__(self):
        d = _ALIASES.get(self.distance.lower(), self.distance.lower())
        m = self.mode.lower()
        if d not in DISTANCES:
            raise ValueError(f"unknown distance {self.distance!r}; expected one of {DISTANCES}")
        if m not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        object.__setattr__(self, "distance", d)
        object.__setattr__(self, "mode", m)

    @classmethod
    def parse(cls, tag: str) -> "GeminiSpec":
        """``"mmd_ovo"`` -> ``GeminiSpec("mmd", "ovo")``."""
        head, sep, mode = tag.lower().rpartition("_")
        if not sep:
            raise ValueError(f"objective tag {tag!r} must look like '<distance>_<ova|ovo>'")
        return cls(head, mode)

    @property
    def tag(self) -> str:
        return f"{self.distance}_{self.mode}"

    @property
    def needs_kernel(self) -> bool:
        return self.distance == "mmd"

    @property
    def needs_cost(self) -> bool:
        return self.distance == "wasserstein"


ALL_SPECS = tuple(GeminiSpec(d, m) for d in DISTANCES for m in MODES)


def _posterior_tensor(p) -> Tensor:
    if isinstance(p, PosteriorBatch):
        P = p.matrix
    else:
        P = ad.as_tensor(p)
    if P.shape[0] == 0:
        raise ValueError("GEMINI of an empty batch")
    return P


def _proportions(P: Tensor):
    pi = ad.tmean(P, axis=0)
    live = (pi.value >= EPS_NUM).astype(np.float64)
    return ad.clamp_min(pi, EPS_NUM), live


def _pair_index(K: int):
    return list(combinations(range(K), 2))


# -- f-divergences ----------------------------------------------------------------


def eval_f_divergence(p, spec: GeminiSpec) -> Tensor:
    if spec.distance not in F_DIVERGENCES:
        raise ValueError(f"{spec.tag} is not an f-divergence objective")
    P = _posterior_tensor(p)
    pi, live = _proportions(P)
    K = P.shape[1]

    if spec.mode == "ova":
        if spec.distance == "kl":
            terms = P * (ad.log(P) - ad.log(pi))
        elif spec.distance == "tv":
            terms = 0.5 * ad.absolute(P - pi)
        else:
            terms = ad.sqrt(P * pi)
        per_row = ad.sorted_sum(terms * live, axis=1)
        value = ad.tmean(per_row)
        return 1.0 - value if spec.distance == "hellinger" else value

    if spec.distance == "kl":
        terms = (P - pi) * (ad.log(P) - ad.log(pi))
        return ad.tmean(ad.sorted_sum(terms * live, axis=1))
    if spec.distance == "hellinger":
        inner = ad.sorted_sum(ad.sqrt(P * pi) * live, axis=1)
        return ad.tmean(1.0 - ad.square(inner))
    # total variation, one-vs-one: each unordered pair counted twice
    pairs = _pair_index(K)
    if not pairs:
        return 0.0 * ad.tsum(P)
    a_idx = [a for a, _ in pairs]
    b_idx = [b for _, b in pairs]
    pair_live = live[:, a_idx] * live[:, b_idx]
    cross = ad.take(P, (slice(None), a_idx)) * ad.take(pi, (slice(None), b_idx)) - ad.take(
        P, (slice(None), b_idx)
    ) * ad.take(pi, (slice(None), a_idx))
    per_row = ad.sorted_sum(ad.absolute(cross) * pair_live, axis=1)
    return ad.tmean(per_row)


# -- maximum mean discrepancy -----------------------------------------------------


def _kernel_array(kernel, B: int) -> np.ndarray:
    checked = isinstance(kernel, KernelMatrix)
    K = kernel.matrix if checked else np.asarray(kernel, dtype=np.float64)
    if K.shape != (B, B):
        raise ValueError(f"kernel of shape {K.shape} does not match batch size {B}")
    # KernelMatrix validates symmetry on construction
    if not checked and not np.allclose(K, K.T, atol=1e-9, rtol=0):
        raise ValueError("kernel matrix is not symmetric")
    return K


def _dirac_weights(P: Tensor, pi: Tensor) -> Tensor:
    """Columns of ``P`` normalised to sum to one (``B x K``)."""
    return P / (pi * float(P.shape[0]))


def dirac_weights(p) -> np.ndarray:
    P = _posterior_tensor(p)
    pi, _ = _proportions(P)
    return _dirac_weights(P, pi).value


def _quadratic_forms(kappa: np.ndarray, D: Tensor) -> Tensor:
    """``d_c^T kappa d_c`` for every column ``d_c`` of ``D`` (``1 x C``).

    One matrix-vector product per column, so a column's value does not
    depend on its position.
    """
    cols = []
    for c in range(D.shape[1]):
        d = ad.take(D, (slice(None), c))
        cols.append(ad.tsum(d * (kappa @ d), axis=0))
    return ad.concat(cols, axis=1)


def eval_mmd(p, kernel, mode: str) -> Tensor:
    P = _posterior_tensor(p)
    B, K = P.shape
    kappa = _kernel_array(kernel, B)
    pi, live = _proportions(P)
    M = _dirac_weights(P, pi)

    if mode == "ova":
        D = M - 1.0 / B
        S = _quadratic_forms(kappa, D)
        terms = pi * ad.sqrt(ad.clamp_min(S, 0.0))
        return ad.sorted_sum(terms * live, axis=1)
    if mode != "ovo":
        raise ValueError(f"unknown mode {mode!r}")
    pairs = _pair_index(K)
    if not pairs:
        return 0.0 * ad.tsum(P)
    a_idx = [a for a, _ in pairs]
    b_idx = [b for _, b in pairs]
    D = ad.take(M, (slice(None), a_idx)) - ad.take(M, (slice(None), b_idx))
    S = _quadratic_forms(kappa, D)
    w = ad.take(pi, (slice(None), a_idx)) * ad.take(pi, (slice(None), b_idx))
    pair_live = live[:, a_idx] * live[:, b_idx]
    terms = w * ad.sqrt(ad.clamp_min(S, 0.0)) * pair_live
    return 2.0 * ad.sorted_sum(terms, axis=1)


# -- Wasserstein ------------------------------------------------------------------


def _cost_array(cost, B: int) -> np.ndarray:
    C = cost.matrix if isinstance(cost, CostMatrix) else np.asarray(cost, dtype=np.float64)
    if C.shape != (B, B):
        raise ValueError(f"cost of shape {C.shape} does not match batch size {B}")
    return C


def _lex_less(x: np.ndarray, y: np.ndarray) -> bool:
    diff = np.flatnonzero(x != y)
    return bool(diff.size) and x[diff[0]] < y[diff[0]]


def eval_wasserstein(p, cost, mode: str, *, pivot: str = "block") -> Tensor:
    P = _posterior_tensor(p)
    B, K = P.shape
    C = _cost_array(cost, B)
    pi, live = _proportions(P)
    M = _dirac_weights(P, pi)
    alive = [k for k in range(K) if live[0, k] > 0]
    cols = {k: ad.take(M, (slice(None), k)) for k in alive}
    weight = {k: ad.take(pi, (0, k)) for k in alive}

    terms = []
    if mode == "ova":
        uniform = np.full(B, 1.0 / B)
        for k in alive:
            terms.append(weight[k] * emd_tensor(cols[k], uniform, C, pivot=pivot))
    elif mode == "ovo":
        symmetric = np.array_equal(C, C.T)
        for a, b in combinations(alive, 2):
            # canonical argument order keeps the value independent of labels
            if _lex_less(cols[b].value.ravel(), cols[a].value.ravel()):
                a, b = b, a
            w = weight[a] * weight[b]
            if symmetric:
                terms.append(2.0 * w * emd_tensor(cols[a], cols[b], C, pivot=pivot))
            else:
                terms.append(w * emd_tensor(cols[a], cols[b], C, pivot=pivot))
                terms.append(w * emd_tensor(cols[b], cols[a], C, pivot=pivot))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if not terms:
        return 0.0 * ad.tsum(P)
    return ad.sorted_sum(ad.concat(terms, axis=1), axis=1)


# -- dispatch ---------------------------------------------------------------------


def eval_gemini(p, spec: GeminiSpec | str, geometry=None, **kwargs) -> Tensor:
    """Evaluate any objective.

    Parameters
    ----------
    p : PosteriorBatch, Tensor or array_like
        ``B x K`` soft assignments.
    spec : GeminiSpec or str
        Objective, e.g. ``"wasserstein_ovo"``.
    geometry : KernelMatrix or CostMatrix, optional
        Required by the MMD and Wasserstein objectives, ignored otherwise.

    Returns
    -------
    Tensor
        ``1 x 1`` value to be maximised.
    """
    spec = GeminiSpec.parse(spec) if isinstance(spec, str) else spec
    if spec.distance in F_DIVERGENCES:
        return eval_f_divergence(p, spec)
    if geometry is None:
        raise ValueError(f"{spec.tag} needs a {'kernel' if spec.needs_kernel else 'cost'} matrix")
    if spec.needs_kernel:
        if isinstance(geometry, CostMatrix):
            raise ValueError(f"{spec.tag} needs a kernel matrix, got a cost matrix")
        return eval_mmd(p, geometry, spec.mode)
    if isinstance(geometry, KernelMatrix):
        raise ValueError(f"{spec.tag} needs a cost matrix, got a kernel matrix")
    return eval_wasserstein(p, geometry, spec.mode, **kwargs)
