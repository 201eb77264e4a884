"""Exact earth mover's distance between discrete measures on a shared support.

The solver returns an optimal plan together with dual potentials.  Optimal
duals are subgradients of the transport cost with respect to the marginal
weights, which is what :func:`emd_tensor` feeds to the autodiff tape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._netsimplex import STATUS_MAX_ITER, network_simplex
from .autodiff import Tensor

NORMALISATION_TOL = 1e-9


@dataclass(frozen=True)
class DiscreteMeasure:
    """Nonnegative weights on the batch support, summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if not np.all(np.isfinite(w)):
            raise ValueError("measure weights must be finite")
        if np.any(w < 0):
            raise ValueError("measure weights must be nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("measure has zero total mass")
        if abs(total - 1.0) > NORMALISATION_TOL:
            raise ValueError(f"measure weights sum to {total!r}, expected 1")
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class TransportPlan:
    plan: np.ndarray
    cost_value: float
    dual_u: np.ndarray
    dual_v: np.ndarray
    n_iter: int = 0


def _as_measure(p) -> DiscreteMeasure:
    return p if isinstance(p, DiscreteMeasure) else DiscreteMeasure(p)


def emd(p, q, cost, *, pivot: str = "block", max_iter: int | None = None) -> TransportPlan:
    """Solve ``min <plan, cost>`` over couplings of ``p`` and ``q``.

    Parameters
    ----------
    p, q : DiscreteMeasure or array_like
        Source and target weights (each summing to one).
    cost : array_like of shape (len(p), len(q))
    pivot : {"block", "bland"}
        Entering-arc rule.  ``"block"`` is block-search pricing,
        ``"bland"`` takes the lowest-index eligible arc.

    Returns
    -------
    TransportPlan
        Duals are shifted so that ``dual_u`` sums to zero over the support
        of ``p``.  Zero-mass atoms are removed before solving; their
        potentials are recovered by the c-transform, i.e. the slope of the
        cost when mass is added there.  With full support ``dual_u`` sums
        to zero.
    """
    p, q = _as_measure(p), _as_measure(q)
    a, b = p.weights, q.weights
    C = np.ascontiguousarray(cost, dtype=np.float64)
    if C.shape != (a.size, b.size):
        raise ValueError(f"cost shape {C.shape} does not match measures ({a.size}, {b.size})")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix must be finite")
    if pivot not in ("block", "bland"):
        raise ValueError(f"unknown pivot rule {pivot!r}")

    ia = np.flatnonzero(a > 0)
    jb = np.flatnonzero(b > 0)
    a_sub = a[ia] / a[ia].sum()
    b_sub = b[jb] / b[jb].sum()
    C_sub = np.ascontiguousarray(C[np.ix_(ia, jb)])
    if max_iter is None:
        max_iter = 50 * (ia.size * jb.size + ia.size + jb.size) + 1000
    plan_sub, u_sub, v_sub, n_iter, status = network_simplex(
        a_sub, b_sub, C_sub, pivot == "bland", max_iter
    )
    if status == STATUS_MAX_ITER:
        raise RuntimeError(f"network simplex hit max_iter={max_iter}")
    if status != 0:
        raise RuntimeError("network simplex ended with artificial flow; inputs unbalanced?")

    shift = u_sub.mean()
    u_sub = u_sub - shift
    v_sub = v_sub + shift
    plan = np.zeros_like(C)
    plan[np.ix_(ia, jb)] = plan_sub
    u = np.empty(a.size)
    v = np.empty(b.size)
    u[ia] = u_sub
    v[jb] = v_sub
    ia0 = np.flatnonzero(a <= 0)
    jb0 = np.flatnonzero(b <= 0)
    if ia0.size:
        u[ia0] = (C[np.ix_(ia0, jb)] - v_sub[None, :]).min(axis=1)
    if jb0.size:
        v[jb0] = (C[np.ix_(ia, jb0)] - u_sub[:, None]).min(axis=0)
    value = float(np.sum(plan * C))
    return TransportPlan(plan=plan, cost_value=value, dual_u=u, dual_v=v, n_iter=int(n_iter))


def emd_gradient_wrt_weights(plan: TransportPlan) -> tuple[np.ndarray, np.ndarray]:
    """Subgradient of the optimal cost w.r.t. the source and target weights.

    Only the component tangent to the probability simplex is meaningful:
    adding a constant to ``dual_u`` and removing it from ``dual_v`` leaves
    the cost unchanged.
    """
    return plan.dual_u, plan.dual_v


def emd_tensor(p: Tensor | np.ndarray, q: Tensor | np.ndarray, cost: np.ndarray, **kwargs) -> Tensor:
    """Differentiable EMD between two weight columns (``B x 1`` tensors).

    Either argument may be a constant array.
    """
    pt = p if isinstance(p, Tensor) else Tensor(np.reshape(p, (-1, 1)))
    qt = q if isinstance(q, Tensor) else Tensor(np.reshape(q, (-1, 1)))
    pv = pt.value.ravel()
    qv = qt.value.ravel()
    # exact renormalisation guards against accumulated rounding in the caller
    res = emd(pv / pv.sum(), qv / qv.sum(), cost, **kwargs)
    u = res.dual_u.reshape(pt.shape)
    v = res.dual_v.reshape(qt.shape)
    return Tensor.from_op(
        "emd", np.array([[res.cost_value]]), [(pt, lambda g: g * u), (qt, lambda g: g * v)]
    )
