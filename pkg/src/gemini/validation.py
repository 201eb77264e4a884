"""Input checks shared by the estimators, generators and geometry builders."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

ROW_SUM_TOL = 1e-9


def check_features(X, *, min_samples: int = 1) -> np.ndarray:
    """Finite 2-D float64 feature matrix."""
    return check_array(
        X, dtype=np.float64, ensure_2d=True, ensure_all_finite=True, ensure_min_samples=min_samples
    )


def check_labels(y, n_samples: int | None = None) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {y.shape}")
    if n_samples is not None and y.shape[0] != n_samples:
        raise ValueError(f"got {y.shape[0]} labels for {n_samples} samples")
    if y.size and not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.mod(y, 1) == 0):
            raise ValueError("labels must be integers")
        y = y.astype(np.int64)
    return y.astype(np.int64, copy=False)


def check_posterior(P, tol: float = ROW_SUM_TOL) -> np.ndarray:
    """Nonnegative ``B x K`` matrix whose rows sum to one."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] == 0:
        raise ValueError(f"posterior must be a non-empty 2-D array, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ValueError("posterior has non-finite entries")
    if np.any(P < 0):
        raise ValueError("posterior has negative entries")
    dev = np.max(np.abs(P.sum(axis=1) - 1.0))
    if dev > tol:
        raise ValueError(f"posterior rows do not sum to 1 (max deviation {dev:.3g})")
    return P


def check_positive(name: str, value: float) -> float:
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be positive, got {value!r}")
    return float(value)
