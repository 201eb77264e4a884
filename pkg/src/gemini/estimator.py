"""Scikit-learn style front end to GEMINI training."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .datasets import Dataset
from .models import CategoricalTableModel, MlpModel
from .objectives import GeminiSpec
from .training import GeometryConfig, TrainConfig, full_posterior, train
from .validation import check_features


class GeminiClustering(ClusterMixin, BaseEstimator):
    """Discriminative clustering by maximising a GEMINI.

    Parameters
    ----------
    objective : str
        ``"<distance>_<mode>"`` with distance in ``kl``, ``tv``,
        ``hellinger``, ``mmd``, ``wasserstein`` and mode ``ova`` or ``ovo``.
    n_clusters : int
        Size of the softmax head; training may leave some clusters empty.
    model : {"mlp", "categorical"}
        ``categorical`` learns one free distribution per training sample and
        cannot predict on new data.
    hidden_layer_sizes : tuple of int
    geometry : str, optional
        Kernel (``linear``, ``gaussian``) or cost (``euclidean``,
        ``squared_euclidean``, ``shortest_path``).  Defaults to ``linear``
        for MMD and ``euclidean`` for Wasserstein.
    sigma : float
        Gaussian kernel bandwidth.
    quantile : float
        Neighbourhood threshold quantile of the shortest-path cost.
    epochs, batch_size, learning_rate : training budget; ``batch_size=0``
        uses the full dataset for every step.
    init_scale : float
        Initial logit noise of the categorical model.
    random_state : int

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
    model_ : MlpModel or CategoricalTableModel
    report_ : RunReport
    n_features_in_ : int
    """

    def __init__(
        self,
        objective="mmd_ova",
        n_clusters=3,
        model="mlp",
        hidden_layer_sizes=(64, 64),
        geometry=None,
        sigma=1.0,
        quantile=0.05,
        epochs=1000,
        batch_size=0,
        learning_rate=1e-3,
        init_scale=0.01,
        random_state=0,
    ):
        self.objective = objective
        self.n_clusters = n_clusters
        self.model = model
        self.hidden_layer_sizes = hidden_layer_sizes
        self.geometry = geometry
        self.sigma = sigma
        self.quantile = quantile
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.init_scale = init_scale
        self.random_state = random_state

    def _build_model(self, n_samples: int, n_features: int):
        if self.model == "mlp":
            sizes = [n_features, *self.hidden_layer_sizes, self.n_clusters]
            return MlpModel(sizes, seed=self.random_state)
        if self.model == "categorical":
            return CategoricalTableModel(n_samples, self.n_clusters, self.init_scale, seed=self.random_state)
        raise ValueError(f"model must be 'mlp' or 'categorical', got {self.model!r}")

    def fit(self, X, y=None):
        """Train on ``X``; ``y`` is only used to report an ARI."""
        X = check_features(X)
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be positive")
        spec = GeminiSpec.parse(self.objective)
        config = TrainConfig(
            objective=spec,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=self.random_state,
            geometry=GeometryConfig(kind=self.geometry, sigma=self.sigma, quantile=self.quantile),
        )
        self.model_ = self._build_model(*X.shape)
        self.n_features_in_ = X.shape[1]
        self.report_ = train(self.model_, Dataset(X, y), config)
        self.labels_ = np.asarray(self.report_.assignments)
        self._train_X = X
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_features(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        if isinstance(self.model_, CategoricalTableModel):
            if X.shape != self._train_X.shape or not np.array_equal(X, self._train_X):
                raise ValueError("a categorical model can only predict its own training samples")
        return full_posterior(self.model_, X)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)
