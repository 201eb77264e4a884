"""Discriminative clustering with generalised mutual information objectives."""

from .estimator import GeminiClustering
from .models import CategoricalTableModel, MlpModel
from .objectives import GeminiSpec, eval_gemini
from .training import GeometryConfig, RunReport, TrainConfig, train

__all__ = [
    "CategoricalTableModel",
    "GeminiClustering",
    "GeminiSpec",
    "GeometryConfig",
    "MlpModel",
    "RunReport",
    "TrainConfig",
    "eval_gemini",
    "train",
]
