"""Declarative experiment configuration.

Configs are JSON documents validated by pydantic; unknown keys are
rejected so that a misspelt field fails loudly instead of silently falling
back to a default.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .objectives import GeminiSpec

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GaussianMixtureData(_Strict):
    kind: Literal["gaussian_mixture"]
    means: list[list[float]]
    sigma: float = Field(1.0, gt=0)
    n_per_cluster: int = Field(gt=0)
    n_samples: int | None = Field(None, gt=0, description="truncate to the first n rows")


class GstmData(_Strict):
    kind: Literal["gstm"]
    alpha: float = Field(5.0, gt=0)
    sigma: float = Field(1.0, gt=0)
    rho: int = Field(1, ge=1)
    n_per_cluster: int = Field(gt=0)


class MoonsData(_Strict):
    kind: Literal["moons"]
    n: int = Field(500, gt=0)
    noise: float = Field(0.05, ge=0)

    @field_validator("n")
    @classmethod
    def _even(cls, v):
        if v % 2:
            raise ValueError("moons need an even sample count")
        return v


class FileData(_Strict):
    kind: Literal["file"]
    path: str
    format: Literal["csv", "binary"] | None = None


DataConfig = Annotated[
    Union[GaussianMixtureData, GstmData, MoonsData, FileData], Field(discriminator="kind")
]


class ModelConfig(_Strict):
    kind: Literal["mlp", "categorical"] = "mlp"
    n_clusters: int = Field(gt=0)
    hidden: list[int] = [64, 64]
    init_scale: float = Field(0.01, ge=0)


class GeometrySection(_Strict):
    kernel: Literal["linear", "gaussian", "precomputed"] | None = None
    cost: Literal["euclidean", "squared_euclidean", "shortest_path", "precomputed"] | None = None
    sigma: float = Field(1.0, gt=0)
    quantile: float = Field(0.05, gt=0, lt=1)
    kernel_path: str | None = None
    cost_path: str | None = None

    @model_validator(mode="after")
    def _paths(self):
        if self.kernel == "precomputed" and not self.kernel_path:
            raise ValueError("kernel 'precomputed' needs kernel_path")
        if self.cost == "precomputed" and not self.cost_path:
            raise ValueError("cost 'precomputed' needs cost_path")
        return self


class TrainingSection(_Strict):
    epochs: int = Field(1000, ge=0)
    batch_size: int = Field(0, ge=0)
    learning_rate: float = Field(1e-3, gt=0)
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = Field(1e-8, gt=0)
    log_every: int = Field(0, ge=0)

    @field_validator("betas")
    @classmethod
    def _betas(cls, v):
        if not all(0.0 <= b < 1.0 for b in v):
            raise ValueError("betas must lie in [0, 1)")
        return v


class OutputSection(_Strict):
    grids: bool = False
    grid_resolution: int = Field(100, ge=2)
    renyi_order: float = Field(2.0, gt=0)
    checkpoint: bool = False


class ClusteringExperiment(_Strict):
    schema_version: Literal[1]
    kind: Literal["clustering"] = "clustering"
    name: str = Field(min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")
    dataset: DataConfig
    model: ModelConfig
    objectives: list[str] = Field(min_length=1)
    geometry: GeometrySection = GeometrySection()
    training: TrainingSection = TrainingSection()
    seeds: list[int] = [0]
    baselines: list[Literal["kmeans"]] = []
    kmeans_n_init: int = Field(10, ge=1, description="k-means++ restarts; lowest inertia wins")
    outputs: OutputSection = OutputSection()

    @field_validator("objectives")
    @classmethod
    def _objectives(cls, v):
        tags = [GeminiSpec.parse(t).tag for t in v]
        if len(set(tags)) != len(tags):
            raise ValueError("duplicate objective")
        return tags

    @model_validator(mode="after")
    def _geometry_present(self):
        specs = [GeminiSpec.parse(t) for t in self.objectives]
        if any(s.needs_kernel for s in specs) and self.geometry.kernel is None:
            raise ValueError("geometry.kernel is required by the MMD objectives")
        if any(s.needs_cost for s in specs) and self.geometry.cost is None:
            raise ValueError("geometry.cost is required by the Wasserstein objectives")
        if self.model.kind == "categorical" and self.outputs.grids:
            raise ValueError("outputs.grids needs a model that predicts on new points (mlp)")
        return self

    def specs(self) -> list[GeminiSpec]:
        return [GeminiSpec.parse(t) for t in self.objectives]


class BoundaryMIExperiment(_Strict):
    """Sharp-boundary mutual information of a good and a misplaced cut."""

    schema_version: Literal[1]
    kind: Literal["boundary_mi"]
    name: str = Field(min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")
    eps: float = Field(1e-8, gt=0, lt=0.5)
    sigma: float = Field(1.0, gt=0)
    gaps: list[float] = [1.0, 2.0, 4.0, 8.0]
    n_samples: int = Field(1000, gt=1)
    n_repeats: int = Field(50, gt=1)
    seeds: list[int] = [0]


Experiment = Annotated[Union[ClusteringExperiment, BoundaryMIExperiment], Field(discriminator="kind")]


class _Root(BaseModel):
    experiment: Experiment


class ConfigError(ValueError):
    """Config that does not parse or validate; message lists the bad fields."""


_UNION_TAGS = {"clustering", "boundary_mi", "gaussian_mixture", "gstm", "moons", "file"}


def _format(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        parts = [str(p) for p in e["loc"][1:]]
        # drop the tagged-union branch names pydantic inserts into the path
        parts = [p for i, p in enumerate(parts) if not (p in _UNION_TAGS and (i == 0 or parts[i - 1] == "dataset"))]
        loc = ".".join(parts) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "\n".join(lines)


def parse_config(data: dict):
    if not isinstance(data, dict):
        raise ConfigError("<root>: config must be a JSON object")
    data = dict(data)
    data.setdefault("kind", "clustering")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {data.get('schema_version')!r}")
    try:
        return _Root(experiment=data).experiment
    except ValidationError as exc:
        raise ConfigError(_format(exc)) from None


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(data)


def resolved(cfg) -> dict:
    """Plain-JSON form with every default filled in."""
    return cfg.model_dump(mode="json")
