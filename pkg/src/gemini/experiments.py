"""Experiment runners shared by the command line and the acceptance suite.

Output layout for a clustering experiment named ``exp``::

    <outdir>/exp/<method>/<seed>/report.json
    <outdir>/exp/<method>/<seed>/timing.json
    <outdir>/exp/<method>/<seed>/assignments.csv
    <outdir>/exp/<method>/<seed>/grids/{decision,entropy}.csv
    <outdir>/exp/summary.csv

where ``<method>`` is an objective tag such as ``mmd_ova`` or a baseline
such as ``kmeans``.  Every JSON file carries the resolved config under
``"config"`` and every CSV starts with a ``# config=<json>`` line.
``report.json`` holds no timing, so reruns reproduce it byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import BoundaryMIExperiment, ClusteringExperiment, parse_config, resolved
from .datasets import Dataset, GstmParams, gen_gaussian_mixture, gen_gstm, gen_two_moons, load_dataset
from .geometry import load_matrix_csv
from .metrics import (
    GridSpec,
    ari,
    appendix_a_mi,
    decision_grid,
    delta_mi_limit,
    kmeans,
    mixture_beta,
    monte_carlo_boundary_mi,
    nonempty_clusters,
    renyi_entropy,
    renyi_entropy_map,
)
from .models import CategoricalTableModel, MlpModel, save_checkpoint
from .objectives import GeminiSpec
from .training import GeometryConfig, RunReport, TrainConfig, full_posterior, train

# -- building blocks --------------------------------------------------------------


def make_dataset(data_cfg, seed: int) -> Dataset:
    kind = data_cfg.kind
    if kind == "gaussian_mixture":
        means = np.asarray(data_cfg.means, dtype=np.float64)
        ds = gen_gaussian_mixture(len(means), data_cfg.n_per_cluster, means, data_cfg.sigma, seed)
        if data_cfg.n_samples is not None:
            if data_cfg.n_samples > len(ds):
                raise ValueError("n_samples exceeds the generated sample count")
            ds = Dataset(ds.features[: data_cfg.n_samples], ds.labels[: data_cfg.n_samples], ds.name, seed)
        return ds
    if kind == "gstm":
        params = GstmParams(data_cfg.alpha, data_cfg.sigma, data_cfg.rho, data_cfg.n_per_cluster)
        return gen_gstm(params, seed)
    if kind == "moons":
        return gen_two_moons(data_cfg.n, data_cfg.noise, seed)
    if kind == "file":
        return load_dataset(data_cfg.path, data_cfg.format)
    raise ValueError(f"unknown dataset kind {kind!r}")


def make_model(model_cfg, n_samples: int, n_features: int, seed: int):
    if model_cfg.kind == "categorical":
        return CategoricalTableModel(n_samples, model_cfg.n_clusters, model_cfg.init_scale, seed=seed)
    return MlpModel([n_features, *model_cfg.hidden, model_cfg.n_clusters], seed=seed)


def geometry_for(spec: GeminiSpec, geo) -> GeometryConfig:
    if spec.needs_kernel:
        kind, path, role = geo.kernel, geo.kernel_path, "kernel"
    elif spec.needs_cost:
        kind, path, role = geo.cost, geo.cost_path, "cost"
    else:
        return GeometryConfig()
    matrix = load_matrix_csv(path, role).matrix if kind == "precomputed" else None
    return GeometryConfig(kind=kind, sigma=geo.sigma, quantile=geo.quantile, matrix=matrix)


def train_config(cfg: ClusteringExperiment, spec: GeminiSpec, seed: int) -> TrainConfig:
    t = cfg.training
    return TrainConfig(
        objective=spec,
        epochs=t.epochs,
        batch_size=t.batch_size,
        learning_rate=t.learning_rate,
        betas=tuple(t.betas),
        adam_eps=t.adam_eps,
        seed=seed,
        geometry=geometry_for(spec, cfg.geometry),
        log_every=t.log_every,
    )


@dataclass
class SeedResult:
    method: str
    seed: int
    report: dict
    wall_time: float
    posterior: np.ndarray | None = None
    model: object = None
    dataset: Dataset | None = None


def run_objective(cfg: ClusteringExperiment, spec: GeminiSpec, seed: int, callback=None) -> SeedResult:
    """Generate the data for ``seed``, train one model and summarise it."""
    ds = make_dataset(cfg.dataset, seed)
    model = make_model(cfg.model, len(ds), ds.n_features, seed)
    rep: RunReport = train(model, ds, train_config(cfg, spec, seed), callback=callback)
    P = full_posterior(model, ds.features)
    out = rep.to_dict()
    out["mean_renyi_entropy"] = float(renyi_entropy(P, cfg.outputs.renyi_order).mean())
    out["renyi_order"] = cfg.outputs.renyi_order
    return SeedResult(spec.tag, seed, out, rep.wall_time, P, model, ds)


def run_kmeans(cfg: ClusteringExperiment, seed: int) -> SeedResult:
    start = time.perf_counter()
    ds = make_dataset(cfg.dataset, seed)
    res = kmeans(ds.features, cfg.model.n_clusters, seed=seed, n_init=cfg.kmeans_n_init)
    out = {
        "method": "kmeans",
        "assignments": [int(a) for a in res.labels],
        "ari": float(ari(ds.labels, res.labels)) if ds.labels is not None else None,
        "n_nonempty": nonempty_clusters(res.labels),
        "inertia": res.inertia,
        "n_iter": res.n_iter,
        "proportions": [float(v) for v in np.bincount(res.labels, minlength=cfg.model.n_clusters) / len(ds)],
    }
    return SeedResult("kmeans", seed, out, time.perf_counter() - start, dataset=ds)


def _run_and_write(cfg: ClusteringExperiment, method: str, seed: int, root: Path) -> SeedResult:
    res = run_kmeans(cfg, seed) if method == "kmeans" else run_objective(cfg, GeminiSpec.parse(method), seed)
    write_seed_outputs(cfg, res, root)
    return SeedResult(res.method, res.seed, res.report, res.wall_time)


def _job(args):
    # worker processes write only their own seed directory
    cfg_dict, method, seed, root = args
    return _run_and_write(parse_config(cfg_dict), method, seed, Path(root))


# -- file writers -----------------------------------------------------------------


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv_text(cfg_dict: dict, header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write("# config=" + json.dumps(cfg_dict, sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def write_seed_outputs(cfg: ClusteringExperiment, res: SeedResult, root: Path) -> Path:
    cfg_dict = resolved(cfg)
    d = root / cfg.name / res.method / str(res.seed)
    d.mkdir(parents=True, exist_ok=True)
    report = dict(res.report, method=res.method, seed=res.seed, config=cfg_dict)
    (d / "report.json").write_text(_dump_json(report))
    (d / "timing.json").write_text(_dump_json({"wall_time": res.wall_time, "config": cfg_dict}))
    assign = res.report["assignments"]
    maxp = res.report.get("max_posterior") or [1.0] * len(assign)
    rows = ((i, int(a), float(p)) for i, (a, p) in enumerate(zip(assign, maxp)))
    (d / "assignments.csv").write_text(_csv_text(cfg_dict, ["index", "cluster", "max_posterior"], rows))
    if res.model is not None and cfg.outputs.checkpoint:
        save_checkpoint(res.model, d / "checkpoint.bin")
    if res.model is not None and cfg.outputs.grids:
        write_grids(cfg, res.model, res.dataset, d / "grids")
    return d


def write_grids(cfg: ClusteringExperiment, model, ds: Dataset, outdir: Path) -> None:
    cfg_dict = resolved(cfg)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = grid_for(ds.features, cfg.outputs.grid_resolution)
    gx, gy, lab = decision_grid(model, grid)
    rows = zip(gx.ravel().tolist(), gy.ravel().tolist(), lab.ravel().tolist())
    (outdir / "decision.csv").write_text(_csv_text(cfg_dict, ["x", "y", "cluster"], rows))
    emap = renyi_entropy_map(model, grid, cfg.outputs.renyi_order)
    (outdir / "entropy.csv").write_text(_csv_text(cfg_dict, ["x", "y", "value"], emap.rows()))


def grid_for(X: np.ndarray, resolution: int) -> GridSpec:
    """Grid over the central 99% of the data so heavy tails do not flatten it."""
    if X.shape[1] != 2:
        raise ValueError("grids need two-dimensional features")
    lo = np.quantile(X, 0.005, axis=0)
    hi = np.quantile(X, 0.995, axis=0)
    return GridSpec.around(np.vstack([lo, hi]), resolution)


# -- aggregation ------------------------------------------------------------------

SUMMARY_HEADER = ["method", "ari_mean", "ari_std", "n_seeds", "nonempty_mean", "renyi_entropy_mean"]


def summarise(results: list[SeedResult], methods: list[str]) -> list[list]:
    """One row per method; statistics over seeds in sorted seed order."""
    rows = []
    for m in methods:
        rs = sorted((r for r in results if r.method == m), key=lambda r: r.seed)
        if not rs:
            continue
        aris = [r.report["ari"] for r in rs if r.report.get("ari") is not None]
        ents = [r.report["mean_renyi_entropy"] for r in rs if "mean_renyi_entropy" in r.report]
        rows.append(
            [
                m,
                round(float(np.mean(aris)), 12) if aris else "",
                round(float(np.std(aris)), 12) if aris else "",
                len(rs),
                round(float(np.mean([r.report["n_nonempty"] for r in rs])), 12),
                round(float(np.mean(ents)), 12) if ents else "",
            ]
        )
    return rows


def run_clustering(cfg: ClusteringExperiment, outdir, seeds=None, threads: int = 1, write_summary=True):
    """Run every (method, seed) pair, write per-run files and the summary table."""
    seeds = sorted(set(seeds if seeds else cfg.seeds))
    methods = list(cfg.baselines) + list(cfg.objectives)
    jobs = [(m, s) for m in methods for s in seeds]
    root = Path(outdir)
    if threads > 1 and len(jobs) > 1:
        cfg_dict = resolved(cfg)
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_job, [(cfg_dict, m, s, str(root)) for m, s in jobs]))
    else:
        results = [_run_and_write(cfg, m, s, root) for m, s in jobs]
    rows = summarise(results, methods)
    if write_summary:
        (root / cfg.name).mkdir(parents=True, exist_ok=True)
        (root / cfg.name / "summary.csv").write_text(_csv_text(resolved(cfg), SUMMARY_HEADER, rows))
    return results, rows


# -- boundary mutual information --------------------------------------------------

BOUNDARY_HEADER = [
    "gap",
    "beta",
    "delta_closed",
    "delta_limit",
    "mi_a_closed",
    "mi_b_closed",
    "mi_a_mc",
    "mi_a_se",
    "mi_b_mc",
    "mi_b_se",
    "delta_mc_median",
]


def boundary_mi_rows(cfg: BoundaryMIExperiment, seed: int = 0) -> list[list]:
    """Closed-form and sampled information of the two step models for each gap."""
    rows = []
    for gap in cfg.gaps:
        beta = mixture_beta(0.0, gap, cfg.sigma)
        a_closed = appendix_a_mi("A", cfg.eps, beta)
        b_closed = appendix_a_mi("B", cfg.eps, beta)
        kw = dict(n_samples=cfg.n_samples, seed=seed, n_repeats=cfg.n_repeats)
        a = monte_carlo_boundary_mi("A", cfg.eps, 0.0, gap, cfg.sigma, **kw)
        b = monte_carlo_boundary_mi("B", cfg.eps, 0.0, gap, cfg.sigma, **kw)
        rows.append(
            [
                float(gap),
                beta,
                a_closed - b_closed,
                delta_mi_limit(beta),
                a_closed,
                b_closed,
                a.mean,
                a.std_error,
                b.mean,
                b.std_error,
                float(np.median(a.estimates - b.estimates)),
            ]
        )
    return rows


def run_boundary_mi(cfg: BoundaryMIExperiment, outdir, seeds=None) -> list[list]:
    seed = sorted(seeds)[0] if seeds else cfg.seeds[0]
    rows = boundary_mi_rows(cfg, seed)
    d = Path(outdir) / cfg.name
    d.mkdir(parents=True, exist_ok=True)
    cfg_dict = resolved(cfg)
    (d / "delta_mi.csv").write_text(_csv_text(cfg_dict, BOUNDARY_HEADER, rows))
    report = {"config": cfg_dict, "seed": seed, "rows": [dict(zip(BOUNDARY_HEADER, r)) for r in rows]}
    (d / "report.json").write_text(_dump_json(report))
    return rows


# -- Dirac approximation ----------------------------------------------------------


def smooth_two_cluster_posterior(X: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Fixed logistic rule ``p(y=1|x) = sigmoid(x_0 / scale)``."""
    p1 = 1.0 / (1.0 + np.exp(-X[:, 0] / scale))
    return np.column_stack([1.0 - p1, p1])


def dirac_estimates(sizes, seed: int, separation: float = 4.0) -> np.ndarray:
    """Wasserstein-OvO batch estimates on nested samples of a 2-Gaussian mixture.

    The largest sample is drawn once and each smaller batch is its prefix,
    so successive estimates differ only by the added points.
    """
    from .geometry import build_cost
    from .objectives import eval_gemini

    sizes = sorted(sizes)
    means = np.array([[-separation / 2, 0.0], [separation / 2, 0.0]])
    n_max = sizes[-1]
    rng = np.random.default_rng(seed)
    comp = rng.integers(0, 2, size=n_max)
    X = means[comp] + rng.standard_normal((n_max, 2))
    out = []
    for n in sizes:
        P = smooth_two_cluster_posterior(X[:n])
        out.append(eval_gemini(P, "wasserstein_ovo", build_cost(X[:n])).item())
    return np.array(out)


# -- figure data ------------------------------------------------------------------


def run_figures(cfg, outdir, seeds=None) -> list[Path]:
    """Plot-ready CSVs: the information-gap curve, or decision and entropy grids."""
    if isinstance(cfg, BoundaryMIExperiment):
        run_boundary_mi(cfg, outdir, seeds)
        return [Path(outdir) / cfg.name / "delta_mi.csv"]
    if cfg.model.kind == "categorical":
        raise ValueError("figure grids need a model that predicts on new points (mlp)")
    written = []
    for seed in sorted(set(seeds if seeds else cfg.seeds[:1])):
        for spec in cfg.specs():
            res = run_objective(cfg, spec, seed)
            d = Path(outdir) / cfg.name / spec.tag / str(seed) / "grids"
            write_grids(cfg, res.model, res.dataset, d)
            written.extend([d / "decision.csv", d / "entropy.csv"])
    return written
