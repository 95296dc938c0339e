"""End-to-end detection pipeline and its flat-file configuration.

The pipeline ties the stages together: load the pair, tessellate once,
extract per-region features from both rasters, build the adaptive graph from
the pre-event features, regress the post-event features against it, and turn
the row-sparse residual into a difference image, a change map, and (when a
truth mask is given) a metrics report.

Configuration precedence is CLI flag > config file > built-in default. The
config file is flat ``key = value`` text with ``#`` comments; every key is a
CLI flag name (dashes and underscores are interchangeable).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import detect as det
from .formats import write_energy_csv, write_gspm, write_sweep_csv
from .graph import build_graph
from .imaging import ImageRaster, load_image, save_png, segment_superpixels, extract_features
from .regression import RegressionState, SolverConfig, solve_decomposition
from .spectral import eigendecompose, energy_profile, spectral_projection_regression

# Keys whose values are paths/strings; everything else is numeric or boolean.
_BOOL_KEYS = {"strict", "run_vdf", "run_spectral_projection", "trace"}
_INT_KEYS = {"channels", "n_superpixels", "seed", "k", "max_iter", "tau", "kc", "eigen_budget"}
_FLOAT_KEYS = {"alpha", "mu", "xi0"}
_STR_KEYS = {"pre", "post", "truth", "out", "seg_method", "seg_on", "graph_mode",
             "prox", "linear_solver", "l20_rule", "di_method", "direction"}
_TUPLE_KEYS = {"filter_coeffs"}


@dataclass
class PipelineConfig:
    """Everything a detection run needs; defaults match the CLI."""

    pre: str = ""
    post: str = ""
    out: str = ""
    truth: str | None = None
    channels: int = 1
    n_superpixels: int = 2000
    seg_method: str = "grid"
    seg_on: str = "pre"
    seed: int = 0
    k: int = 30
    graph_mode: str = "l2"
    alpha: float = 0.05
    mu: float = 0.1
    xi0: float = 1e-4
    max_iter: int = 100
    prox: str = "l21"
    tau: int | None = None
    filter_coeffs: tuple[float, ...] = (1.0, 1.0, 1.0)
    linear_solver: str = "direct"
    l20_rule: str = "derived"
    di_method: str = "otsu"
    direction: str = "forward"
    kc: int | None = None
    eigen_budget: int = 6000
    run_vdf: bool = False
    run_spectral_projection: bool = False
    strict: bool = False
    trace: bool = False

    def __post_init__(self) -> None:
        if self.seg_on not in ("pre", "post"):
            raise ValueError("seg_on must be 'pre' or 'post'")
        if self.direction not in ("forward", "backward"):
            raise ValueError("direction must be 'forward' or 'backward'")
        if self.di_method not in ("otsu", "kmeans2"):
            raise ValueError("di_method must be 'otsu' or 'kmeans2'")
        if self.seg_method not in ("grid", "slic"):
            raise ValueError("seg_method must be 'grid' or 'slic'")
        if self.graph_mode not in ("l2", "entropy"):
            raise ValueError("graph_mode must be 'l2' or 'entropy'")
        # Solver values are validated by the SolverConfig they feed.
        self.solver_config()

    def solver_config(self) -> SolverConfig:
        return SolverConfig(alpha=self.alpha, mu=self.mu, xi0=self.xi0,
                            max_iter=self.max_iter, prox=self.prox, tau=self.tau,
                            filter_coeffs=self.filter_coeffs,
                            linear_solver=self.linear_solver, l20_rule=self.l20_rule)


def _coerce(key: str, raw: str):
    if key in _BOOL_KEYS:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"config key {key!r}: {raw!r} is not a boolean")
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _TUPLE_KEYS:
        return tuple(float(v) for v in raw.replace(",", " ").split())
    if key in _STR_KEYS:
        return raw.strip()
    raise ValueError(f"unknown config key {key!r}")


def parse_config_file(path: str | Path) -> dict:
    """Parse flat ``key = value`` lines; '#' starts a comment; keys are flags."""
    values: dict = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = text.split("=", 1)
            key = key.strip().replace("-", "_")
            values[key] = _coerce(key, raw.strip())
    return values


def build_config(file_values: dict | None = None, cli_values: dict | None = None) -> PipelineConfig:
    """Merge defaults, config-file values, and explicit CLI values, in that order."""
    merged: dict = {}
    known = {f.name for f in fields(PipelineConfig)}
    for source in (file_values or {}), (cli_values or {}):
        for key, val in source.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            if val is not None:
                merged[key] = val
    return PipelineConfig(**merged)


@dataclass
class PipelineResult:
    """Objects produced by a run, for callers that skip the filesystem."""

    state: RegressionState
    di: det.DifferenceImage
    change_map: det.ChangeMap
    report: det.EvalReport | None
    out_dir: Path


def _load_truth(path: str, shape: tuple[int, int], channels: int) -> det.ChangeMap:
    raster = load_image(path, channels=channels)
    if (raster.height, raster.width) != shape:
        raise ValueError(f"truth mask shape {(raster.height, raster.width)} "
                         f"does not match images {shape}")
    return det.ChangeMap((raster.data[:, :, 0] > 0.5).astype(np.uint8))


def _destandardized_mean_image(z: np.ndarray, feats_mu: np.ndarray, feats_sd: np.ndarray,
                               spmap, channels: int) -> np.ndarray:
    planes = []
    for ch in range(channels):
        col = 3 * ch
        vals = z[:, col] * (feats_sd[col] if feats_sd[col] > 0 else 1.0) + feats_mu[col]
        planes.append(np.clip(vals, 0.0, 1.0)[spmap.labels])
    img = np.stack(planes, axis=2)
    return img[:, :, 0] if channels == 1 else img


def run_pipeline(cfg: PipelineConfig, pre: ImageRaster | None = None,
                 post: ImageRaster | None = None,
                 truth: det.ChangeMap | None = None) -> PipelineResult:
    """Run detection end to end and write the output files.

    Rasters can be passed directly (the paths in cfg are then ignored), which
    the synthetic experiments use to avoid quantization. Writes into cfg.out:
    z.png, di.png, di.gspm, cm.png, and metrics.json + sweep.csv when a truth
    mask is available, plus baseline outputs when requested.
    """
    if pre is None:
        pre = load_image(cfg.pre, channels=cfg.channels)
    if post is None:
        post = load_image(cfg.post, channels=cfg.channels)
    if pre.data.shape[:2] != post.data.shape[:2]:
        raise ValueError("pre and post rasters must share height and width")
    if truth is None and cfg.truth:
        truth = _load_truth(cfg.truth, pre.data.shape[:2], cfg.channels)

    if cfg.direction == "backward":
        pre, post = post, pre

    seg_src = pre if cfg.seg_on == "pre" else post
    spmap = segment_superpixels(seg_src, cfg.n_superpixels, method=cfg.seg_method,
                                seed=cfg.seed)
    x_raw = extract_features(pre, spmap, standardize=False)
    y_raw = extract_features(post, spmap, standardize=False)

    def standardized(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        mu = raw.mean(axis=0)
        sd = raw.std(axis=0)
        out = raw - mu
        keep = sd > 0
        out[:, keep] /= sd[keep]
        out[:, ~keep] = 0.0
        return out, mu, sd

    x, _, _ = standardized(x_raw)
    y, y_mu, y_sd = standardized(y_raw)

    graph_pre = build_graph(x, k=cfg.k, mode=cfg.graph_mode)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    trace_path = out_dir / "trace.csv" if cfg.trace else None
    state = solve_decomposition(y, graph_pre, cfg.solver_config(), trace_path=trace_path)

    di = det.difference_image(state.delta, spmap)
    change_map = det.segment_threshold(di, method=cfg.di_method, seed=cfg.seed)

    save_png(out_dir / "z.png",
             _destandardized_mean_image(state.z, y_mu, y_sd, spmap, post.channels))
    save_png(out_dir / "di.png", di.per_pixel)
    write_gspm(out_dir / "di.gspm", di.per_pixel)
    save_png(out_dir / "cm.png", change_map.labels)

    report = None
    if truth is not None:
        report = det.evaluate(change_map, truth, scores=di)
        (out_dir / "metrics.json").write_text(
            json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
        if report.aur is not None:
            write_sweep_csv(out_dir / "sweep.csv",
                            det.roc_pr_sweep(di.per_pixel, truth.labels))

    if cfg.run_vdf:
        graph_post = build_graph(y, k=cfg.k, mode=cfg.graph_mode)
        vdf = det.vdf_difference(y, graph_pre, graph_post, spmap, shift="laplacian")
        save_png(out_dir / "vdf_di.png", vdf.per_pixel)
        write_gspm(out_dir / "vdf_di.gspm", vdf.per_pixel)
        if truth is not None:
            vdf_cm = det.segment_threshold(vdf, method=cfg.di_method, seed=cfg.seed)
            vdf_report = det.evaluate(vdf_cm, truth, scores=vdf)
            (out_dir / "vdf_metrics.json").write_text(
                json.dumps(vdf_report.to_dict(), sort_keys=True, indent=2) + "\n")

    if cfg.run_spectral_projection:
        basis = eigendecompose(graph_pre.laplacian, budget=cfg.eigen_budget)
        k_c = cfg.kc if cfg.kc is not None else (graph_pre.n + 1) // 2
        _, delta_sp = spectral_projection_regression(basis, y, k_c)
        sp_di = det.difference_image(delta_sp, spmap)
        save_png(out_dir / "projection_di.png", sp_di.per_pixel)
        write_gspm(out_dir / "projection_di.gspm", sp_di.per_pixel)
        norms, _ = energy_profile(basis, y)
        write_energy_csv(out_dir / "energy.csv", basis.eigenvalues, norms)
        if truth is not None:
            sp_cm = det.segment_threshold(sp_di, method=cfg.di_method, seed=cfg.seed)
            sp_report = det.evaluate(sp_cm, truth, scores=sp_di)
            (out_dir / "projection_metrics.json").write_text(
                json.dumps(sp_report.to_dict(), sort_keys=True, indent=2) + "\n")

    return PipelineResult(state=state, di=di, change_map=change_map, report=report,
                          out_dir=out_dir)
