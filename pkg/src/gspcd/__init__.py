"""Graph-spectral change detection for heterogeneous image pairs."""

from .detect import (ChangeMap, DifferenceImage, EvalReport, difference_image,
                     evaluate, otsu_threshold, roc_pr_sweep, segment_threshold,
                     vdf_difference)
from .graph import (GraphOperators, SinkhornError, SparseAffinity,
                    build_adaptive_affinity, build_graph, build_kfn_affinity,
                    laplacian_from_affinity, pairwise_sq_distances,
                    sinkhorn_symmetrize)
from .imaging import (ImageRaster, SuperpixelMap, extract_features, load_image,
                      reproject, save_png, save_raster, segment_superpixels)
from .pipeline import (PipelineConfig, PipelineResult, build_config,
                       parse_config_file, run_pipeline)
from .regression import (RegressionState, SolverConfig, build_penalty,
                         factor_system, prox_rows, solve_decomposition, update_z)
from .spectral import (FilterSpec, SpectralBasis, apply_poly_filter,
                       design_filter, eigendecompose, energy_profile, gft,
                       ideal_split, igft, quadratic_tv_edgewise,
                       spectral_projection_regression, total_variation)
from .synthetic import MODALITY_MAPS, SyntheticSpec, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "ChangeMap", "DifferenceImage", "EvalReport", "FilterSpec", "GraphOperators",
    "ImageRaster", "MODALITY_MAPS", "PipelineConfig", "PipelineResult",
    "RegressionState", "SinkhornError", "SolverConfig", "SparseAffinity",
    "SpectralBasis", "SuperpixelMap", "SyntheticSpec", "apply_poly_filter",
    "build_adaptive_affinity", "build_config", "build_graph", "build_kfn_affinity",
    "build_penalty", "design_filter", "difference_image", "eigendecompose",
    "energy_profile", "evaluate", "extract_features", "factor_system",
    "generate_synthetic", "gft", "ideal_split", "igft", "laplacian_from_affinity",
    "load_image", "otsu_threshold", "pairwise_sq_distances", "parse_config_file",
    "prox_rows", "quadratic_tv_edgewise", "reproject", "roc_pr_sweep",
    "run_pipeline", "save_png", "save_raster", "segment_superpixels",
    "segment_threshold", "sinkhorn_symmetrize", "solve_decomposition",
    "spectral_projection_regression", "total_variation", "update_z",
    "vdf_difference",
]
