"""Command-line interface.

Subcommands:
    detect    run change detection on an image pair
    synth     generate a synthetic heterogeneous pair with ground truth
    spectrum  export a spectral energy profile (lambda, norm CSV)
    graph     export an affinity matrix as coordinate-list text

Exit codes: 0 success, 1 unreadable input, 2 invalid configuration,
3 solver did not converge and --strict was given.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .formats import write_affinity_coo, write_energy_csv
from .graph import (SinkhornError, build_adaptive_affinity, build_graph,
                    build_kfn_affinity, pairwise_sq_distances, sinkhorn_symmetrize)
from .imaging import extract_features, load_image, save_png, save_raster, segment_superpixels
from .pipeline import build_config, parse_config_file, run_pipeline
from .spectral import eigendecompose, energy_profile
from .synthetic import MODALITY_MAPS, SyntheticSpec, generate_synthetic

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3


def _add_detect_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("detect", help="run change detection on an image pair")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--pre", help="pre-event image (.png or .gspm)")
    p.add_argument("--post", help="post-event image (.png or .gspm)")
    p.add_argument("--truth", help="ground-truth change mask (optional)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--channels", type=int, help="bands in .gspm inputs (default 1)")
    p.add_argument("--n-superpixels", type=int, help="target region count (default 2000)")
    p.add_argument("--seg-method", choices=["grid", "slic"], help="tessellation method")
    p.add_argument("--seg-on", choices=["pre", "post"], help="image the tessellation comes from")
    p.add_argument("--seed", type=int, help="segmentation seed")
    p.add_argument("--k", type=int, help="graph neighbourhood size (default 30)")
    p.add_argument("--graph-mode", choices=["l2", "entropy"], help="affinity weighting")
    p.add_argument("--alpha", type=float, help="sparsity weight (default 0.05)")
    p.add_argument("--mu", type=float, help="constraint penalty parameter (default 0.1)")
    p.add_argument("--xi0", type=float, help="relative-step stopping threshold")
    p.add_argument("--max-iter", type=int, help="solver iteration cap (default 100)")
    p.add_argument("--prox", choices=["l21", "l20", "topk"], help="row-sparsity prox")
    p.add_argument("--tau", type=int, help="row budget for --prox topk")
    p.add_argument("--filter-coeffs", help="penalty coefficients h1,h2,... (default 1,1,1)")
    p.add_argument("--linear-solver", choices=["direct", "iterative"])
    p.add_argument("--l20-rule", choices=["derived", "literal"])
    p.add_argument("--di-method", choices=["otsu", "kmeans2"], help="change-map thresholding")
    p.add_argument("--direction", choices=["forward", "backward"], help="regression direction")
    p.add_argument("--kc", type=int, help="cutoff index for the projection baseline")
    p.add_argument("--eigen-budget", type=int, help="dense eigendecomposition size cap")
    p.add_argument("--run-vdf", action="store_const", const=True, default=None,
                   help="also run the vertex-domain filtering baseline")
    p.add_argument("--run-spectral-projection", action="store_const", const=True, default=None,
                   help="also run the ideal-projection baseline")
    p.add_argument("--strict", action="store_const", const=True, default=None,
                   help="exit 3 if the solver does not converge")
    p.add_argument("--trace", action="store_const", const=True, default=None,
                   help="write per-iteration trace.csv")


def _cmd_detect(args: argparse.Namespace) -> int:
    cli_values = {key: val for key, val in vars(args).items()
                  if key not in ("command", "config") and val is not None}
    if "filter_coeffs" in cli_values:
        cli_values["filter_coeffs"] = tuple(
            float(v) for v in str(cli_values["filter_coeffs"]).replace(",", " ").split())
    try:
        file_values = parse_config_file(args.config) if args.config else {}
        cfg = build_config(file_values, cli_values)
        if not cfg.pre or not cfg.post or not cfg.out:
            raise ValueError("--pre, --post, and --out are required (flag or config file)")
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        result = run_pipeline(cfg)
    except (OSError, ValueError, SinkhornError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if cfg.strict and not result.state.converged:
        print("error: solver hit the iteration cap without converging", file=sys.stderr)
        return EXIT_NONCONVERGED
    if result.report is not None:
        print(f"oa={result.report.oa:.4f} kappa={result.report.kappa:.4f} "
              f"f1={result.report.f1:.4f}" +
              (f" aur={result.report.aur:.4f}" if result.report.aur is not None else "") +
              (f" aup={result.report.aup:.4f}" if result.report.aup is not None else ""))
    print(f"wrote {result.out_dir}")
    return EXIT_OK


def _add_synth_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("synth", help="generate a synthetic pair with ground truth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--n-regions", type=int, default=128)
    p.add_argument("--change-fraction", type=float, default=0.10)
    p.add_argument("--noise-sigma", type=float, default=0.02)
    p.add_argument("--g-pre", choices=sorted(MODALITY_MAPS), default="negexp")
    p.add_argument("--g-post", choices=sorted(MODALITY_MAPS), default="log")
    p.add_argument("--seed", type=int, default=0)


def _cmd_synth(args: argparse.Namespace) -> int:
    try:
        spec = SyntheticSpec(height=args.height, width=args.width,
                             n_regions=args.n_regions,
                             change_fraction=args.change_fraction,
                             noise_sigma=args.noise_sigma,
                             g_pre=args.g_pre, g_post=args.g_post, seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    pre, post, truth = generate_synthetic(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_raster(out / "pre.gspm", pre)
    save_raster(out / "post.gspm", post)
    save_png(out / "pre.png", pre.data)
    save_png(out / "post.png", post.data)
    save_png(out / "truth.png", truth.labels)
    print(f"wrote {out} (changed fraction {truth.labels.mean():.4f})")
    return EXIT_OK


def _add_spectrum_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("spectrum", help="export a spectral energy profile CSV")
    p.add_argument("--image", required=True, help="image whose features build the graph")
    p.add_argument("--signal-image", help="optional second image; its features are the signal")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--n-superpixels", type=int, default=1000)
    p.add_argument("--seg-method", choices=["grid", "slic"], default="grid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--graph-mode", choices=["l2", "entropy"], default="l2")
    p.add_argument("--eigen-budget", type=int, default=6000)


def _cmd_spectrum(args: argparse.Namespace) -> int:
    try:
        img = load_image(args.image, channels=args.channels)
        spmap = segment_superpixels(img, args.n_superpixels, method=args.seg_method,
                                    seed=args.seed)
        feats = extract_features(img, spmap, standardize=True)
        if args.signal_image:
            sig_img = load_image(args.signal_image, channels=args.channels)
            signal = extract_features(sig_img, spmap, standardize=True)
        else:
            signal = feats
        graph = build_graph(feats, k=args.k, mode=args.graph_mode)
        basis = eigendecompose(graph.laplacian, budget=args.eigen_budget)
        norms, weighted = energy_profile(basis, signal)
    except (OSError, ValueError, SinkhornError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    write_energy_csv(args.out, basis.eigenvalues, norms)
    print(f"wrote {args.out} (weighted energy {weighted:.6g})")
    return EXIT_OK


def _add_graph_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("graph", help="export an affinity matrix as i j w text")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True, help="output text path")
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--n-superpixels", type=int, default=1000)
    p.add_argument("--seg-method", choices=["grid", "slic"], default="grid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--graph-mode", choices=["l2", "entropy"], default="l2")
    p.add_argument("--kfn", action="store_true", help="export the farthest-neighbour graph")
    p.add_argument("--balanced", action="store_true",
                   help="balance to doubly stochastic before exporting")


def _cmd_graph(args: argparse.Namespace) -> int:
    try:
        img = load_image(args.image, channels=args.channels)
        spmap = segment_superpixels(img, args.n_superpixels, method=args.seg_method,
                                    seed=args.seed)
        feats = extract_features(img, spmap, standardize=True)
        dist = pairwise_sq_distances(feats)
        if args.kfn:
            aff = build_kfn_affinity(dist, k=args.k)
        else:
            aff = build_adaptive_affinity(dist, k=args.k, mode=args.graph_mode)
        if args.balanced:
            aff = sinkhorn_symmetrize(aff)
    except (OSError, ValueError, SinkhornError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    write_affinity_coo(args.out, aff.weights)
    print(f"wrote {args.out} ({aff.weights.nnz} entries)")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="gspcd",
                                     description="Graph-spectral change detection")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_detect_parser(sub)
    _add_synth_parser(sub)
    _add_spectrum_parser(sub)
    _add_graph_parser(sub)
    args = parser.parse_args(argv)
    if args.command == "detect":
        return _cmd_detect(args)
    if args.command == "synth":
        return _cmd_synth(args)
    if args.command == "spectrum":
        return _cmd_spectrum(args)
    return _cmd_graph(args)


if __name__ == "__main__":
    raise SystemExit(main())
