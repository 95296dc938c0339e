"""End-to-end acceptance checks.

Ten checks covering the solver oracle, transform fidelity, balancing,
the low-pass premise, end-to-end recovery on the reference synthetic
pair, the penalty-order and baseline orderings, the runtime envelope,
the threshold oracle, and CLI determinism.  Each test prints one
PASS/FAIL line with the measured quantity and its bound so a full run
reads as a ten-line scorecard.  Expensive artifacts (the reference
pair, the ten-seed study) are module fixtures shared across checks.
"""

import json
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import minimize_scalar
from threadpoolctl import threadpool_limits

from gspcd.cli import EXIT_OK, main
from gspcd.detect import (difference_image, evaluate, otsu_threshold,
                          segment_threshold, vdf_difference)
from gspcd.graph import (build_adaptive_affinity, build_graph,
                         pairwise_sq_distances, sinkhorn_symmetrize)
from gspcd.imaging import extract_features, segment_superpixels
from gspcd.pipeline import PipelineConfig, run_pipeline
from gspcd.regression import SolverConfig, prox_rows, solve_decomposition
from gspcd.spectral import eigendecompose, energy_profile, gft, igft, total_variation
from gspcd.synthetic import SyntheticSpec, generate_synthetic


SCORECARD = []


def _scorecard(index, ok, detail):
    line = f"[acceptance {index:2d}/10] {'PASS' if ok else 'FAIL'} {detail}"
    SCORECARD.append(line)
    print(line)  # conftest replays the collected lines after the run
    assert ok, line


def _standardize(a):
    sd = a.std(axis=0)
    return (a - a.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def _decomposition_report(pre, post, truth, coeffs, n_superpixels, k=30):
    spmap = segment_superpixels(pre, n_superpixels, method="grid")
    x = _standardize(extract_features(pre, spmap))
    y = _standardize(extract_features(post, spmap))
    graph = build_graph(x, k=k)
    state = solve_decomposition(y, graph, SolverConfig(filter_coeffs=tuple(coeffs)))
    di = difference_image(state.delta, spmap)
    return evaluate(segment_threshold(di, "otsu"), truth, scores=di)


def _vdf_report(pre, post, truth, n_superpixels, k=30):
    spmap = segment_superpixels(pre, n_superpixels, method="grid")
    x = _standardize(extract_features(pre, spmap))
    y = _standardize(extract_features(post, spmap))
    di = vdf_difference(y, build_graph(x, k=k), build_graph(y, k=k), spmap,
                        shift="laplacian")
    return evaluate(segment_threshold(di, "otsu"), truth, scores=di)


@pytest.fixture(scope="module")
def reference_pair():
    """Reference synthetic pair: seed 42, 256x256, defaults throughout."""
    return generate_synthetic(SyntheticSpec(seed=42))


@pytest.fixture(scope="module")
def reference_run(reference_pair, tmp_path_factory):
    pre, post, truth = reference_pair
    out = tmp_path_factory.mktemp("reference_run")
    start = time.perf_counter()
    result = run_pipeline(PipelineConfig(out=str(out)), pre=pre, post=post,
                          truth=truth)
    elapsed = time.perf_counter() - start
    return result, elapsed


@pytest.fixture(scope="module")
def ten_seed_study():
    """AUP columns (third-order, first-order, vertex-domain) over 10 seeds.

    Runs at reduced scale (128x128, 48 cells, 500 superpixels) so thirty
    solves stay cheap; the orderings under test are scale-free.
    """
    rows = []
    for seed in range(10):
        spec = SyntheticSpec(height=128, width=128, n_regions=48,
                             change_fraction=0.10, noise_sigma=0.02, seed=seed)
        pre, post, truth = generate_synthetic(spec)
        third = _decomposition_report(pre, post, truth, (1.0, 1.0, 1.0), 500)
        first = _decomposition_report(pre, post, truth, (1.0,), 500)
        vdf = _vdf_report(pre, post, truth, 500)
        rows.append((third.aup, first.aup, vdf.aup))
    return np.array(rows)


def test_row_sparsity_prox_matches_numeric_minimizer():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        dim = int(rng.integers(1, 9))
        q = rng.uniform(-5.0, 5.0, dim)
        alpha = float(rng.uniform(0.01, 1.0))
        mu = float(rng.uniform(0.05, 1.0))
        norm = np.linalg.norm(q)
        res = minimize_scalar(lambda t: alpha * t + 0.5 * mu * (t - norm) ** 2,
                              bounds=(0.0, norm + 1.0), method="bounded",
                              options={"xatol": 1e-12})
        expected = (res.x / norm) * q if norm > 0 else np.zeros_like(q)
        got = prox_rows(q[None, :], "l21", alpha, mu)[0]
        worst = max(worst, float(np.abs(got - expected).max()))
    elapsed = time.perf_counter() - start
    _scorecard(1, worst <= 1e-4 and elapsed < 5.0,
               f"row prox vs 1-D numeric minimizer over 200 rows: "
               f"max entry error {worst:.2e} <= 1e-4 ({elapsed:.1f}s < 5s)")


def test_graph_fourier_round_trip_and_energy_identity():
    worst_rt, worst_pars, worst_resid, worst_tv = 0.0, 0.0, 0.0, 0.0
    for seed in (0, 1, 2):
        rng = np.random.default_rng(seed)
        graph = build_graph(rng.standard_normal((200, 3)), k=8)
        basis = eigendecompose(graph.laplacian)
        lap = graph.laplacian_dense()
        worst_resid = max(worst_resid, float(np.abs(
            lap @ basis.eigenvectors
            - basis.eigenvectors * basis.eigenvalues).max()))
        f = rng.standard_normal((200, 2))
        f_hat = gft(basis, f)
        worst_rt = max(worst_rt, float(np.abs(igft(basis, f_hat) - f).max()))
        worst_pars = max(worst_pars, abs(float(np.sum(f ** 2) - np.sum(f_hat ** 2))))
        spectral_tv = float(np.sum(basis.eigenvalues[:, None] * f_hat ** 2))
        worst_tv = max(worst_tv, abs(
            total_variation(graph, f, form="quadratic") - spectral_tv))
    ok = (worst_rt <= 1e-8 and worst_pars <= 1e-9
          and worst_resid <= 1e-6 and worst_tv <= 1e-8)
    _scorecard(2, ok,
               f"transform fidelity on 3 random 200-vertex graphs: round-trip "
               f"{worst_rt:.1e} <= 1e-8, Parseval {worst_pars:.1e} <= 1e-9, "
               f"eigen residual {worst_resid:.1e} <= 1e-6, "
               f"energy identity {worst_tv:.1e} <= 1e-8")


def test_sinkhorn_balances_adaptive_affinity_at_scale(reference_pair):
    pre, _, _ = reference_pair
    spmap = segment_superpixels(pre, 2000, method="grid")
    feats = _standardize(extract_features(pre, spmap))
    affinity = build_adaptive_affinity(pairwise_sq_distances(feats), k=30)
    balanced = sinkhorn_symmetrize(affinity)  # raises if 500 sweeps don't land
    weights = balanced.weights
    row_dev = float(np.abs(np.asarray(weights.sum(axis=1)).ravel() - 1.0).max())
    col_dev = float(np.abs(np.asarray(weights.sum(axis=0)).ravel() - 1.0).max())
    worst = max(row_dev, col_dev)
    _scorecard(3, worst <= 1e-6,
               f"doubly stochastic balancing at N=2000, k=30: "
               f"worst row/col sum deviation {worst:.1e} <= 1e-6")


def test_pre_event_features_are_low_pass_on_own_graph():
    start = time.perf_counter()
    pre, _, _ = generate_synthetic(SyntheticSpec(seed=42, noise_sigma=0.02))
    spmap = segment_superpixels(pre, 1000, method="grid")
    feats = _standardize(extract_features(pre, spmap))
    graph = build_graph(feats, k=30)
    basis = eigendecompose(graph.laplacian)
    norms, _ = energy_profile(basis, feats)
    energy = norms ** 2
    frac = float(energy[energy.size // 2:].sum() / energy.sum())
    elapsed = time.perf_counter() - start
    _scorecard(4, frac >= 0.9 and elapsed < 60.0,
               f"pre-event features on their own graph: energy fraction in the "
               f"lowest-frequency half {frac:.4f} >= 0.9 ({elapsed:.1f}s < 60s)")


def test_reference_pair_recovery_through_pipeline(reference_run):
    result, elapsed = reference_run
    report = result.report
    ok = report.aur >= 0.95 and report.f1 >= 0.85 and elapsed < 120.0
    _scorecard(5, ok,
               f"reference pair end to end: AUR {report.aur:.4f} >= 0.95, "
               f"F1 {report.f1:.4f} >= 0.85 ({elapsed:.1f}s < 120s)")


def test_third_order_penalty_improves_mean_precision_area(ten_seed_study):
    mean_third = float(ten_seed_study[:, 0].mean())
    mean_first = float(ten_seed_study[:, 1].mean())
    _scorecard(6, mean_third >= mean_first,
               f"penalty order over 10 seeds: mean AUP third-order "
               f"{mean_third:.5f} >= first-order {mean_first:.5f} "
               f"(delta {mean_third - mean_first:+.5f})")


def test_vertex_domain_baseline_and_refinement_ordering(reference_pair,
                                                        ten_seed_study):
    pre, post, truth = reference_pair
    vdf_ref = _vdf_report(pre, post, truth, 2000)
    mean_sda = float(ten_seed_study[:, 0].mean())
    mean_vdf = float(ten_seed_study[:, 2].mean())
    ok = vdf_ref.aur >= 0.9 and mean_sda >= mean_vdf
    _scorecard(7, ok,
               f"vertex-domain baseline: reference AUR {vdf_ref.aur:.4f} >= 0.9; "
               f"decomposition mean AUP {mean_sda:.5f} >= baseline {mean_vdf:.5f}")


def test_direct_solver_runtime_at_five_thousand_vertices():
    rng = np.random.default_rng(0)
    feats = rng.standard_normal((5000, 3))
    y = rng.standard_normal((5000, 3))
    with threadpool_limits(limits=1):
        graph = build_graph(feats, k=30)
        start = time.perf_counter()
        state = solve_decomposition(y, graph, SolverConfig())
        elapsed = time.perf_counter() - start
    _scorecard(8, elapsed <= 60.0,
               f"direct solve at N=5000, M=3, single-threaded: {elapsed:.1f}s "
               f"<= 60s ({state.iterations} iterations, "
               f"converged={state.converged})")


def _exhaustive_otsu(counts):
    best_t, best_val = 1, Fraction(-1)
    total = sum(counts)
    moment = sum(i * c for i, c in enumerate(counts))
    for t in range(1, 256):
        c0 = sum(counts[:t])
        c1 = total - c0
        if c0 == 0 or c1 == 0:
            val = Fraction(0)
        else:
            m0 = Fraction(sum(i * c for i, c in enumerate(counts[:t])), c0)
            m1 = Fraction(moment - sum(i * c for i, c in enumerate(counts[:t])), c1)
            val = c0 * c1 * (m0 - m1) ** 2
        if val > best_val:
            best_t, best_val = t, val
    return best_t


def test_otsu_matches_exhaustive_split_search():
    rng = np.random.default_rng(9)
    mismatches = 0
    for trial in range(100):
        counts = rng.integers(0, 1000, size=256)
        if trial % 3 == 0:  # sparse histograms stress tie handling
            counts[rng.random(256) < 0.5] = 0
        counts = [int(c) for c in counts]
        if sum(counts) == 0:
            counts[0] = 1
        if otsu_threshold(counts) != _exhaustive_otsu(counts):
            mismatches += 1
    _scorecard(9, mismatches == 0,
               f"threshold search vs exhaustive 255-cut argmax on 100 random "
               f"histograms: {mismatches} mismatches")


def test_repeated_cli_invocations_are_byte_identical(tmp_path):
    synth = tmp_path / "synth"
    assert main(["synth", "--out", str(synth), "--height", "64", "--width", "64",
                 "--n-regions", "24", "--change-fraction", "0.12",
                 "--seed", "1"]) == EXIT_OK
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = main(["detect",
                     "--pre", str(synth / "pre.gspm"),
                     "--post", str(synth / "post.gspm"),
                     "--truth", str(synth / "truth.png"),
                     "--out", str(out),
                     "--n-superpixels", "150", "--k", "10", "--max-iter", "40"])
        assert code == EXIT_OK
        outputs.append(out)
    same_metrics = ((outputs[0] / "metrics.json").read_bytes()
                    == (outputs[1] / "metrics.json").read_bytes())
    same_di = ((outputs[0] / "di.gspm").read_bytes()
               == (outputs[1] / "di.gspm").read_bytes())
    f1 = json.loads((outputs[0] / "metrics.json").read_text())["f1"]
    _scorecard(10, same_metrics and same_di,
               f"two identical detect runs: metrics.json byte-identical "
               f"{same_metrics}, di.gspm byte-identical {same_di} "
               f"(f1 {f1:.4f})")
