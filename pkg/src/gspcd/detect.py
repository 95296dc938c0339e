"""Difference images, binary change maps, and detection metrics.

The regression residual Delta lives on graph vertices; its row norms form the
per-vertex difference signal, reprojected to pixels for thresholding and
scoring. A direct vertex-domain baseline (difference of shift operators
applied to the same features) is included for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import GraphOperators
from .imaging import SuperpixelMap, reproject


@dataclass
class DifferenceImage:
    """Per-vertex change magnitudes and their pixel-domain reprojection.

    Keeps the tessellation used for the reprojection so vertex-level
    operations (e.g. clustering) can map back to pixels.
    """

    per_vertex: np.ndarray
    per_pixel: np.ndarray
    spmap: SuperpixelMap


@dataclass
class ChangeMap:
    """Binary per-pixel labels (1 = changed); degenerate flags an
    all-unchanged fallback produced from a constant difference image."""

    labels: np.ndarray
    degenerate: bool = False

    def __post_init__(self) -> None:
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ValueError("labels must be 2-D")
        if not np.isin(lab, (0, 1)).all():
            raise ValueError("labels must be binary")
        self.labels = lab.astype(np.uint8)


@dataclass
class EvalReport:
    """Confusion counts and summary scores; aur/aup are None when the truth
    has only one class and the ranking metrics are undefined."""

    tp: int
    fp: int
    tn: int
    fn: int
    oa: float
    kappa: float
    f1: float
    aur: float | None = None
    aup: float | None = None

    def to_dict(self) -> dict:
        out = {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
               "oa": self.oa, "kappa": self.kappa, "f1": self.f1}
        if self.aur is not None:
            out["aur"] = self.aur
        if self.aup is not None:
            out["aup"] = self.aup
        return out


def difference_image(delta: np.ndarray, spmap: SuperpixelMap) -> DifferenceImage:
    """Row norms of Delta broadcast back to pixels."""
    arr = np.asarray(delta, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("delta must be an (N, M) matrix")
    per_vertex = np.linalg.norm(arr, axis=1)
    return DifferenceImage(per_vertex=per_vertex,
                           per_pixel=reproject(per_vertex, spmap), spmap=spmap)


def vdf_difference(y: np.ndarray, graph_pre: GraphOperators, graph_post: GraphOperators,
                   spmap: SuperpixelMap, shift: str = "laplacian") -> DifferenceImage:
    """Vertex-domain baseline: row norms of (S_pre - S_post) Y.

    shift selects the operator pair: "laplacian" uses I - W of each graph,
    "average" uses the balanced affinities themselves. With L = I - W the two
    differ only in sign, so their row norms coincide.
    """
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("Y must be an (N, M) matrix")
    if graph_pre.n != graph_post.n or graph_pre.n != arr.shape[0]:
        raise ValueError("graphs and features must share the vertex set")
    if shift == "laplacian":
        diff = graph_pre.laplacian @ arr - graph_post.laplacian @ arr
    elif shift == "average":
        diff = graph_pre.affinity.weights @ arr - graph_post.affinity.weights @ arr
    else:
        raise ValueError(f"unknown shift {shift!r}")
    per_vertex = np.linalg.norm(diff, axis=1)
    return DifferenceImage(per_vertex=per_vertex,
                           per_pixel=reproject(per_vertex, spmap), spmap=spmap)


# ---------------------------------------------------------------------------
# Thresholding

def otsu_threshold(counts: np.ndarray) -> int:
    """Between-class-variance argmax over the 255 cuts of a 256-bin histogram.

    Computed in exact integer arithmetic: cut t maximizes
    (s0 c1 - s1 c0)^2 / (c0 c1) where c/s are class counts and index sums.
    Ties resolve to the lowest cut. Bins [0, t) are "unchanged".
    """
    c = [int(v) for v in counts]
    if len(c) != 256:
        raise ValueError("expected a 256-bin histogram")
    total = sum(c)
    if total == 0:
        raise ValueError("histogram is empty")
    s_total = sum(b * cb for b, cb in enumerate(c))
    best_t = 1
    best_num, best_den = -1, 1  # value = num / den, exact rational compare
    c0 = 0
    s0 = 0
    for t in range(1, 256):
        c0 += c[t - 1]
        s0 += (t - 1) * c[t - 1]
        c1 = total - c0
        s1 = s_total - s0
        if c0 == 0 or c1 == 0:
            num, den = 0, 1
        else:
            num, den = (s0 * c1 - s1 * c0) ** 2, c0 * c1
        if num * best_den > best_num * den:
            best_num, best_den, best_t = num, den, t
    return best_t


def _histogram_256(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    bins = np.minimum((values * 256.0).astype(np.int64), 255)
    counts = np.bincount(bins.ravel(), minlength=256)
    return bins, counts


def segment_threshold(di: DifferenceImage, method: str = "otsu", seed: int = 0) -> ChangeMap:
    """Binarize a difference image into a change map.

    method="otsu" min-max normalizes the pixel image, histograms it into 256
    bins, and cuts at the exact between-class-variance argmax.
    method="kmeans2" runs 1-D two-means on the per-vertex values with
    deterministic min/max initialization (at most 100 sweeps; ties go to the
    lower center; the higher-mean cluster is "changed"), then reprojects.
    A constant difference image yields an all-unchanged map with the
    degenerate flag set. The seed argument is accepted for interface
    stability; both methods are deterministic without it.
    """
    px = np.asarray(di.per_pixel, dtype=np.float64)
    if method == "otsu":
        lo, hi = px.min(), px.max()
        if hi <= lo:
            return ChangeMap(np.zeros(px.shape, dtype=np.uint8), degenerate=True)
        norm = (px - lo) / (hi - lo)
        bins, counts = _histogram_256(norm)
        t = otsu_threshold(counts)
        return ChangeMap((bins >= t).astype(np.uint8))
    if method == "kmeans2":
        v = np.asarray(di.per_vertex, dtype=np.float64)
        lo, hi = v.min(), v.max()
        if hi <= lo:
            return ChangeMap(np.zeros(px.shape, dtype=np.uint8), degenerate=True)
        c_lo, c_hi = lo, hi
        assign = None
        for _ in range(100):
            d_lo = np.abs(v - c_lo)
            d_hi = np.abs(v - c_hi)
            new_assign = d_hi < d_lo  # ties stay with the lower center
            if assign is not None and np.array_equal(new_assign, assign):
                break
            assign = new_assign
            if assign.any():
                c_hi = v[assign].mean()
            if (~assign).any():
                c_lo = v[~assign].mean()
        changed_vertices = assign if c_hi >= c_lo else ~assign
        pixels = reproject(changed_vertices.astype(np.float64), di.spmap)
        return ChangeMap((pixels > 0.5).astype(np.uint8))
    raise ValueError(f"unknown segmentation method {method!r}")


# ---------------------------------------------------------------------------
# Metrics

def roc_pr_sweep(scores: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Threshold sweep over distinct score values, descending.

    Returns an (n_thresholds, 5) array of rows
    (threshold, fpr, tpr, precision, recall), where a pixel is predicted
    positive when score >= threshold. Requires both classes in the truth.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    t = np.asarray(truth).ravel().astype(bool)
    pos = int(t.sum())
    neg = t.size - pos
    if pos == 0 or neg == 0:
        raise ValueError("sweep needs both classes present in the truth")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    t_sorted = t[order]
    cum_tp = np.cumsum(t_sorted)
    cum_fp = np.cumsum(~t_sorted)
    # Last index of each run of equal scores = inclusive state at threshold.
    boundary = np.nonzero(np.diff(s_sorted))[0]
    idx = np.concatenate([boundary, [s.size - 1]])
    thresholds = s_sorted[idx]
    tp = cum_tp[idx].astype(float)
    fp = cum_fp[idx].astype(float)
    tpr = tp / pos
    fpr = fp / neg
    precision = tp / (tp + fp)
    return np.stack([thresholds, fpr, tpr, precision, tpr], axis=1)


def _area_under_roc(sweep: np.ndarray) -> float:
    fpr = np.concatenate([[0.0], sweep[:, 1]])
    tpr = np.concatenate([[0.0], sweep[:, 2]])
    return float(np.trapezoid(tpr, fpr))


def _area_under_pr(sweep: np.ndarray) -> float:
    recall = np.concatenate([[0.0], sweep[:, 4]])
    precision = np.concatenate([[sweep[0, 3]], sweep[:, 3]])
    return float(np.trapezoid(precision, recall))


def evaluate(change_map: ChangeMap, truth: ChangeMap,
             scores: DifferenceImage | np.ndarray | None = None) -> EvalReport:
    """Confusion counts and summary metrics against a ground-truth map.

    kappa follows the chance-corrected form (oa - p_e) / (1 - p_e) with
    p_e = [(tp+fp)(tp+fn) + (fn+tn)(fp+tn)] / n^2, defined as 1 when p_e = 1.
    f1 = 2 tp / (2 tp + fp + fn), defined as 1 when its denominator is 0
    (nothing to detect, nothing predicted). When scores are given and the
    truth contains both classes, aur/aup are trapezoidal areas under the
    ROC and precision-recall sweeps.
    """
    pred = change_map.labels.astype(bool)
    ref = truth.labels.astype(bool)
    if pred.shape != ref.shape:
        raise ValueError("change map and truth shapes differ")
    tp = int(np.sum(pred & ref))
    fp = int(np.sum(pred & ~ref))
    tn = int(np.sum(~pred & ~ref))
    fn = int(np.sum(~pred & ref))
    n = tp + fp + tn + fn
    oa = (tp + tn) / n
    pe = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (n * n)
    kappa = 1.0 if pe == 1.0 else (oa - pe) / (1.0 - pe)
    f1 = 1.0 if (2 * tp + fp + fn) == 0 else 2 * tp / (2 * tp + fp + fn)

    aur = aup = None
    pos, neg = tp + fn, fp + tn
    if scores is not None and pos > 0 and neg > 0:
        score_arr = scores.per_pixel if isinstance(scores, DifferenceImage) else scores
        sweep = roc_pr_sweep(score_arr, ref)
        aur = _area_under_roc(sweep)
        aup = _area_under_pr(sweep)
    return EvalReport(tp=tp, fp=fp, tn=tn, fn=fn, oa=float(oa), kappa=float(kappa),
                      f1=float(f1), aur=aur, aup=aup)
