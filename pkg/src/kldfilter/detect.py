"""Segmentation of KLD maps into anomalies and weld bands, and scoring."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage, stats

from .synth import SynthConfig, hole_masks

__all__ = [
    "Anomaly",
    "Weld",
    "AnomalyReport",
    "DetectionMetrics",
    "otsu_threshold",
    "adaptive_threshold",
    "label_periodic",
    "segment",
    "score_against_truth",
    "report_text",
    "report_csv",
]

POLICIES = ("otsu", "mean_plus_sigma")


@dataclass(frozen=True)
class Anomaly:
    centroid: tuple[float, float]  # (axial mm, circ deg)
    axial_extent: float
    circ_extent: float
    area_cells: int
    peak_kld: float
    mean_kld: float
    depth_rank: int
    cell: tuple[int, int]  # grid cell holding the centroid


@dataclass(frozen=True)
class Weld:
    center_axial: float
    width: float
    area_cells: int
    peak_kld: float
    mean_kld: float


@dataclass
class AnomalyReport:
    anomalies: list[Anomaly]
    welds: list[Weld]
    threshold_used: float
    policy: str = "otsu"
    shape: tuple[int, int] = (0, 0)
    labels: np.ndarray | None = field(default=None, repr=False)


def otsu_threshold(values) -> float:
    """Exact Otsu threshold over the distinct values; foreground is ``> t``.

    Maximizes the between-class variance over every split of the sorted
    values, so no histogram binning is involved.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    x = x[np.isfinite(x)]
    if x.size == 0:
        return math.inf
    uniq, counts = np.unique(x, return_counts=True)
    if len(uniq) == 1:
        return float(uniq[0])
    # centre first so the cumulative sums stay well conditioned
    shift = uniq.mean()
    u = uniq - shift
    n = counts.sum()
    w0 = np.cumsum(counts)[:-1] / n
    s0 = np.cumsum(counts * u)[:-1] / n
    total = s0[-1] + counts[-1] * u[-1] / n
    w1 = 1.0 - w0
    mu0 = s0 / w0
    mu1 = (total - s0) / w1
    between = w0 * w1 * (mu0 - mu1) ** 2
    return float(uniq[int(np.argmax(between))])


def adaptive_threshold(values, policy: str = "otsu", n_sigma: float = 3.0) -> float:
    x = np.asarray(values, dtype=np.float64)
    x = x[np.isfinite(x)]
    if policy == "otsu":
        return otsu_threshold(x)
    if policy == "mean_plus_sigma":
        return float(x.mean() + n_sigma * x.std()) if x.size else math.inf
    raise ValueError(f"unknown policy {policy!r}")


def label_periodic(mask: np.ndarray, periodic: bool = True) -> tuple[np.ndarray, int]:
    """8-connected labels; with ``periodic`` the last column touches the first.

    Labels are renumbered 1..n in order of first appearance (row-major).
    """
    mask = np.asarray(mask, dtype=bool)
    lab, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        return lab, 0
    if periodic and mask.shape[1] > 1:
        parent = np.arange(n + 1)

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        rows = mask.shape[0]
        left, right = lab[:, 0], lab[:, -1]
        for i in np.nonzero(right)[0]:
            for ii in (i - 1, i, i + 1):
                if 0 <= ii < rows and left[ii]:
                    a, b = find(right[i]), find(left[ii])
                    if a != b:
                        parent[max(a, b)] = min(a, b)
        roots = np.array([find(a) for a in range(n + 1)])
        lab = roots[lab]
    _, first = np.unique(lab.ravel(), return_index=True)
    order = np.unique(lab.ravel())
    order = order[np.argsort(first)]
    order = order[order != 0]
    remap = np.zeros(lab.max() + 1, dtype=np.int64)
    remap[order] = np.arange(1, len(order) + 1)
    return remap[lab], len(order)


def _circ_span(cols: np.ndarray, m: int, periodic: bool) -> tuple[int, int]:
    """(start column, length) of the shortest arc covering ``cols``."""
    occ = np.zeros(m, dtype=bool)
    occ[cols] = True
    if occ.all():
        return 0, m
    if not periodic:
        idx = np.nonzero(occ)[0]
        return int(idx[0]), int(idx[-1] - idx[0] + 1)
    idx = np.nonzero(occ)[0]
    gaps = np.diff(np.concatenate([idx, [idx[0] + m]]))
    g = int(np.argmax(gaps))
    start = int(idx[(g + 1) % len(idx)])
    return start, m - (int(gaps[g]) - 1)


def segment(
    kmap,
    policy: str = "otsu",
    n_sigma: float = 3.0,
    axial_pitch: float | None = None,
    circ_pitch: float | None = None,
    periodic: bool | None = None,
) -> AnomalyReport:
    """Binarize with an adaptive threshold and extract components.

    ``kmap`` is a KldMap, a ScanGrid or a bare array.  A component whose
    columns cover the whole circumference is a weld; the rest are anomalies,
    ranked by peak divergence (ties broken by larger area).
    """
    values, ap, cp, per = _unpack(kmap)
    ap = ap if axial_pitch is None else axial_pitch
    cp = cp if circ_pitch is None else circ_pitch
    per = per if periodic is None else periodic
    if np.isnan(values).any():
        raise ValueError("map contains NaN")
    n, m = values.shape
    th = adaptive_threshold(values, policy, n_sigma)
    mask = values > th
    labels, count = label_periodic(mask, per)
    flat = labels.ravel()
    vals = values.ravel()
    anomalies, welds = [], []
    raw = []
    if count:
        idx_sorted = np.argsort(flat, kind="stable")
        bounds = np.searchsorted(flat[idx_sorted], np.arange(1, count + 2))
    for c in range(1, count + 1):
        cells = idx_sorted[bounds[c - 1] : bounds[c]]
        rows, cols = np.divmod(cells, m)
        v = vals[cells]
        start, span = _circ_span(cols, m, per)
        peak, mean = float(v.max()), float(v.mean())
        if span == m:
            full = [r for r in np.unique(rows) if np.count_nonzero(rows == r) == m]
            rr = np.array(full) if full else np.unique(rows)
            welds.append(Weld(float((rr[0] + rr[-1] + 1) / 2 * ap), float((rr[-1] - rr[0] + 1) * ap), len(cells), peak, mean))
            continue
        r0, r1 = int(rows.min()), int(rows.max())
        ci = (start + (span - 1) / 2) % m
        centroid = (float((r0 + r1 + 1) / 2 * ap), float((ci + 0.5) * cp))
        cell = ((r0 + r1 + 1) // 2, int(math.floor(ci + 0.5)) % m)
        raw.append((float((r1 - r0 + 1) * ap), float(span * cp), len(cells), peak, mean, centroid, cell))
    order = sorted(range(len(raw)), key=lambda a: (-raw[a][3], -raw[a][2], raw[a][5]))
    for rank, a in enumerate(order, 1):
        ae, ce, area, peak, mean, centroid, cell = raw[a]
        anomalies.append(Anomaly(centroid, ae, ce, area, peak, mean, rank, cell))
    welds.sort(key=lambda w: w.center_axial)
    return AnomalyReport(anomalies, welds, th, policy, (n, m), labels)


def _unpack(kmap):
    src = getattr(kmap, "source", None)
    if hasattr(kmap, "config") and hasattr(kmap, "values"):
        values = np.asarray(kmap.values, dtype=np.float64)
        if src is not None:
            return values, src.axial_pitch, src.circ_pitch, src.periodic_circ
        return values, 1.0, 1.0, True
    if hasattr(kmap, "axial_pitch"):
        return np.asarray(kmap.values, dtype=np.float64), kmap.axial_pitch, kmap.circ_pitch, kmap.periodic_circ
    return np.asarray(kmap, dtype=np.float64), 1.0, 1.0, True


# ---------------------------------------------------------------------------
# scoring


@dataclass
class DetectionMetrics:
    tp: int
    fp: int
    fn: int
    n_welds: int
    weld_hits: int
    rank_correlation: float  # Spearman, depth vs. rank
    size_correlation: float  # Spearman, depth * diameter vs. rank
    hole_ranks: list[int | None]  # best rank matched to each hole, None if missed

    @property
    def perfect(self) -> bool:
        return self.tp > 0 and self.fp == 0 and self.fn == 0


def score_against_truth(report: AnomalyReport, truth: SynthConfig) -> DetectionMetrics:
    """Centroid-in-footprint matching against the generating configuration.

    An anomaly is a true positive when its centroid cell lies inside a hole
    footprint; further anomalies on an already matched hole and anomalies
    outside every footprint are false positives.  Missed holes get rank
    ``len(anomalies) + 1`` in the correlations.
    """
    if tuple(report.shape) != truth.shape:
        raise ValueError(f"report grid {tuple(report.shape)} does not match truth grid {truth.shape}")
    masks = hole_masks(truth)
    best: list[int | None] = [None] * len(truth.holes)
    fp = 0
    for a in report.anomalies:
        i, j = a.cell
        hit = next((h for h, hm in enumerate(masks) if hm[i, j]), None)
        if hit is None or best[hit] is not None:
            fp += 1
            if hit is not None:
                best[hit] = min(best[hit], a.depth_rank)
            continue
        best[hit] = a.depth_rank
    tp = sum(b is not None for b in best)
    fn = len(best) - tp
    weld_hits = 0
    if truth.weld is not None:
        half = truth.weld.width / 2
        weld_hits = sum(abs(w.center_axial - truth.weld.center_axial) <= max(half, 1.0) for w in report.welds)
    miss = len(report.anomalies) + 1
    ranks = np.array([miss if b is None else b for b in best], dtype=float)
    size = np.array([h.depth * h.diameter for h in truth.holes])
    depth = np.array([h.depth for h in truth.holes])
    return DetectionMetrics(
        tp, fp, fn, len(report.welds), weld_hits,
        _spearman(-ranks, depth), _spearman(-ranks, size), best,
    )


def _spearman(a, b) -> float:
    if len(a) < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return math.nan
    return float(stats.spearmanr(a, b).statistic)


# ---------------------------------------------------------------------------
# report files


def report_text(report: AnomalyReport) -> str:
    lines = [
        f"policy={report.policy}",
        f"threshold_used={report.threshold_used!r}",
        f"n_axial={report.shape[0]}",
        f"n_circ={report.shape[1]}",
        f"n_anomalies={len(report.anomalies)}",
        f"n_welds={len(report.welds)}",
    ]
    for k, a in enumerate(report.anomalies, 1):
        p = f"anomaly.{k}."
        lines += [
            f"{p}axial_mm={a.centroid[0]!r}",
            f"{p}circ_deg={a.centroid[1]!r}",
            f"{p}axial_extent_mm={a.axial_extent!r}",
            f"{p}circ_extent_deg={a.circ_extent!r}",
            f"{p}area_cells={a.area_cells}",
            f"{p}peak_kld={a.peak_kld!r}",
            f"{p}mean_kld={a.mean_kld!r}",
            f"{p}depth_rank={a.depth_rank}",
        ]
    for k, w in enumerate(report.welds, 1):
        p = f"weld.{k}."
        lines += [f"{p}center_axial_mm={w.center_axial!r}", f"{p}width_mm={w.width!r}"]
    return "\n".join(lines) + "\n"


def report_csv(report: AnomalyReport, circ_pitch: float = 1.0) -> str:
    out = io.StringIO()
    out.write("id,axial_mm,circ_deg,axial_extent_mm,circ_extent_deg,area,peak_kld,mean_kld,rank,kind\n")
    k = 0
    for a in report.anomalies:
        k += 1
        out.write(
            f"{k},{a.centroid[0]!r},{a.centroid[1]!r},{a.axial_extent!r},{a.circ_extent!r},"
            f"{a.area_cells},{a.peak_kld!r},{a.mean_kld!r},{a.depth_rank},anomaly\n"
        )
    full = report.shape[1] * circ_pitch
    for w in report.welds:
        k += 1
        out.write(
            f"{k},{w.center_axial!r},{full / 2!r},{w.width!r},{full!r},"
            f"{w.area_cells},{w.peak_kld!r},{w.mean_kld!r},,weld\n"
        )
    return out.getvalue()


def write_report(report: AnomalyReport, path, csv_path=None, circ_pitch: float = 1.0) -> None:
    Path(path).write_text(report_text(report))
    if csv_path is not None:
        Path(csv_path).write_text(report_csv(report, circ_pitch))
