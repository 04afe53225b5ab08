"""Kullback-Leibler divergence, Shannon entropy and the local divergence map.

Every reading ``(i, j)`` of a scan is mapped to ``D(P_ij || Q)`` where
``P_ij`` is the histogram PMF of the window around it and ``Q`` a baseline
PMF.  The sum runs over the bins of ``P_ij``::

    D = sum_n P_n * log(P_n / Q(phi_n))

with ``Q(phi_n)`` the baseline mass of the bin holding the representative
``phi_n`` of local bin ``n``.  Local and baseline bins may differ in number
and width.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid import ScanGrid, window_cols, window_rows, window_subset
from .hist import Pmf, lookup_mass, pmf_from_sample

__all__ = [
    "SMOOTHING",
    "FilterConfig",
    "KldMap",
    "kl_divergence",
    "jensen_shannon",
    "shannon_entropy",
    "local_kld",
    "local_kld_map",
    "local_entropy_map",
]

SMOOTHING = ("skip_zero_terms", "additive_epsilon", "none", "jensen_shannon")
LOG_BASES = {"natural": 1.0, "base2": math.log(2.0)}

# distinct-value path is used up to this many distinct readings
MAX_LEVELS = 4096


@dataclass(frozen=True)
class FilterConfig:
    l: int = 60
    w: int = 1
    k: int = 67
    bins_local: int = 60
    log_base: str = "natural"
    smoothing: str = "skip_zero_terms"
    epsilon: float | None = None
    boundary: str = "shift"
    representative: str = "member"

    def __post_init__(self):
        if self.l < 0 or self.w < 0:
            raise ValueError("window half-sizes l, w must be >= 0")
        if self.k < 1 or self.bins_local < 1:
            raise ValueError("bin counts k, bins_local must be >= 1")
        if self.log_base not in LOG_BASES:
            raise ValueError(f"log_base must be one of {sorted(LOG_BASES)}")
        if self.smoothing not in SMOOTHING:
            raise ValueError(f"smoothing must be one of {SMOOTHING}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.boundary not in ("clip", "shift"):
            raise ValueError("boundary must be 'clip' or 'shift'")
        if self.representative not in ("member", "midpoint"):
            raise ValueError("representative must be 'member' or 'midpoint'")


@dataclass(frozen=True, eq=False)
class KldMap:
    values: np.ndarray
    config: FilterConfig
    # count of windows whose divergence came out negative (misaligned bins)
    negative_cells: int = 0
    source: ScanGrid | None = field(default=None, repr=False)

    @property
    def shape(self):
        return self.values.shape

    def as_grid(self, like: ScanGrid | None = None) -> ScanGrid:
        """Wrap the map as an unquantized grid for the shared file format."""
        like = like or self.source
        if like is None:
            return ScanGrid(self.values, quantization=0.0)
        return like.same_geometry(self.values, quantization=0.0)


def _check_pmf(p: Pmf, name: str):
    if np.isnan(p.mass).any():
        raise ValueError(f"{name} contains NaN masses")


def _epsilon(q: Pmf, epsilon: float | None) -> float:
    if epsilon is not None:
        return epsilon
    return 1.0 / (10.0 * max(q.hist.total, 1))


def kl_divergence(
    p: Pmf,
    q: Pmf,
    smoothing: str = "skip_zero_terms",
    epsilon: float | None = None,
    log_base: str = "natural",
    representative: str = "member",
) -> float:
    """``D(p || q)`` summed over the bins of ``p``.

    Bins of ``p`` with zero mass contribute nothing.  Where ``q`` has no mass
    at a bin representative, ``skip_zero_terms`` drops the term, ``none``
    returns ``inf`` and ``additive_epsilon`` uses ``(Q + eps) / (1 + k*eps)``.
    ``jensen_shannon`` returns the Jensen-Shannon divergence instead.
    """
    _check_pmf(p, "p")
    _check_pmf(q, "q")
    if smoothing == "jensen_shannon":
        return jensen_shannon(p, q, log_base)
    if smoothing not in SMOOTHING:
        raise ValueError(f"unknown smoothing {smoothing!r}")
    live = p.mass > 0
    pm = p.mass[live]
    qm = np.atleast_1d(lookup_mass(q, p.representatives(representative)[live]))
    if smoothing == "additive_epsilon":
        eps = _epsilon(q, epsilon)
        qm = (qm + eps) / (1.0 + q.bins * eps)
    zero = qm <= 0
    if zero.any():
        if smoothing == "none":
            return math.inf
        pm, qm = pm[~zero], qm[~zero]
    return float(np.sum(pm * np.log(pm / qm)) / LOG_BASES[log_base])


def _unified(p: Pmf) -> tuple[np.ndarray, np.ndarray]:
    h = p.hist
    if h.degenerate:
        return np.array([h.lo]), np.array([1.0])
    return h.edges, p.mass


def jensen_shannon(p: Pmf, q: Pmf, log_base: str = "natural") -> float:
    """``0.5 D(P||M) + 0.5 D(Q||M)`` with ``M = (P + Q)/2`` on merged edges.

    Mass inside a bin is spread uniformly when it is split by the other
    distribution's edges.  Point masses (degenerate PMFs) stay points.
    """
    ep, mp = _unified(p)
    eq, mq = _unified(q)
    cuts = np.union1d(ep, eq)
    a = _rebin(ep, mp, cuts)
    b = _rebin(eq, mq, cuts)
    m = 0.5 * (a + b)
    js = 0.0
    for x in (a, b):
        live = x > 0
        js += 0.5 * np.sum(x[live] * np.log(x[live] / m[live]))
    return float(js / LOG_BASES[log_base])


def _rebin(edges, mass, cuts):
    # cells: one per cut point (point masses) followed by one per interval
    out = np.zeros(2 * len(cuts) - 1)
    if len(edges) == 1:
        out[2 * np.searchsorted(cuts, edges[0])] = 1.0
        return out
    for n in range(len(mass)):
        if mass[n] == 0:
            continue
        a, b = edges[n], edges[n + 1]
        s, e = np.searchsorted(cuts, a), np.searchsorted(cuts, b)
        for c in range(s, e):
            out[2 * c + 1] += mass[n] * (cuts[c + 1] - cuts[c]) / (b - a)
    return out


def shannon_entropy(p: Pmf, log_base: str = "natural") -> float:
    m = p.mass[p.mass > 0]
    return float(-np.sum(m * np.log(m)) / LOG_BASES[log_base])


# ---------------------------------------------------------------------------
# local maps


def local_kld(grid: ScanGrid, i: int, j: int, baseline: Pmf, config: FilterConfig) -> float:
    """Divergence of the single window centred on ``(i, j)``."""
    sample = window_subset(grid, i, j, config.l, config.w, axial=config.boundary)
    p = pmf_from_sample(sample, config.bins_local)
    return kl_divergence(
        p,
        baseline,
        smoothing=config.smoothing,
        epsilon=config.epsilon,
        log_base=config.log_base,
        representative=config.representative,
    )


def _window_columns(grid: ScanGrid, w: int) -> tuple[np.ndarray, np.ndarray]:
    """(M, W) column table padded with -1, and per-centre column counts."""
    m = grid.n_circ
    lists = [window_cols(m, j, w, grid.periodic_circ) for j in range(m)]
    width = max(len(c) for c in lists)
    table = np.full((m, width), -1, dtype=np.int64)
    for j, c in enumerate(lists):
        table[j, : len(c)] = c
    return table, np.array([len(c) for c in lists])


def _row_bins(x, lo, width, bins):
    """Vectorized bin_index with a per-row lower edge and width."""
    safe = np.where(width > 0, width, 1.0)
    idx = np.floor((x - lo) / safe)
    idx = np.clip(idx, 0, bins).astype(np.int64)
    up = lo + (idx + 1) * safe
    idx = np.where(x >= up, idx + 1, idx)
    down = lo + idx * safe
    idx = np.where(x < down, idx - 1, idx)
    idx = np.clip(idx, 0, bins - 1)
    return np.where(width > 0, idx, 0)


class _Evaluator:
    """Per-row divergence/entropy evaluation shared by both map paths."""

    def __init__(self, config: FilterConfig, baseline: Pmf | None, entropy: bool):
        self.cfg = config
        self.baseline = baseline
        self.entropy = entropy
        self.scale = LOG_BASES[config.log_base]
        if baseline is not None and config.smoothing == "additive_epsilon":
            self.eps = _epsilon(baseline, config.epsilon)
        else:
            self.eps = None

    def qmass(self, reps):
        qm = lookup_mass(self.baseline, reps)
        if self.eps is not None:
            qm = (qm + self.eps) / (1.0 + self.baseline.bins * self.eps)
        return qm

    def terms(self, pm, qm):
        """Per-bin contributions; pm == 0 entries contribute 0."""
        if self.entropy:
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(pm > 0, -pm * np.log(pm), 0.0)
            return t
        live = pm > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(live, pm * np.log(pm / qm), 0.0)
        zero = live & (qm <= 0)
        if self.cfg.smoothing == "none":
            t = np.where(zero, np.inf, t)
        else:
            t = np.where(zero, 0.0, t)
        return t


def _rows_levels(grid, levels, codes, qlev, ev: _Evaluator, rows):
    """Distinct-value path: window counts over the grid's distinct readings."""
    cfg = ev.cfg
    n_ax, m = grid.shape
    nlev = len(levels)
    K = cfg.bins_local
    table, ncols = _window_columns(grid, cfg.w)
    valid = table >= 0
    jj = np.broadcast_to(np.arange(m)[:, None], table.shape)[valid]
    tcols = table[valid]

    def boxed(r):
        return np.bincount(jj * nlev + codes[r, tcols], minlength=m * nlev).reshape(m, nlev)

    counts = np.zeros((m, nlev), dtype=np.int64)
    p0 = p1 = rows[0] if len(rows) else 0
    out = np.empty((len(rows), m))
    ar = np.arange(nlev)
    for k, i in enumerate(rows):
        r0, r1 = window_rows(n_ax, i, cfg.l, cfg.boundary)
        if r0 >= p1 or r1 <= p0:
            counts[:] = 0
            p0 = p1 = r0
        for r in range(p1, r1):
            counts += boxed(r)
        for r in range(r1, p1):
            counts -= boxed(r)
        for r in range(p0, r0):
            counts -= boxed(r)
        for r in range(r0, p0):
            counts += boxed(r)
        p0, p1 = r0, r1
        n = (r1 - r0) * ncols
        present = counts > 0
        first = np.argmax(present, axis=1)
        last = nlev - 1 - np.argmax(present[:, ::-1], axis=1)
        lo = levels[first][:, None]
        width = ((levels[last] - levels[first]) / K)[:, None]
        idx = _row_bins(levels[None, :], lo, width, K)
        # first present level of each bin is the bin's lowest member
        pos = np.where(present, ar[None, :], -1)
        prev = np.maximum.accumulate(pos, axis=1)
        prev = np.concatenate([np.full((m, 1), -1), prev[:, :-1]], axis=1)
        prev_idx = np.where(prev >= 0, np.take_along_axis(idx, np.maximum(prev, 0), axis=1), -1)
        head = present & (prev_idx != idx)
        flat = idx + K * np.arange(m)[:, None]
        binmass = np.bincount(flat.ravel(), weights=counts.ravel(), minlength=m * K) / np.repeat(n, K)
        pm = np.where(head, binmass[flat], 0.0)
        if ev.entropy:
            qm = None
        elif cfg.representative == "member":
            qm = np.broadcast_to(qlev[None, :], pm.shape)
        else:
            mids = lo + (idx + 0.5) * width
            mids = np.where(width > 0, mids, lo)
            qm = ev.qmass(mids)
        out[k] = ev.terms(pm, qm).sum(axis=1)
    return out


def _rows_samples(grid, ev: _Evaluator, rows):
    """Sample path: gather every window, sort, and bin."""
    cfg = ev.cfg
    n_ax, m = grid.shape
    K = cfg.bins_local
    table, ncols = _window_columns(grid, cfg.w)
    out = np.empty((len(rows), m))
    for k, i in enumerate(rows):
        r0, r1 = window_rows(n_ax, i, cfg.l, cfg.boundary)
        block = grid.values[r0:r1]
        res = np.empty(m)
        # group centres by window width (differs only for non-periodic grids)
        for width_cols in np.unique(ncols):
            sel = np.nonzero(ncols == width_cols)[0]
            cols = table[sel, :width_cols]
            win = block[:, cols]  # rows, centres, cols
            win = np.sort(np.transpose(win, (1, 0, 2)).reshape(len(sel), -1), axis=1)
            n = win.shape[1]
            lo = win[:, :1]
            width = (win[:, -1:] - lo) / K
            idx = _row_bins(win, lo, width, K)
            head = np.ones_like(idx, dtype=bool)
            head[:, 1:] = idx[:, 1:] != idx[:, :-1]
            flat = idx + K * np.arange(len(sel))[:, None]
            cnt = np.bincount(flat.ravel(), minlength=len(sel) * K)
            pm = np.where(head, cnt[flat] / n, 0.0)
            if ev.entropy:
                qm = None
            elif cfg.representative == "member":
                qm = ev.qmass(win)
            else:
                mids = np.where(width > 0, lo + (idx + 0.5) * width, lo)
                qm = ev.qmass(mids)
            res[sel] = ev.terms(pm, qm).sum(axis=1)
        out[k] = res
    return out


def _run(grid: ScanGrid, ev: _Evaluator, method: str, workers: int) -> np.ndarray:
    n_ax = grid.n_axial
    levels = np.unique(grid.values)
    if method == "auto":
        method = "levels" if len(levels) <= MAX_LEVELS else "samples"
    if method == "levels":
        codes = np.searchsorted(levels, grid.values)
        qlev = None if ev.entropy else ev.qmass(levels)

        def job(rows):
            return _rows_levels(grid, levels, codes, qlev, ev, rows)

    elif method == "samples":

        def job(rows):
            return _rows_samples(grid, ev, rows)

    else:
        raise ValueError(f"unknown method {method!r}")
    blocks = [b for b in np.array_split(np.arange(n_ax), max(1, workers)) if len(b)]
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, blocks))
    else:
        parts = [job(b) for b in blocks]
    return np.concatenate(parts, axis=0) / ev.scale


def local_kld_map(
    grid: ScanGrid,
    baseline: Pmf,
    config: FilterConfig = FilterConfig(),
    method: str = "auto",
    workers: int = 1,
) -> KldMap:
    """Map every reading to the divergence of its window PMF from ``baseline``.

    ``method`` selects the distinct-value path (``levels``), the gather path
    (``samples``) or picks automatically.  Results do not depend on
    ``workers``.
    """
    if config.smoothing == "jensen_shannon":
        raise ValueError("jensen_shannon is a baseline comparison mode, not a local filter")
    ev = _Evaluator(config, baseline, entropy=False)
    values = _run(grid, ev, method, workers)
    neg = int(np.count_nonzero(values < 0))
    return KldMap(values, config, negative_cells=neg, source=grid)


def local_entropy_map(
    grid: ScanGrid,
    config: FilterConfig = FilterConfig(),
    method: str = "auto",
    workers: int = 1,
) -> KldMap:
    """Shannon entropy of every window PMF, same windows and bins as the KLD map."""
    ev = _Evaluator(config, None, entropy=True)
    values = _run(grid, ev, method, workers)
    return KldMap(values, config, source=grid)
