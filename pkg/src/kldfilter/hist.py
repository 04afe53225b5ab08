"""Equal-width histograms and the probability mass functions built on them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HistogramError",
    "Histogram",
    "Pmf",
    "bin_index",
    "build_histogram",
    "pmf_from_histogram",
    "pmf_from_sample",
    "lookup_density",
    "lookup_mass",
]


class HistogramError(ValueError):
    pass


def bin_index(x, lo: float, width: float, bins: int, hi: float | None = None) -> np.ndarray:
    """Bin of each value for ``bins`` equal bins starting at ``lo``.

    Bins are half-open ``[lo + n*width, lo + (n+1)*width)`` with the last bin
    closed at the top.  Values sitting on an edge (as computed by
    ``lo + n*width``) go to the upper bin.  Values outside ``[lo, hi]`` get -1;
    ``hi`` defaults to ``lo + bins*width``, pass the sample maximum when it is
    known since the product can round below it.  A zero ``width`` means a
    degenerate single-point histogram.
    """
    x = np.asarray(x, dtype=np.float64)
    if width == 0:
        return np.where(x == lo, 0, -1)
    if hi is None:
        hi = lo + bins * width
    idx = np.floor((x - lo) / width)
    idx = np.clip(np.nan_to_num(idx, nan=-1.0), -1, bins).astype(np.int64)
    # correct floor() against the edges themselves
    up = lo + (idx + 1) * width
    idx = np.where(x >= up, idx + 1, idx)
    down = lo + idx * width
    idx = np.where(x < down, idx - 1, idx)
    idx = np.minimum(idx, bins - 1)
    outside = (x < lo) | (x > hi) | np.isnan(x)
    return np.where(outside, -1, idx)


@dataclass(frozen=True, eq=False)
class Histogram:
    lo: float
    hi: float
    bin_width: float
    counts: np.ndarray
    # lowest sample in each bin (NaN when empty); None if built from counts
    bin_min: np.ndarray | None = None

    @property
    def bins(self) -> int:
        return len(self.counts)

    @property
    def degenerate(self) -> bool:
        return self.bin_width == 0

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def edges(self) -> np.ndarray:
        e = self.lo + np.arange(self.bins + 1) * self.bin_width
        e[-1] = self.hi
        return e

    def index(self, x) -> np.ndarray:
        return bin_index(x, self.lo, self.bin_width, self.bins, self.hi)


def build_histogram(sample, bins: int) -> Histogram:
    x = np.asarray(sample, dtype=np.float64).ravel()
    if x.size == 0:
        raise HistogramError("cannot build a histogram of an empty sample")
    if int(bins) != bins or bins < 1:
        raise HistogramError(f"bins must be a positive integer, got {bins!r}")
    bins = int(bins)
    if not np.isfinite(x).all():
        raise HistogramError("sample contains non-finite values")
    lo, hi = float(x.min()), float(x.max())
    width = (hi - lo) / bins
    idx = bin_index(x, lo, width, bins, hi)
    counts = np.bincount(idx, minlength=bins)
    bin_min = np.full(bins, np.inf)
    np.minimum.at(bin_min, idx, x)
    bin_min[counts == 0] = np.nan
    return Histogram(lo, hi, width, counts, bin_min)


@dataclass(frozen=True, eq=False)
class Pmf:
    """Masses and per-millimetre densities over a histogram's bins.

    For a degenerate histogram (all samples equal) the whole mass sits in
    bin 0 and its density is reported as ``inf``.
    """

    hist: Histogram
    mass: np.ndarray
    density: np.ndarray

    @property
    def bins(self) -> int:
        return self.hist.bins

    @property
    def degenerate(self) -> bool:
        return self.hist.degenerate

    def representatives(self, kind: str = "member") -> np.ndarray:
        """Point of each bin at which another distribution is evaluated.

        ``member`` is the lowest sample in the bin (falls back to the midpoint
        when samples were not kept); ``midpoint`` is the bin centre.
        """
        h = self.hist
        if h.degenerate:
            reps = np.full(h.bins, np.nan)
            reps[0] = h.lo
            return reps
        mids = h.lo + (np.arange(h.bins) + 0.5) * h.bin_width
        if kind == "midpoint" or h.bin_min is None:
            return mids
        if kind == "member":
            return np.where(np.isnan(h.bin_min), mids, h.bin_min)
        raise HistogramError(f"unknown representative {kind!r}")


def pmf_from_histogram(hist: Histogram) -> Pmf:
    total = hist.counts.sum()
    if total <= 0:
        raise HistogramError("histogram has no counts")
    mass = hist.counts / total
    if hist.degenerate:
        density = np.where(mass > 0, np.inf, 0.0)
    else:
        density = mass / hist.bin_width
    return Pmf(hist, mass, density)


def pmf_from_sample(sample, bins: int) -> Pmf:
    return pmf_from_histogram(build_histogram(sample, bins))


def lookup_mass(pmf: Pmf, x) -> np.ndarray:
    """Mass of the bin holding ``x``; 0 outside the support."""
    idx = pmf.hist.index(x)
    out = np.where(idx >= 0, pmf.mass[np.maximum(idx, 0)], 0.0)
    return out if out.ndim else float(out)


def lookup_density(pmf: Pmf, x) -> np.ndarray:
    """Density of the bin holding ``x``; 0 outside the support."""
    idx = pmf.hist.index(x)
    out = np.where(idx >= 0, pmf.density[np.maximum(idx, 0)], 0.0)
    return out if out.ndim else float(out)
