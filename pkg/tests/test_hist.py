import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kldfilter.hist import (
    Histogram,
    HistogramError,
    bin_index,
    build_histogram,
    lookup_density,
    lookup_mass,
    pmf_from_histogram,
    pmf_from_sample,
)

samples = st.lists(st.integers(-500, 500).map(lambda v: v / 10), min_size=1, max_size=200)


def test_two_bin_example():
    h = build_histogram([0, 1, 2, 3], 2)
    assert (h.lo, h.hi, h.bin_width) == (0, 3, 1.5)
    assert list(h.counts) == [2, 2]


def test_degenerate_sample():
    h = build_histogram([5, 5, 5], 4)
    assert h.degenerate and h.bin_width == 0
    assert list(h.counts) == [3, 0, 0, 0]
    p = pmf_from_histogram(h)
    assert list(p.mass) == [1, 0, 0, 0]
    assert p.density[0] == np.inf
    assert lookup_mass(p, 5.0) == 1.0
    assert lookup_mass(p, 5.1) == 0.0


@pytest.mark.parametrize("bad", [[], [1.0, np.nan], [np.inf]])
def test_bad_samples(bad):
    with pytest.raises(HistogramError):
        build_histogram(bad, 3)


@pytest.mark.parametrize("bins", [0, -1, 2.5])
def test_bad_bins(bins):
    with pytest.raises(HistogramError):
        build_histogram([1.0, 2.0], bins)


def test_pmf_examples():
    assert list(pmf_from_histogram(Histogram(0, 3, 1.5, np.array([2, 2]))).mass) == [0.5, 0.5]
    assert list(pmf_from_histogram(Histogram(0, 3, 1.5, np.array([4, 0]))).mass) == [1.0, 0.0]
    p = pmf_from_histogram(Histogram(0, 6, 2.0, np.array([1, 2, 1])))
    assert list(p.density) == [0.125, 0.25, 0.125]
    with pytest.raises(HistogramError):
        pmf_from_histogram(Histogram(0, 1, 0.5, np.array([0, 0])))


def test_lookup_closure():
    p = pmf_from_sample([0.0, 1.0, 2.0, 4.0], 4)
    assert lookup_density(p, 0.0) == p.density[0]
    assert lookup_density(p, 4.0) == p.density[-1]
    assert lookup_density(p, 5.0) == 0.0
    assert lookup_density(p, -0.1) == 0.0
    # interior edge belongs to the upper bin
    assert lookup_mass(p, 1.0) == p.mass[1]


def test_bin_index_edges():
    assert list(bin_index([0.0, 0.5, 1.0, 2.9, 3.0, 3.1, -0.1], 0.0, 1.0, 3)) == [0, 0, 1, 2, 2, -1, -1]


def test_member_representative_is_lowest_sample():
    p = pmf_from_sample([1.0, 1.3, 2.0, 2.6], 2)
    assert list(p.representatives("member")) == [1.0, 2.0]
    assert list(p.representatives("midpoint")) == [1.4, 2.2]


def test_full_scan_counts_everything():
    from kldfilter.synth import generate_scan, reference_layout

    g = generate_scan(reference_layout(0))
    h = build_histogram(g.values, 67)
    assert h.total == g.n_axial * g.n_circ


@settings(max_examples=200, deadline=None)
@given(x=samples, bins=st.integers(1, 80))
def test_histogram_invariants(x, bins):
    h = build_histogram(x, bins)
    assert h.total == len(x)
    assert h.bins == bins
    assert h.lo == min(x) and h.hi == max(x)
    p = pmf_from_histogram(h)
    assert abs(p.mass.sum() - 1) < 1e-12
    assert np.all(p.mass >= 0)
    # every sample sits in a bin with nonzero mass, and its own bin holds it
    idx = h.index(np.asarray(x))
    assert np.all(idx >= 0)
    assert np.all(p.mass[idx] > 0)
    if not h.degenerate:
        e = h.edges
        assert np.all((e[idx] <= np.asarray(x)) | np.isclose(e[idx], x))
    # the member representative lies in its own bin
    reps = p.representatives("member")
    live = h.counts > 0
    assert np.all(h.index(reps[live]) == np.nonzero(live)[0])


@settings(max_examples=100, deadline=None)
@given(x=samples, bins=st.integers(1, 80))
def test_histogram_ignores_order(x, bins):
    a = build_histogram(x, bins)
    b = build_histogram(list(reversed(x)), bins)
    assert np.array_equal(a.counts, b.counts)
