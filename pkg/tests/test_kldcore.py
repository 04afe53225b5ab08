import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from kldfilter.grid import ScanGrid
from kldfilter.hist import Histogram, pmf_from_histogram, pmf_from_sample
from kldfilter.kldcore import (
    FilterConfig,
    jensen_shannon,
    kl_divergence,
    local_entropy_map,
    local_kld,
    local_kld_map,
    shannon_entropy,
)
from kldfilter.synth import HoleSpec, SynthConfig, generate_scan


def shared(counts):
    """PMF over unit bins starting at 0, so all such PMFs share edges."""
    counts = np.asarray(counts)
    return pmf_from_histogram(Histogram(0.0, float(len(counts)), 1.0, counts))


def test_identical_pmfs_give_zero():
    p = shared([3, 1, 0, 2])
    assert kl_divergence(p, p) == 0.0


def test_two_bin_example():
    assert abs(kl_divergence(shared([1, 0]), shared([1, 1])) - math.log(2)) < 1e-12


def test_three_quarter_example_and_asymmetry():
    p, q = shared([3, 1]), shared([1, 1])
    expected = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
    assert abs(kl_divergence(p, q) - expected) < 1e-12
    assert abs(expected - 0.130812) < 1e-6
    assert kl_divergence(q, p) != pytest.approx(kl_divergence(p, q))


def test_entropy_examples():
    assert shannon_entropy(shared([1, 0, 0])) == 0.0
    assert shannon_entropy(shared([1, 1]), "base2") == 1.0
    assert shannon_entropy(shared([1, 1, 1, 1]), "base2") == 2.0


def test_zero_baseline_policies():
    p = pmf_from_sample([0.0, 1.0, 2.0, 3.0], 4)
    q = pmf_from_sample([0.0, 0.0, 1.0, 1.0], 2)
    assert kl_divergence(p, q, "none") == math.inf
    skip = kl_divergence(p, q, "skip_zero_terms")
    assert math.isfinite(skip)
    # two surviving terms, each 0.25 log(0.25 / 0.5)
    assert skip == pytest.approx(2 * 0.25 * math.log(0.5))
    eps = kl_divergence(p, q, "additive_epsilon", epsilon=0.01)
    assert math.isfinite(eps) and eps > skip


def test_base2_is_rescaled_natural():
    p, q = shared([3, 1, 2]), shared([1, 2, 2])
    assert kl_divergence(p, q, log_base="base2") == pytest.approx(kl_divergence(p, q) / math.log(2))


def test_nan_input_is_rejected():
    p = shared([1, 1])
    bad = pmf_from_histogram(Histogram(0.0, 2.0, 1.0, np.array([1, 1])))
    object.__setattr__(bad, "mass", np.array([np.nan, 1.0]))
    with pytest.raises(ValueError):
        kl_divergence(bad, p)


def test_jensen_shannon_is_symmetric_and_bounded():
    p = pmf_from_sample([0.0, 0.2, 0.5, 1.0], 3)
    q = pmf_from_sample([0.5, 1.5, 2.0], 2)
    a = kl_divergence(p, q, "jensen_shannon")
    assert a == pytest.approx(jensen_shannon(q, p))
    assert 0 <= a <= math.log(2) + 1e-12
    disjoint = jensen_shannon(pmf_from_sample([0.0, 1.0], 2), pmf_from_sample([5.0, 6.0], 2))
    assert disjoint == pytest.approx(math.log(2))
    assert jensen_shannon(p, p) == pytest.approx(0.0, abs=1e-15)


def test_config_validation():
    for bad in (dict(l=-1), dict(w=-1), dict(k=0), dict(bins_local=0), dict(epsilon=0.0),
                dict(smoothing="nope"), dict(boundary="wrap"), dict(log_base="ten")):
        with pytest.raises(ValueError):
            FilterConfig(**bad)


pmf_pairs = st.integers(1, 12).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 20), min_size=n, max_size=n),
        st.lists(st.integers(1, 20), min_size=n, max_size=n),
    )
)


@settings(max_examples=300, deadline=None)
@given(pair=pmf_pairs)
def test_gibbs_inequality_on_shared_edges(pair):
    a, b = pair
    assume(sum(a) > 0)
    p, q = shared(a), shared(b)
    d = kl_divergence(p, q)
    assert d >= -1e-12
    if np.allclose(p.mass, q.mass):
        assert abs(d) < 1e-12
    else:
        assert d > 0


# ---------------------------------------------------------------------------
# local maps


def small_grids():
    shape = st.tuples(st.integers(1, 9), st.integers(1, 7))
    return shape.flatmap(
        lambda s: st.tuples(
            st.lists(st.integers(960, 1040), min_size=s[0] * s[1], max_size=s[0] * s[1]).map(
                lambda v: np.array(v).reshape(s) / 10
            ),
            st.booleans(),
        ).map(lambda t: ScanGrid(t[0], periodic_circ=t[1]))
    )


configs = st.builds(
    FilterConfig,
    l=st.integers(0, 4),
    w=st.integers(0, 3),
    k=st.integers(1, 30),
    bins_local=st.integers(1, 20),
    smoothing=st.sampled_from(["skip_zero_terms", "additive_epsilon", "none"]),
    boundary=st.sampled_from(["clip", "shift"]),
    representative=st.sampled_from(["member", "midpoint"]),
    log_base=st.sampled_from(["natural", "base2"]),
)


@settings(max_examples=80, deadline=None)
@given(g=small_grids(), cfg=configs, own=st.booleans())
def test_map_paths_agree_with_pointwise_definition(g, cfg, own):
    q = pmf_from_sample(g.values if own else np.linspace(99.0, 101.0, 21), cfg.k)
    a = local_kld_map(g, q, cfg, method="levels").values
    b = local_kld_map(g, q, cfg, method="samples").values
    ref = np.array([[local_kld(g, i, j, q, cfg) for j in range(g.n_circ)] for i in range(g.n_axial)])
    np.testing.assert_allclose(a, ref, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(b, ref, rtol=1e-12, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(g=small_grids(), cfg=configs)
def test_entropy_paths_agree(g, cfg):
    a = local_entropy_map(g, cfg, method="levels").values
    b = local_entropy_map(g, cfg, method="samples").values
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)
    assert np.all(a >= -1e-15)
    assert np.all(a <= math.log(cfg.bins_local) / (math.log(2) if cfg.log_base == "base2" else 1) + 1e-12)


@settings(max_examples=40, deadline=None)
@given(g=small_grids(), cfg=configs)
def test_own_baseline_is_always_finite(g, cfg):
    cfg = FilterConfig(cfg.l, cfg.w, cfg.k, cfg.bins_local, smoothing="skip_zero_terms", representative="member")
    kmap = local_kld_map(g, pmf_from_sample(g.values, cfg.k), cfg)
    assert np.isfinite(kmap.values).all()
    assert kmap.shape == g.shape


def test_constant_grid_maps_to_zero():
    g = ScanGrid(np.full((20, 8), 100.0))
    q = pmf_from_sample(g.values, 67)
    assert np.all(local_kld_map(g, q, FilterConfig(l=3, w=1)).values == 0)
    assert np.all(local_entropy_map(g, FilterConfig(l=3, w=1)).values == 0)


def test_uniform_anomaly_interior_has_low_entropy():
    v = np.full((40, 20), 100.0)
    v[10:30, 5:15] = 102.0
    g = ScanGrid(v + np.where(np.indices(v.shape).sum(axis=0) % 2, 0.1, 0.0) * (v == 100.0))
    e = local_entropy_map(g, FilterConfig(l=3, w=1, bins_local=60)).values
    assert e[20, 10] == 0.0
    assert e[2, 2] > 0.5


def test_workers_do_not_change_result():
    rng = np.random.default_rng(3)
    g = ScanGrid(np.rint(rng.normal(1000, 3, (50, 24))) / 10)
    q = pmf_from_sample(g.values, 67)
    cfg = FilterConfig(l=5, w=1)
    one = local_kld_map(g, q, cfg).values
    for workers in (2, 3, 7):
        assert np.array_equal(one, local_kld_map(g, q, cfg, workers=workers).values)


def test_map_is_deterministic():
    rng = np.random.default_rng(5)
    g = ScanGrid(np.rint(rng.normal(1000, 3, (60, 30))) / 10)
    q = pmf_from_sample(g.values, 67)
    a = local_kld_map(g, q).values
    b = local_kld_map(g, q).values
    assert a.tobytes() == b.tobytes()


def test_jensen_shannon_is_not_a_local_filter():
    g = ScanGrid(np.full((3, 3), 100.0))
    with pytest.raises(ValueError):
        local_kld_map(g, pmf_from_sample(g.values, 3), FilterConfig(smoothing="jensen_shannon"))


def test_deeper_hole_gives_larger_peak():
    def peak(depth):
        cfg = SynthConfig(axial_length=300, holes=(HoleSpec(150, 180.5, 15, depth),), seed=11)
        g = generate_scan(cfg)
        return local_kld_map(g, pmf_from_sample(g.values, 67)).values.max()

    assert peak(2.0) >= peak(1.0) >= peak(0.5)


@pytest.mark.slow
def test_entropy_map_highlights_the_larger_holes():
    from dataclasses import replace

    from kldfilter.synth import hole_masks, reference_layout

    for seed in range(2):
        cfg = reference_layout(seed)
        g = generate_scan(cfg)
        free = generate_scan(replace(cfg, holes=(), weld=None))
        k = local_kld_map(g, pmf_from_sample(g.values, 67)).values
        k_free = local_kld_map(free, pmf_from_sample(free.values, 67)).values.max()
        e = local_entropy_map(g).values
        e_free = local_entropy_map(free).values.max()
        for h, m in zip(cfg.holes, hole_masks(cfg)):
            # the divergence map lifts every hole above the anomaly-free maximum
            assert k[m].max() > k_free
            # entropy does so for holes of 10 mm and more; the 5 mm hole is not reliable
            if h.diameter >= 10:
                assert e[m].max() > e_free
