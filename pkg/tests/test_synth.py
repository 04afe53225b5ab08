import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kldfilter.synth import (
    ConfigError,
    HoleSpec,
    SynthConfig,
    WeldSpec,
    anomaly_fraction,
    clean_scan,
    footprint_mask,
    generate_scan,
    hole_masks,
    noise_sigma,
    reference_layout,
    read_config,
    write_config,
    write_mask_pgm,
)


def test_sigma_from_snr():
    assert noise_sigma(SynthConfig()) == pytest.approx(0.316227766, rel=1e-9)
    assert noise_sigma(SynthConfig(snr_db=math.inf)) == 0.0


def test_noise_statistics_on_large_grid():
    cfg = SynthConfig(axial_length=3000, quantization=0.0, seed=1)
    v = generate_scan(cfg).values
    assert v.size >= 10**6
    assert abs(v.std() / noise_sigma(cfg) - 1) < 0.01
    assert abs(v.mean() - 100) < 0.01


def test_hole_centre_reads_standoff_plus_depth():
    cfg = SynthConfig(axial_length=100, snr_db=math.inf, holes=(HoleSpec(50, 90.5, 10, 2.0),))
    g = generate_scan(cfg)
    assert g.values[50, 90] == 102.0
    assert g.values[0, 0] == 100.0


def test_weld_lowers_full_band():
    cfg = SynthConfig(axial_length=100, snr_db=math.inf, weld=WeldSpec(50, 10, 2))
    v = clean_scan(cfg)
    rows = np.nonzero((v == 98.0).all(axis=1))[0]
    assert list(rows) == list(range(45, 55))
    assert (v[np.setdiff1d(np.arange(100), rows)] == 100.0).all()


def test_footprint_is_exactly_where_clean_scan_differs():
    cfg = reference_layout()
    v = clean_scan(cfg)
    assert np.array_equal(v != cfg.nominal_standoff, footprint_mask(cfg))


def test_disk_predicate_uses_arc_length():
    cfg = SynthConfig(axial_length=100, holes=(HoleSpec(50, 180, 15, 2),))
    mask = hole_masks(cfg)[0]
    i, j = np.nonzero(mask)
    da = i + 0.5 - 50
    ds = np.radians(j + 0.5 - 180) * 200
    assert np.all(da**2 + ds**2 <= 7.5**2)
    # 15 mm is about 4.3 degrees of arc at a 200 mm radius
    assert mask.any(axis=0).sum() == 4


def test_reference_layout_contents():
    cfg = reference_layout()
    assert len(cfg.holes) == 10
    assert {h.depth for h in cfg.holes} == {1.0, 2.0}
    assert {h.diameter for h in cfg.holes} == {5.0, 10.0, 15.0}
    assert sum(h.depth == 2.0 for h in cfg.holes) == 5
    assert cfg.weld is not None and cfg.weld.width == 10 and cfg.weld.depth == 2
    assert cfg.shape == (1000, 360)


def test_anomaly_share_matches_hole_cells():
    cfg = reference_layout()
    cells = sum(m.sum() for m in hole_masks(cfg))
    assert anomaly_fraction(cfg) == cells / (1000 * 360)
    area = sum(math.pi * (h.diameter / 2) ** 2 for h in cfg.holes)
    cell_area = 1.0 * math.radians(1.0) * cfg.radius
    assert anomaly_fraction(cfg) == pytest.approx(area / cell_area / (1000 * 360), rel=0.1)


def test_same_seed_same_scan_and_seeds_differ():
    a = generate_scan(reference_layout(3))
    b = generate_scan(reference_layout(3))
    c = generate_scan(reference_layout(4))
    assert a.values.tobytes() == b.values.tobytes()
    assert a != c


def test_quantized_output_and_distinct_readings():
    g = generate_scan(reference_layout(0))
    assert np.array_equal(g.values, np.rint(g.values * 10) / 10)
    assert 50 <= len(np.unique(g.values)) <= 75


@pytest.mark.parametrize(
    "kw",
    [
        dict(holes=(HoleSpec(50, 10, 10, 2), HoleSpec(55, 10, 10, 2))),
        dict(holes=(HoleSpec(2, 10, 10, 2),)),
        dict(holes=(HoleSpec(50, 10, 10, 3),)),
        dict(holes=(HoleSpec(50, 10, -1, 2),)),
        dict(holes=(HoleSpec(50, 400, 10, 2),)),
        dict(weld=WeldSpec(50, 0, 2)),
        dict(axial_length=0),
        dict(snr_db=math.nan),
    ],
)
def test_invalid_configs(kw):
    kw.setdefault("axial_length", 100)
    with pytest.raises(ConfigError):
        SynthConfig(**kw)


def test_overlap_across_the_seam():
    with pytest.raises(ConfigError):
        SynthConfig(axial_length=100, holes=(HoleSpec(50, 0.5, 10, 2), HoleSpec(50, 359.5, 10, 2)))


def test_config_file_round_trip(tmp_path):
    cfg = reference_layout(42)
    write_config(cfg, tmp_path / "c.ini")
    assert read_config(tmp_path / "c.ini") == cfg


def test_bad_config_file(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[pipe]\naxial_length = lots\n")
    with pytest.raises(ConfigError):
        read_config(p)
    p.write_text("[hole.0]\ncenter_axial = 10\n")
    with pytest.raises(ConfigError):
        read_config(p)


def test_mask_pgm_bytes(tmp_path):
    write_mask_pgm(np.array([[True, False, False], [False, False, True]]), tmp_path / "m.pgm")
    assert (tmp_path / "m.pgm").read_bytes() == b"P5\n3 2\n255\n\xff\x00\x00\x00\x00\xff"


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(20, 80),
    c=st.floats(0, 359.9),
    d=st.floats(1, 20),
    depth=st.sampled_from([1.0, 2.0, -1.0]),
)
def test_single_hole_footprint(a, c, d, depth):
    cfg = SynthConfig(axial_length=100, snr_db=math.inf, holes=(HoleSpec(a, c, d, depth),))
    v = clean_scan(cfg)
    mask = footprint_mask(cfg)
    assert np.all(v[mask] == 100 + depth)
    assert np.all(v[~mask] == 100)
    # brute-force predicate over every cell
    i, j = np.indices(cfg.shape)
    dt = np.abs(j + 0.5 - c) % 360
    dt = np.minimum(dt, 360 - dt)
    ref = (i + 0.5 - a) ** 2 + (np.radians(dt) * 200) ** 2 <= (d / 2) ** 2
    assert np.array_equal(mask, ref)
