"""Baseline distributions and the error of using the full data set as baseline.

Ideally the baseline is a noise-only PMF ``Q_N``.  In practice it is built
from the whole scan, ``Q_A``, which includes the anomalies.  For a local
PMF ``P`` the resulting error is::

    delta_A = sum_n P_n log(Q_N(phi_n) / Q_A(phi_n))

with terms where ``Q_N`` is zero dropped.  Holding ``P`` fixed while the
share of anomaly readings grows shows how large the error gets.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .grid import ScanGrid, window_cols, window_rows
from .hist import Pmf, lookup_mass, pmf_from_sample
from .kldcore import LOG_BASES, kl_divergence
from .synth import HoleSpec, SynthConfig, anomaly_fraction, generate_scan, hole_cells, hole_masks, reference_layout

__all__ = [
    "baseline_from_all",
    "baseline_from_noise",
    "SensitivityReport",
    "ProbeSpec",
    "sensitivity_delta",
    "sensitivity_sweep",
    "replicated_layout",
    "probe_window",
    "sweep_csv",
]


def baseline_from_all(grid: ScanGrid, k: int = 67) -> Pmf:
    """PMF of every reading of the scan; nonzero at every reading."""
    return pmf_from_sample(grid.values, k)


def baseline_from_noise(noise_grid: ScanGrid, k: int = 67) -> Pmf:
    """PMF of an anomaly-free scan.  Anomalous readings may fall outside it."""
    return pmf_from_sample(noise_grid.values, k)


@dataclass(frozen=True)
class SensitivityReport:
    anomaly_fraction: float
    delta_a: float
    d_kl_qa: float
    d_kl_qn: float
    relative_sensitivity: float  # delta_a / d_kl_qa, NaN when d_kl_qa == 0
    dropped: float  # sum of P log(P/Q_A) over terms with Q_N == 0
    probe_description: str = ""


def sensitivity_delta(
    p: Pmf,
    q_a: Pmf,
    q_n: Pmf,
    anomaly_fraction: float = math.nan,
    probe_description: str = "",
    representative: str = "member",
    log_base: str = "natural",
) -> SensitivityReport:
    """Baseline error for a fixed probe PMF ``p``.

    Both baselines are evaluated at the same bin representatives used by
    the local filter, so ``D(P||Q_A) = D(P||Q_N) + delta_A + dropped``.
    """
    live = p.mass > 0
    pm = p.mass[live]
    reps = p.representatives(representative)[live]
    qa = np.atleast_1d(lookup_mass(q_a, reps))
    qn = np.atleast_1d(lookup_mass(q_n, reps))
    scale = LOG_BASES[log_base]
    ok = (qn > 0) & (qa > 0)
    delta = float(np.sum(pm[ok] * np.log(qn[ok] / qa[ok])) / scale)
    gone = (qn <= 0) & (qa > 0)
    dropped = float(np.sum(pm[gone] * np.log(pm[gone] / qa[gone])) / scale)
    d_qa = kl_divergence(p, q_a, log_base=log_base, representative=representative)
    d_qn = kl_divergence(p, q_n, log_base=log_base, representative=representative)
    rel = delta / d_qa if d_qa > 0 else math.nan
    return SensitivityReport(anomaly_fraction, delta, d_qa, d_qn, rel, dropped, probe_description)


# ---------------------------------------------------------------------------
# sweep over anomaly fractions


@dataclass(frozen=True)
class ProbeSpec:
    """Window held fixed across the sweep.

    The probe scan holds one hole of the given type; the window is offset
    axially from the hole centre so that about ``inside`` of its cells lie in
    the footprint.
    """

    l: int = 7
    w: int = 1
    bins: int = 60
    diameter: float = 15.0
    depth: float = 2.0
    inside: float = 0.5
    k: int = 67


def _lattice(config: SynthConfig, pitch_axial: float = 20.0, pitch_circ: float = 6.0):
    a0 = pitch_axial
    axial = np.arange(a0, config.axial_length - a0 / 2 + 1e-9, pitch_axial)
    circ = np.arange(pitch_circ / 2, 360.0, pitch_circ)
    return [(float(a), float(c)) for a in axial for c in circ]


def replicated_layout(template: SynthConfig, target: float) -> SynthConfig:
    """Repeat the template's hole types on a lattice to reach an anomaly share.

    The weld is removed so only holes count as anomalies.  Holes are added in
    lattice order and the count whose share is closest to ``target`` wins.
    """
    if not 0 < target < 1:
        raise ValueError("fraction must be in (0, 1)")
    kinds = [(h.diameter, h.depth) for h in template.holes] or [(15.0, 2.0)]
    base = replace(template, holes=(), weld=None)
    total = base.shape[0] * base.shape[1]
    holes: list[HoleSpec] = []
    covered = 0
    best, best_err = 0, target
    # lattice holes never overlap, so the covered share is a running sum
    for n, (a, c) in enumerate(_lattice(base)):
        d, z = kinds[n % len(kinds)]
        h = HoleSpec(a, c, d, z)
        holes.append(h)
        covered += len(hole_cells(base, h)[0])
        if abs(covered / total - target) < best_err:
            best, best_err = len(holes), abs(covered / total - target)
        if covered / total >= target:
            break
    return replace(base, holes=tuple(holes[:best]))


def probe_window(config: SynthConfig, probe: ProbeSpec):
    """Probe config (one hole), window centre and the achieved inside share."""
    centre_a = config.axial_length / 2
    # centre the hole on a cell so the footprint is symmetric about it
    centre_c = 180.5 * config.circ_pitch
    cfg = replace(config, holes=(HoleSpec(centre_a, centre_c, probe.diameter, probe.depth),), weld=None)
    mask = hole_masks(cfg)[0]
    n, m = cfg.shape
    j = int(centre_c / config.circ_pitch)
    i0 = int(centre_a / config.axial_pitch)
    cols = window_cols(m, j, probe.w, True)
    best = None
    for off in range(0, probe.l + int(probe.diameter / config.axial_pitch) + 2):
        r0, r1 = window_rows(n, i0 + off, probe.l, "clip")
        share = float(mask[r0:r1][:, cols].mean())
        if best is None or abs(share - probe.inside) < abs(best[2] - probe.inside):
            best = (i0 + off, j, share)
    return cfg, best


def sensitivity_sweep(
    config: SynthConfig | None,
    fractions,
    probe: ProbeSpec = ProbeSpec(),
) -> list[SensitivityReport]:
    """Relative baseline error as the anomaly share grows, probe held fixed."""
    config = config or reference_layout()
    fractions = [float(f) for f in fractions]
    if any(not 0 < f < 1 for f in fractions):
        raise ValueError("fractions must lie in (0, 1)")
    if any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise ValueError("fractions must be increasing")
    pcfg, (i, j, share) = probe_window(config, probe)
    pgrid = generate_scan(pcfg)
    r0, r1 = window_rows(pgrid.n_axial, i, probe.l, "clip")
    cols = window_cols(pgrid.n_circ, j, probe.w, True)
    p = pmf_from_sample(pgrid.values[r0:r1][:, cols], probe.bins)
    desc = (
        f"window l={probe.l} w={probe.w} at cell ({i}, {j}), {share:.1%} inside a "
        f"{probe.diameter:g} mm hole of depth {probe.depth:g} mm"
    )
    noise = generate_scan(replace(config, holes=(), weld=None))
    q_n = baseline_from_noise(noise, probe.k)
    out = []
    for f in fractions:
        cfg = replicated_layout(config, f)
        q_a = baseline_from_all(generate_scan(cfg), probe.k)
        out.append(sensitivity_delta(p, q_a, q_n, anomaly_fraction(cfg), desc))
    return out


def sweep_csv(reports) -> str:
    buf = io.StringIO()
    buf.write("fraction,delta_a,d_kl_qa,d_kl_qn,relative_sensitivity\n")
    for r in reports:
        buf.write(
            f"{r.anomaly_fraction!r},{r.delta_a!r},{r.d_kl_qa!r},{r.d_kl_qn!r},{r.relative_sensitivity!r}\n"
        )
    return buf.getvalue()


def write_sweep_csv(reports, path) -> None:
    Path(path).write_text(sweep_csv(reports))
