"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .baseline import ProbeSpec, baseline_from_all, baseline_from_noise, sensitivity_sweep, sweep_csv
from .detect import AnomalyReport, report_csv, report_text, score_against_truth, segment
from .grid import ScanGrid, load_grid, save_grid
from .kldcore import SMOOTHING, FilterConfig, KldMap, local_entropy_map, local_kld_map
from .render import ColorMapSpec, render_map
from .synth import generate_scan, reference_layout, read_config, with_seed, write_config, write_mask_pgm, footprint_mask

log = logging.getLogger("kldfilter")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}") from None


def _window_flags(p, with_baseline: bool = True):
    d = FilterConfig()
    p.add_argument("--l", type=int, default=d.l, help="axial window half-size in samples (default %(default)s)")
    p.add_argument("--w", type=int, default=d.w, help="circumferential window half-size (default %(default)s)")
    p.add_argument("--bins", type=int, default=d.bins_local, help="local histogram bins K (default %(default)s)")
    p.add_argument("--boundary", choices=("shift", "clip"), default=d.boundary,
                   help="axial edge handling (default %(default)s)")
    p.add_argument("--log-base", choices=("natural", "base2"), default=d.log_base,
                   help="logarithm base (default %(default)s)")
    p.add_argument("--workers", type=int, default=1, help="worker threads (default %(default)s)")
    if with_baseline:
        p.add_argument("--k", type=int, default=d.k, help="baseline histogram bins (default %(default)s)")
        p.add_argument("--smoothing", choices=[s for s in SMOOTHING if s != "jensen_shannon"],
                       default=d.smoothing, help="zero-baseline handling (default %(default)s)")
        p.add_argument("--epsilon", type=float, default=None,
                       help="additive_epsilon mass (default 1/(10*N))")
        p.add_argument("--representative", choices=("member", "midpoint"), default=d.representative,
                       help="bin representative for the baseline lookup (default %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kldfilter", description="Local KLD filter for pipe-inspection scans.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic scan")
    s.add_argument("--config", type=Path, help="synth config file (default: built-in ten-hole layout)")
    s.add_argument("--out", type=Path, required=True, help="output grid file")
    s.add_argument("--truth-mask", type=Path, help="write hole and weld footprint as PGM")
    s.add_argument("--format", choices=("csv", "binary"), default="csv", help="grid format (default %(default)s)")
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--dump-config", type=Path, help="write the config actually used")

    f = sub.add_parser("filter", help="local KLD map of a scan")
    f.add_argument("--in", dest="inp", type=Path, required=True, help="input grid")
    f.add_argument("--out", type=Path, required=True, help="output map (grid CSV layout)")
    f.add_argument("--noise", type=Path, help="noise-only grid for the baseline (default: the input itself)")
    _window_flags(f)

    e = sub.add_parser("entropy", help="local Shannon entropy map of a scan")
    e.add_argument("--in", dest="inp", type=Path, required=True, help="input grid")
    e.add_argument("--out", type=Path, required=True, help="output map")
    _window_flags(e, with_baseline=False)

    d = sub.add_parser("detect", help="segment a map into anomalies and welds")
    d.add_argument("--in", dest="inp", type=Path, required=True, help="input map")
    d.add_argument("--report", type=Path, required=True, help="key=value report")
    d.add_argument("--csv", type=Path, help="also write the CSV report")
    d.add_argument("--policy", choices=("otsu", "mean_plus_sigma"), default="otsu",
                   help="adaptive threshold policy (default %(default)s)")
    d.add_argument("--n-sigma", type=float, default=3.0, help="multiplier for mean_plus_sigma (default %(default)s)")
    d.add_argument("--truth", type=Path, help="synth config to score against")

    n = sub.add_parser("sensitivity", help="baseline error versus anomaly share")
    n.add_argument("--config", type=Path, help="synth config (default: ten-hole layout)")
    n.add_argument("--fractions", type=_float_list, default=[0.005, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2],
                   help="increasing anomaly shares (default %(default)s)")
    n.add_argument("--out", type=Path, required=True, help="output CSV")
    pd = ProbeSpec()
    n.add_argument("--probe-l", type=int, default=pd.l, help="probe window axial half-size (default %(default)s)")
    n.add_argument("--probe-w", type=int, default=pd.w, help="probe window circ half-size (default %(default)s)")
    n.add_argument("--probe-bins", type=int, default=pd.bins, help="probe histogram bins (default %(default)s)")
    n.add_argument("--probe-diameter", type=float, default=pd.diameter, help="probe hole diameter mm (default %(default)s)")
    n.add_argument("--probe-depth", type=float, default=pd.depth, help="probe hole depth mm (default %(default)s)")
    n.add_argument("--probe-inside", type=float, default=pd.inside,
                   help="target share of probe cells inside the hole (default %(default)s)")
    n.add_argument("--k", type=int, default=pd.k, help="baseline bins (default %(default)s)")

    w = sub.add_parser("sweep", help="window-size study")
    w.add_argument("--in", dest="inp", type=Path, required=True, help="input grid")
    w.add_argument("--l-list", type=_int_list, default=[10, 60, 200], help="axial half-sizes (default 10,60,200)")
    w.add_argument("--w-list", type=_int_list, default=[0, 1, 3], help="circ half-sizes (default 0,1,3)")
    w.add_argument("--out-dir", type=Path, required=True, help="output directory")
    w.add_argument("--k", type=int, default=FilterConfig.k, help="baseline bins (default %(default)s)")
    w.add_argument("--bins", type=int, default=FilterConfig.bins_local, help="local bins (default %(default)s)")
    w.add_argument("--policy", choices=("otsu", "mean_plus_sigma"), default="otsu",
                   help="threshold policy (default %(default)s)")
    w.add_argument("--truth", type=Path, help="synth config to score against")
    w.add_argument("--workers", type=int, default=1, help="worker threads (default %(default)s)")

    r = sub.add_parser("render", help="colour-map image of a grid or map")
    r.add_argument("--in", dest="inp", type=Path, required=True, help="input grid or map")
    r.add_argument("--out", type=Path, required=True, help="output .pgm/.ppm")
    r.add_argument("--palette", choices=("heat", "grayscale"), default="heat", help="(default %(default)s)")
    r.add_argument("--scale", choices=("linear", "rank"), default="linear", help="(default %(default)s)")
    r.add_argument("--lo", type=float, help="value mapped to the bottom of the palette")
    r.add_argument("--hi", type=float, help="value mapped to the top of the palette")
    return p


def _filter_config(a) -> FilterConfig:
    return FilterConfig(
        l=a.l,
        w=a.w,
        k=getattr(a, "k", FilterConfig.k),
        bins_local=a.bins,
        log_base=a.log_base,
        smoothing=getattr(a, "smoothing", FilterConfig.smoothing),
        epsilon=getattr(a, "epsilon", None),
        boundary=a.boundary,
        representative=getattr(a, "representative", FilterConfig.representative),
    )


def _save_map(kmap: KldMap, grid: ScanGrid, path: Path):
    save_grid(kmap.as_grid(grid), path)


def _cmd_synth(a):
    cfg = read_config(a.config) if a.config else reference_layout()
    if a.seed is not None:
        cfg = with_seed(cfg, a.seed)
    grid = generate_scan(cfg)
    save_grid(grid, a.out, format=a.format)
    if a.truth_mask:
        write_mask_pgm(footprint_mask(cfg), a.truth_mask)
    if a.dump_config:
        write_config(cfg, a.dump_config)
    log.info("wrote %dx%d scan to %s", grid.n_axial, grid.n_circ, a.out)


def _cmd_filter(a):
    grid = load_grid(a.inp)
    cfg = _filter_config(a)
    if a.noise:
        noise = load_grid(a.noise)
        q = baseline_from_noise(noise, cfg.k)
    else:
        q = baseline_from_all(grid, cfg.k)
    kmap = local_kld_map(grid, q, cfg, workers=a.workers)
    if kmap.negative_cells:
        log.warning("%d cells have negative divergence (misaligned bins)", kmap.negative_cells)
    _save_map(kmap, grid, a.out)


def _cmd_entropy(a):
    grid = load_grid(a.inp)
    kmap = local_entropy_map(grid, _filter_config(a), workers=a.workers)
    _save_map(kmap, grid, a.out)


def _score_lines(report: AnomalyReport, truth_path: Path) -> str:
    m = score_against_truth(report, read_config(truth_path))
    return (
        f"truth.tp={m.tp}\ntruth.fp={m.fp}\ntruth.fn={m.fn}\n"
        f"truth.weld_hits={m.weld_hits}\ntruth.rank_correlation={m.rank_correlation!r}\n"
        f"truth.size_correlation={m.size_correlation!r}\n"
    )


def _cmd_detect(a):
    grid = load_grid(a.inp)
    report = segment(grid, policy=a.policy, n_sigma=a.n_sigma)
    text = report_text(report)
    if a.truth:
        text += _score_lines(report, a.truth)
    a.report.write_text(text)
    if a.csv:
        a.csv.write_text(report_csv(report, grid.circ_pitch))
    print(f"{len(report.anomalies)} anomalies, {len(report.welds)} welds, threshold {report.threshold_used:.6g}")


def _cmd_sensitivity(a):
    cfg = read_config(a.config) if a.config else reference_layout()
    probe = ProbeSpec(a.probe_l, a.probe_w, a.probe_bins, a.probe_diameter, a.probe_depth, a.probe_inside, a.k)
    reports = sensitivity_sweep(cfg, a.fractions, probe)
    a.out.write_text(sweep_csv(reports))
    if reports:
        print(reports[0].probe_description)


def _cmd_sweep(a):
    grid = load_grid(a.inp)
    truth = read_config(a.truth) if a.truth else None
    a.out_dir.mkdir(parents=True, exist_ok=True)
    q = baseline_from_all(grid, a.k)
    rows = ["l,w,anomalies,welds,tp,fp,fn,rank_correlation,size_correlation"]
    for l in a.l_list:
        for w in a.w_list:
            cfg = FilterConfig(l=l, w=w, k=a.k, bins_local=a.bins)
            kmap = local_kld_map(grid, q, cfg, workers=a.workers)
            stem = a.out_dir / f"kld_l{l}_w{w}"
            _save_map(kmap, grid, stem.with_suffix(".csv"))
            report = segment(kmap, policy=a.policy)
            stem.with_name(stem.name + "_report.txt").write_text(report_text(report))
            if truth is not None:
                m = score_against_truth(report, truth)
                score = f"{m.tp},{m.fp},{m.fn},{m.rank_correlation!r},{m.size_correlation!r}"
            else:
                score = ",,,,"
            rows.append(f"{l},{w},{len(report.anomalies)},{len(report.welds)},{score}")
            log.info("l=%d w=%d: %d anomalies", l, w, len(report.anomalies))
    (a.out_dir / "summary.csv").write_text("\n".join(rows) + "\n")


def _cmd_render(a):
    grid = load_grid(a.inp)
    render_map(grid.values, ColorMapSpec(a.palette, a.scale, a.lo, a.hi), a.out)


COMMANDS = {
    "synth": _cmd_synth,
    "filter": _cmd_filter,
    "entropy": _cmd_entropy,
    "detect": _cmd_detect,
    "sensitivity": _cmd_sensitivity,
    "sweep": _cmd_sweep,
    "render": _cmd_render,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"kldfilter {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())
