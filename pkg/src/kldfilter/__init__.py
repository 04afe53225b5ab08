"""Local Kullback-Leibler divergence filter for 2D inspection scans."""
from .baseline import baseline_from_all, baseline_from_noise, sensitivity_delta, sensitivity_sweep
from .detect import AnomalyReport, score_against_truth, segment
from .grid import ScanGrid, load_grid, save_grid, window_subset
from .hist import Histogram, Pmf, build_histogram, pmf_from_histogram, pmf_from_sample
from .kldcore import FilterConfig, KldMap, kl_divergence, local_entropy_map, local_kld_map, shannon_entropy
from .render import ColorMapSpec, render_map
from .synth import HoleSpec, SynthConfig, WeldSpec, generate_scan, paper_layout, reference_layout

__version__ = "0.1.0"
