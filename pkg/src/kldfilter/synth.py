"""Synthetic pipe-inspection scans.

A rotating distance sensor on the pipe axis samples the inner wall every
1 mm axially and every 1 degree around.  Holes make the wall farther away
(reading rises by the hole depth); a weld bead protrudes inward across the
whole circumference (reading drops).  Gaussian noise is added and the result
is quantized like the sensor output.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .grid import ScanGrid, quantize

__all__ = [
    "ConfigError",
    "HoleSpec",
    "WeldSpec",
    "SynthConfig",
    "reference_layout",
    "noise_sigma",
    "clean_scan",
    "generate_scan",
    "hole_cells",
    "hole_masks",
    "footprint_mask",
    "anomaly_fraction",
    "read_config",
    "write_config",
    "config_text",
    "write_mask_pgm",
]

N_CIRC = 360


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class HoleSpec:
    center_axial: float  # mm
    center_circ: float  # degrees
    diameter: float  # mm
    depth: float  # mm; negative for a bump that reads nearer

    @property
    def through(self) -> bool:
        return self.depth > 0 and abs(self.depth) >= 2.0 - 1e-12


@dataclass(frozen=True)
class WeldSpec:
    center_axial: float
    width: float = 10.0
    depth: float = 2.0


@dataclass(frozen=True)
class SynthConfig:
    pipe_inner_diameter: float = 400.0
    wall_thickness: float = 2.0
    axial_length: float = 1000.0
    nominal_standoff: float = 100.0
    snr_db: float = 50.0
    quantization: float = 0.1
    holes: tuple[HoleSpec, ...] = ()
    weld: WeldSpec | None = None
    seed: int = 0
    axial_pitch: float = 1.0
    circ_pitch: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "holes", tuple(self.holes))
        for name in ("pipe_inner_diameter", "wall_thickness", "axial_length",
                     "nominal_standoff", "axial_pitch", "circ_pitch"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.quantization < 0:
            raise ConfigError("quantization must be >= 0")
        if math.isnan(self.snr_db):
            raise ConfigError("snr_db must not be NaN")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if abs(360.0 / self.circ_pitch - round(360.0 / self.circ_pitch)) > 1e-9:
            raise ConfigError("circ_pitch must divide 360 degrees")
        for n, h in enumerate(self.holes):
            if not h.diameter > 0:
                raise ConfigError(f"hole {n}: diameter must be > 0")
            if h.depth == 0 or abs(h.depth) > self.wall_thickness:
                raise ConfigError(f"hole {n}: depth must be nonzero and at most the wall thickness")
            r = h.diameter / 2
            if h.center_axial - r < 0 or h.center_axial + r > self.axial_length:
                raise ConfigError(f"hole {n}: footprint leaves the axial extent")
            if not 0 <= h.center_circ < 360:
                raise ConfigError(f"hole {n}: center_circ must be in [0, 360)")
        if self.weld is not None:
            if not self.weld.width > 0:
                raise ConfigError("weld width must be > 0")
            if not 0 <= self.weld.center_axial <= self.axial_length:
                raise ConfigError("weld center outside the axial extent")
        for a in range(len(self.holes)):
            for b in range(a + 1, len(self.holes)):
                if _overlap(self.holes[a], self.holes[b], self.radius):
                    raise ConfigError(f"holes {a} and {b} overlap")

    @property
    def radius(self) -> float:
        return self.pipe_inner_diameter / 2

    @property
    def shape(self) -> tuple[int, int]:
        return int(round(self.axial_length / self.axial_pitch)), int(round(360.0 / self.circ_pitch))


def _arc(deg: float, radius: float) -> float:
    return math.radians(deg) * radius


def _overlap(a: HoleSpec, b: HoleSpec, radius: float) -> bool:
    dtheta = abs(a.center_circ - b.center_circ) % 360
    dtheta = min(dtheta, 360 - dtheta)
    d = math.hypot(a.center_axial - b.center_axial, _arc(dtheta, radius))
    return d < (a.diameter + b.diameter) / 2


def reference_layout(seed: int = 0) -> SynthConfig:
    """Ten holes and a weld on a 1000 mm x 360 deg section.

    Through holes of 5, 10 and 15 mm and blind holes of 10 and 15 mm sit on
    two rings (200 mm and 800 mm) every 72 degrees, with a weld at mid-length.
    There is no 5 mm blind hole: at 50 dB it is indistinguishable from noise.
    The 10 mm holes sit on a cell centre so their area is not split over an
    extra column.
    """
    through = [(200, 36, 5), (200, 108.5, 10), (200, 180, 15), (800, 252, 15), (800, 324, 15)]
    blind = [(800, 36, 15), (800, 108.5, 10), (800, 180, 15), (200, 252, 15), (200, 324, 15)]
    holes = [HoleSpec(a, c, d, 2.0) for a, c, d in through]
    holes += [HoleSpec(a, c, d, 1.0) for a, c, d in blind]
    return SynthConfig(holes=tuple(holes), weld=WeldSpec(500.0, 10.0, 2.0), seed=seed)


paper_layout = reference_layout


def noise_sigma(config: SynthConfig) -> float:
    """Noise standard deviation from SNR_dB = 20 log10(standoff / sigma)."""
    if math.isinf(config.snr_db) and config.snr_db > 0:
        return 0.0
    return config.nominal_standoff * 10 ** (-config.snr_db / 20)


def _cell_centres(config: SynthConfig):
    n, m = config.shape
    axial = (np.arange(n) + 0.5) * config.axial_pitch
    circ = (np.arange(m) + 0.5) * config.circ_pitch
    return axial, circ


def hole_cells(config: SynthConfig, hole: HoleSpec) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the cells whose centres lie in the hole disk."""
    n, m = config.shape
    ap, cp = config.axial_pitch, config.circ_pitch
    r = hole.diameter / 2
    rows = np.arange(max(0, int((hole.center_axial - r) / ap) - 1), min(n, int((hole.center_axial + r) / ap) + 2))
    half = min(math.degrees(r / config.radius), 180.0)
    c0 = int(math.floor((hole.center_circ - half) / cp)) - 1
    c1 = int(math.floor((hole.center_circ + half) / cp)) + 2
    cols = np.unique(np.arange(c0, c1) % m)
    da = (rows + 0.5) * ap - hole.center_axial
    dt = np.abs((cols + 0.5) * cp - hole.center_circ) % 360
    dt = np.minimum(dt, 360 - dt)
    ds = np.radians(dt) * config.radius
    inside = da[:, None] ** 2 + ds[None, :] ** 2 <= r**2
    ii, jj = np.nonzero(inside)
    return rows[ii], cols[jj]


def hole_masks(config: SynthConfig) -> list[np.ndarray]:
    """Boolean footprint of each hole (disk on the unrolled wall)."""
    out = []
    for h in config.holes:
        mask = np.zeros(config.shape, dtype=bool)
        mask[hole_cells(config, h)] = True
        out.append(mask)
    return out


def weld_mask(config: SynthConfig) -> np.ndarray:
    n, m = config.shape
    if config.weld is None:
        return np.zeros((n, m), dtype=bool)
    axial, _ = _cell_centres(config)
    rows = np.abs(axial - config.weld.center_axial) <= config.weld.width / 2
    return np.broadcast_to(rows[:, None], (n, m)).copy()


def footprint_mask(config: SynthConfig, include_weld: bool = True) -> np.ndarray:
    n, m = config.shape
    mask = np.zeros((n, m), dtype=bool)
    for h in config.holes:
        mask[hole_cells(config, h)] = True
    if include_weld:
        mask |= weld_mask(config)
    return mask


def anomaly_fraction(config: SynthConfig) -> float:
    """Share of cells inside hole footprints."""
    mask = footprint_mask(config, include_weld=False)
    return float(mask.mean())


def clean_scan(config: SynthConfig) -> np.ndarray:
    n, m = config.shape
    values = np.full((n, m), float(config.nominal_standoff))
    for h in config.holes:
        values[hole_cells(config, h)] += h.depth
    if config.weld is not None:
        values[weld_mask(config)] -= config.weld.depth
    return values


def generate_scan(config: SynthConfig) -> ScanGrid:
    """Noisy quantized scan; the noise stream is PCG64 drawn row-major."""
    values = clean_scan(config)
    sigma = noise_sigma(config)
    if sigma > 0:
        rng = np.random.default_rng(config.seed)
        values = values + sigma * rng.standard_normal(values.shape)
    if config.quantization > 0:
        values = quantize(values, config.quantization)
    return ScanGrid(
        values,
        axial_pitch=config.axial_pitch,
        circ_pitch=config.circ_pitch,
        quantization=config.quantization,
        periodic_circ=True,
    )


# ---------------------------------------------------------------------------
# config files

_PIPE = ("pipe_inner_diameter", "wall_thickness", "axial_length", "axial_pitch", "circ_pitch")
_SENSOR = ("nominal_standoff", "snr_db", "quantization")


def config_text(config: SynthConfig) -> str:
    cp = configparser.ConfigParser()
    cp["pipe"] = {k: repr(float(getattr(config, k))) for k in _PIPE}
    cp["sensor"] = {k: repr(float(getattr(config, k))) for k in _SENSOR}
    cp["run"] = {"seed": str(config.seed)}
    if config.weld is not None:
        cp["weld"] = {k: repr(float(v)) for k, v in asdict(config.weld).items()}
    for n, h in enumerate(config.holes):
        cp[f"hole.{n}"] = {k: repr(float(v)) for k, v in asdict(h).items()}
    lines = []
    for sec in cp.sections():
        lines.append(f"[{sec}]")
        lines += [f"{k} = {v}" for k, v in cp[sec].items()]
        lines.append("")
    return "\n".join(lines)


def write_config(config: SynthConfig, path) -> None:
    Path(path).write_text(config_text(config))


def read_config(path) -> SynthConfig:
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    kw = {}
    try:
        for sec, keys in (("pipe", _PIPE), ("sensor", _SENSOR)):
            if cp.has_section(sec):
                for k in keys:
                    if k in cp[sec]:
                        kw[k] = cp[sec].getfloat(k)
        if cp.has_section("run") and "seed" in cp["run"]:
            kw["seed"] = cp["run"].getint("seed")
        if cp.has_section("weld"):
            kw["weld"] = WeldSpec(**{k: float(v) for k, v in cp["weld"].items()})
        holes = []
        for sec in sorted((s for s in cp.sections() if s.startswith("hole.")),
                          key=lambda s: int(s.split(".", 1)[1])):
            holes.append(HoleSpec(**{k: float(v) for k, v in cp[sec].items()}))
        kw["holes"] = tuple(holes)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None
    return SynthConfig(**kw)


def write_mask_pgm(mask: np.ndarray, path) -> None:
    """Binary PGM of a footprint mask, 255 inside."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    data = np.where(mask, 255, 0).astype(np.uint8)
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + data.tobytes())


def with_seed(config: SynthConfig, seed: int) -> SynthConfig:
    return replace(config, seed=seed)
