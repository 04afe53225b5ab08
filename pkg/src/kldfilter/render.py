"""Colour-map images of grids and divergence maps as binary PGM/PPM."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

__all__ = ["ColorMapSpec", "HEAT", "normalize", "to_pixels", "render_bytes", "render_map"]

log = logging.getLogger(__name__)


def _heat_table() -> np.ndarray:
    # black -> red -> yellow -> white
    t = np.arange(256) / 255.0
    r = np.clip(3 * t, 0, 1)
    g = np.clip(3 * t - 1, 0, 1)
    b = np.clip(3 * t - 2, 0, 1)
    return np.rint(np.stack([r, g, b], axis=1) * 255).astype(np.uint8)


HEAT = _heat_table()


@dataclass(frozen=True)
class ColorMapSpec:
    palette: str = "heat"
    scale: str = "linear"
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.palette not in ("grayscale", "heat"):
            raise ValueError("palette must be 'grayscale' or 'heat'")
        if self.scale not in ("linear", "rank"):
            raise ValueError("scale must be 'linear' or 'rank'")
        if self.lo is not None and self.hi is not None and not self.lo < self.hi:
            raise ValueError("lo must be < hi")


def normalize(values, spec: ColorMapSpec) -> np.ndarray:
    """Map values to [0, 1].  Infinities are clamped to the top of the range."""
    v = np.array(values, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError("values must be 2D")
    if np.isnan(v).any():
        raise ValueError("cannot render NaN values")
    inf = np.isinf(v)
    if inf.any():
        log.warning("clamping %d infinite value(s) to the top of the range", int(inf.sum()))
    if spec.scale == "rank":
        finite = v[~inf]
        top = finite.max() if finite.size else 0.0
        v = np.where(v == np.inf, top, np.where(v == -np.inf, finite.min() if finite.size else 0.0, v))
        r = rankdata(v, method="min").reshape(v.shape) - 1.0
        top_rank = r.max()
        return r / top_rank if top_rank > 0 else np.zeros_like(r)
    finite = v[~inf]
    lo = spec.lo if spec.lo is not None else (float(finite.min()) if finite.size else 0.0)
    hi = spec.hi if spec.hi is not None else (float(finite.max()) if finite.size else 0.0)
    v = np.where(v == np.inf, hi, np.where(v == -np.inf, lo, v))
    if hi <= lo:
        return np.zeros_like(v)
    return np.clip((v - lo) / (hi - lo), 0.0, 1.0)


def to_pixels(values, spec: ColorMapSpec) -> np.ndarray:
    """8-bit levels, one per cell."""
    u = normalize(values, spec)
    return np.clip(np.floor(u * 256), 0, 255).astype(np.uint8)


def render_bytes(values, spec: ColorMapSpec = ColorMapSpec()) -> bytes:
    px = to_pixels(values, spec)
    h, w = px.shape
    if spec.palette == "grayscale":
        return f"P5\n{w} {h}\n255\n".encode("ascii") + px.tobytes()
    return f"P6\n{w} {h}\n255\n".encode("ascii") + HEAT[px].tobytes()


def render_map(values, spec: ColorMapSpec, path) -> None:
    """Write a P5 (grayscale) or P6 (heat) image, row i = axial position."""
    data = render_bytes(values, spec)
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise OSError(f"cannot write image {path}: {exc.strerror or exc}") from exc
