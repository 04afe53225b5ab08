"""Scan grids: 2D proximity readings on an unwrapped cylindrical surface.

Row index ``i`` runs along the pipe axis, column index ``j`` around the
circumference.  Indices are 0-based.  Cell ``(i, j)`` is centred at
``((i + 0.5) * axial_pitch, (j + 0.5) * circ_pitch)``.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "GridError",
    "GridFormatError",
    "ScanGrid",
    "load_grid",
    "save_grid",
    "window_subset",
    "window_rows",
    "window_cols",
]

MAGIC = b"KLDG"
VERSION = 1
_HEADER = struct.Struct("<4sBqqdddq")

QUANT_TOL = 1e-9


class GridError(ValueError):
    """Invalid grid contents or arguments."""


class GridFormatError(GridError):
    """A grid file does not conform to its format."""


@dataclass(frozen=True, eq=False)
class ScanGrid:
    """Dense 2D array of readings in millimetres.

    ``quantization == 0`` marks an unquantized field (used for KLD maps that
    share the file format).
    """

    values: np.ndarray
    axial_pitch: float = 1.0
    circ_pitch: float = 1.0
    quantization: float = 0.1
    periodic_circ: bool = True

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise GridError(f"values must be 2D, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise GridError(f"grid must be at least 1x1, got {values.shape}")
        if np.isnan(values).any():
            r, c = np.argwhere(np.isnan(values))[0]
            raise GridError(f"NaN reading at cell ({r}, {c})")
        if self.quantization < 0:
            raise GridError("quantization must be >= 0")
        if self.quantization > 0:
            bad = off_lattice(values, self.quantization)
            if bad is not None:
                r, c = bad
                raise GridError(
                    f"cell ({r}, {c}) value {values[r, c]!r} is not a multiple of "
                    f"quantization {self.quantization}"
                )
            values = quantize(values, self.quantization)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_axial(self) -> int:
        return self.values.shape[0]

    @property
    def n_circ(self) -> int:
        return self.values.shape[1]

    def same_geometry(self, values: np.ndarray, quantization: float | None = None) -> "ScanGrid":
        """New grid with this grid's pitches and wrap flag."""
        return ScanGrid(
            values,
            axial_pitch=self.axial_pitch,
            circ_pitch=self.circ_pitch,
            quantization=self.quantization if quantization is None else quantization,
            periodic_circ=self.periodic_circ,
        )

    def __eq__(self, other):
        if not isinstance(other, ScanGrid):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.values, other.values)
            and self.axial_pitch == other.axial_pitch
            and self.circ_pitch == other.circ_pitch
            and self.quantization == other.quantization
            and self.periodic_circ == other.periodic_circ
        )

    __hash__ = None


def off_lattice(values: np.ndarray, q: float):
    """First cell not on the ``q`` lattice (within 1e-9 mm), or None."""
    err = np.abs(values - np.round(values / q) * q)
    err = np.where(np.isfinite(values), err, np.inf)
    bad = err > QUANT_TOL
    if bad.any():
        return tuple(int(x) for x in np.argwhere(bad)[0])
    return None


def quantize(values: np.ndarray, q: float) -> np.ndarray:
    """Round to the ``q`` lattice so that decimal text round-trips exactly."""
    inv = 1.0 / q
    scale = round(inv)
    if scale > 0 and abs(inv - scale) < 1e-9:
        return np.rint(values * scale) / scale
    return np.rint(values / q) * q


def _decimals(q: float) -> int | None:
    if q <= 0:
        return None
    d = -math.log10(q)
    if abs(d - round(d)) < 1e-9 and round(d) >= 0:
        return int(round(d))
    return None


# ---------------------------------------------------------------------------
# windows


def window_rows(n: int, i: int, l: int, axial: str = "clip") -> tuple[int, int]:
    """Half-open row range of the window centred on row ``i``.

    ``clip`` truncates at the grid edge; ``shift`` slides the window inward so
    it keeps ``2l + 1`` rows whenever the grid is tall enough.
    """
    r0, r1 = i - l, i + l + 1
    if axial == "clip":
        return max(0, r0), min(n, r1)
    if axial == "shift":
        if r1 - r0 >= n:
            return 0, n
        if r0 < 0:
            return 0, r1 - r0
        if r1 > n:
            return n - (r1 - r0), n
        return r0, r1
    raise GridError(f"unknown axial boundary policy {axial!r}")


def window_cols(m: int, j: int, w: int, periodic: bool = True) -> np.ndarray:
    """Column indices of the window centred on column ``j``, without duplicates."""
    if periodic:
        if 2 * w + 1 >= m:
            return np.arange(m)
        return np.arange(j - w, j + w + 1) % m
    return np.arange(max(0, j - w), min(m, j + w + 1))


def window_subset(grid: ScanGrid, i: int, j: int, l: int, w: int, axial: str = "clip") -> np.ndarray:
    """Readings of the ``(2l+1) x (2w+1)`` window centred on ``(i, j)``."""
    n, m = grid.shape
    if not (0 <= i < n and 0 <= j < m):
        raise GridError(f"window centre ({i}, {j}) outside grid of shape {grid.shape}")
    if l < 0 or w < 0:
        raise GridError("window half-sizes must be >= 0")
    r0, r1 = window_rows(n, i, l, axial)
    cols = window_cols(m, j, w, grid.periodic_circ)
    return grid.values[r0:r1][:, cols].ravel()


# ---------------------------------------------------------------------------
# file I/O


def _fmt(v: float, decimals: int | None) -> str:
    if decimals is not None and math.isfinite(v):
        return f"{v:.{decimals}f}"
    return repr(float(v))


def save_grid(grid: ScanGrid, path, format: str = "csv") -> None:
    path = Path(path)
    try:
        if format == "csv":
            path.write_bytes(_csv_bytes(grid))
        elif format == "binary":
            path.write_bytes(_binary_bytes(grid))
        else:
            raise GridError(f"unknown grid format {format!r}")
    except OSError as exc:
        raise OSError(f"cannot write grid to {path}: {exc.strerror or exc}") from exc


def _csv_bytes(grid: ScanGrid) -> bytes:
    n, m = grid.shape
    dec = _decimals(grid.quantization)
    lines = [
        ",".join(
            [
                str(n),
                str(m),
                repr(float(grid.axial_pitch)),
                repr(float(grid.circ_pitch)),
                repr(float(grid.quantization)),
                "true" if grid.periodic_circ else "false",
            ]
        )
    ]
    for row in grid.values:
        lines.append(",".join(_fmt(v, dec) for v in row.tolist()))
    return ("\n".join(lines) + "\n").encode("ascii")


def _binary_bytes(grid: ScanGrid) -> bytes:
    n, m = grid.shape
    head = _HEADER.pack(
        MAGIC,
        VERSION,
        n,
        m,
        float(grid.axial_pitch),
        float(grid.circ_pitch),
        float(grid.quantization),
        int(bool(grid.periodic_circ)),
    )
    return head + grid.values.astype("<f8").tobytes(order="C")


def load_grid(path, format: str | None = None) -> ScanGrid:
    """Read a grid file; ``format`` defaults to sniffing the magic bytes."""
    path = Path(path)
    data = path.read_bytes()
    if format is None:
        format = "binary" if data[:4] == MAGIC else "csv"
    if format == "binary":
        return _parse_binary(data, path)
    if format == "csv":
        return _parse_csv(data, path)
    raise GridError(f"unknown grid format {format!r}")


def _parse_binary(data: bytes, path: Path) -> ScanGrid:
    if len(data) < _HEADER.size:
        raise GridFormatError(f"{path}: truncated header")
    magic, version, n, m, ap, cp, q, periodic = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise GridFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise GridFormatError(f"{path}: unsupported version {version}")
    if n < 1 or m < 1:
        raise GridFormatError(f"{path}: bad dimensions {n}x{m}")
    expected = _HEADER.size + 8 * n * m
    if len(data) != expected:
        raise GridFormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(n, m)
    return _build(values, ap, cp, q, bool(periodic), path)


def _parse_csv(data: bytes, path: Path) -> ScanGrid:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise GridFormatError(f"{path}: not ASCII text") from exc
    lines = text.splitlines()
    if not lines:
        raise GridFormatError(f"{path}: empty file")
    head = lines[0].split(",")
    if len(head) != 6:
        raise GridFormatError(f"{path}: header must have 6 fields, found {len(head)}")
    try:
        n, m = int(head[0]), int(head[1])
        ap, cp, q = float(head[2]), float(head[3]), float(head[4])
    except ValueError as exc:
        raise GridFormatError(f"{path}: malformed header {lines[0]!r}") from exc
    flag = head[5].strip().lower()
    if flag not in ("true", "false"):
        raise GridFormatError(f"{path}: periodic flag must be true/false, got {head[5]!r}")
    if n < 1 or m < 1:
        raise GridFormatError(f"{path}: bad dimensions {n}x{m}")
    rows = [ln for ln in lines[1:] if ln.strip()]
    if len(rows) != n:
        raise GridFormatError(f"{path}: ragged grid, header declares {n} rows, found {len(rows)}")
    values = np.empty((n, m))
    for r, ln in enumerate(rows):
        cells = ln.split(",")
        if len(cells) != m:
            raise GridFormatError(
                f"{path}: ragged row {r}: declared {m} cells, found {len(cells)}"
            )
        for c, cell in enumerate(cells):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise GridFormatError(f"{path}: non-numeric cell ({r}, {c}): {cell!r}") from None
    return _build(values, ap, cp, q, flag == "true", path)


def _build(values, ap, cp, q, periodic, path) -> ScanGrid:
    if np.isnan(values).any():
        r, c = np.argwhere(np.isnan(values))[0]
        raise GridFormatError(f"{path}: NaN in cell ({r}, {c})")
    if q > 0:
        bad = off_lattice(values, q)
        if bad is not None:
            r, c = bad
            raise GridFormatError(
                f"{path}: cell ({r}, {c}) value {values[r, c]!r} is off the {q} mm lattice"
            )
    return ScanGrid(values, axial_pitch=ap, circ_pitch=cp, quantization=q, periodic_circ=periodic)
