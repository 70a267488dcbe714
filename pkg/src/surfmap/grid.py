"""Height grid: the global surface representation.

The grid covers a rectangle in the inertial xy-plane.  Grid point (i, j)
lies at x_i = x_min + h_x * i (i = 0..N-1) and y_j = y_min + h_y * j
(j = 0..M-1) with h_x = (x_max - x_min) / N and h_y = (y_max - y_min) / M;
x_max and y_max themselves are not grid points.  Each cell carries a
height estimate z_hat (mm) and its variance p_hat.

Rasters are stored as (N, M) arrays indexed [i, j]; file exports write
M rows by N columns (one row per y).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import OutOfBounds


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("grid extent must be nonempty")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("cell counts must be >= 1")

    @property
    def h_x(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def h_y(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    def x_coords(self) -> np.ndarray:
        return self.x_min + self.h_x * np.arange(self.nx)

    def y_coords(self) -> np.ndarray:
        return self.y_min + self.h_y * np.arange(self.ny)

    def index_to_coord(self, i: int, j: int) -> tuple[float, float]:
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise OutOfBounds(f"index ({i}, {j}) outside {self.nx}x{self.ny} grid")
        return self.x_min + self.h_x * i, self.y_min + self.h_y * j

    def coord_to_nearest_index(self, x: float, y: float) -> tuple[int, int]:
        """Nearest grid index; ties between two cells go to the lower index."""
        if not (self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max):
            raise OutOfBounds(f"({x}, {y}) outside grid extent")
        i = math.ceil((x - self.x_min) / self.h_x - 0.5)
        j = math.ceil((y - self.y_min) / self.h_y - 0.5)
        return min(max(i, 0), self.nx - 1), min(max(j, 0), self.ny - 1)


class HeightGrid:
    """Per-cell height estimates and variances over a :class:`GridSpec`."""

    def __init__(self, spec: GridSpec, z_hat: np.ndarray, p_hat: np.ndarray):
        if z_hat.shape != (spec.nx, spec.ny) or p_hat.shape != (spec.nx, spec.ny):
            raise ValueError("cell array shape does not match grid spec")
        self.spec = spec
        self.z_hat = z_hat
        self.p_hat = p_hat

    def snapshot(self, field: str) -> np.ndarray:
        """Copy of one cell field ('height' or 'covariance')."""
        if field == "height":
            return self.z_hat.copy()
        if field == "covariance":
            return self.p_hat.copy()
        raise ValueError(f"unknown field {field!r}")


def new_grid(spec: GridSpec, z0: float = 0.0, p0: float = 1e6) -> HeightGrid:
    """Fresh grid with every cell at (z0, p0); p0 must be positive."""
    if not p0 > 0:
        raise ValueError("initial variance p0 must be > 0")
    return HeightGrid(
        spec,
        np.full((spec.nx, spec.ny), float(z0)),
        np.full((spec.nx, spec.ny), float(p0)),
    )


# ── file exports ─────────────────────────────────────────────────────

def _header_lines(spec: GridSpec) -> list[str]:
    return [
        "# surfmap grid export; M rows (y) x N columns (x), row-major in y",
        f"# x_min={spec.x_min} x_max={spec.x_max} y_min={spec.y_min} "
        f"y_max={spec.y_max} N={spec.nx} M={spec.ny}",
    ]


def save_csv(path, values: np.ndarray, spec: GridSpec) -> None:
    """CSV export; NaN cells are written as empty fields."""
    rows = values.T  # (M, N)
    with open(path, "w") as fh:
        for line in _header_lines(spec):
            fh.write(line + "\n")
        for row in rows:
            fh.write(",".join("" if np.isnan(v) else repr(float(v)) for v in row) + "\n")


def load_csv(path) -> tuple[np.ndarray, GridSpec]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    meta = {}
    data_lines = []
    for line in lines:
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=")
                    meta[k] = float(v)
        elif line.strip():
            data_lines.append(line)
    spec = GridSpec(
        meta["x_min"], meta["x_max"], meta["y_min"], meta["y_max"],
        int(meta["N"]), int(meta["M"]),
    )
    rows = [
        [float(f) if f != "" else math.nan for f in line.split(",")]
        for line in data_lines
    ]
    return np.asarray(rows).T, spec


def save_binary(path, values: np.ndarray, spec: GridSpec) -> None:
    """Raw little-endian float64, M rows x N columns, plus a JSON sidecar."""
    path = Path(path)
    values.T.astype("<f8").tofile(path)
    sidecar = {
        "x_min": spec.x_min, "x_max": spec.x_max,
        "y_min": spec.y_min, "y_max": spec.y_max,
        "N": spec.nx, "M": spec.ny,
        "dtype": "<f8", "layout": "row-major, M rows (y) x N columns (x)",
        "units": "mm",
    }
    path.with_suffix(path.suffix + ".meta.json").write_text(json.dumps(sidecar, indent=2))


def load_binary(path) -> tuple[np.ndarray, GridSpec]:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".meta.json").read_text())
    spec = GridSpec(
        meta["x_min"], meta["x_max"], meta["y_min"], meta["y_max"],
        meta["N"], meta["M"],
    )
    values = np.fromfile(path, dtype="<f8").reshape(spec.ny, spec.nx)
    return values.T, spec
