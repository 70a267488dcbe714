"""Ground-truth comparison of a mapped grid.

Samples the true surface on an equidistant xy lattice, looks up the
nearest grid cell for each sample, and aggregates the height error
z_hat - z_true over cells whose posterior variance is at or below the
threshold.  Unmapped cells (variance above the threshold) are excluded.

The reported standard deviation is the population standard deviation of
the signed errors over the counted cells.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NoCountedCells
from .grid import HeightGrid
from .simulator import SurfaceModel


@dataclass(frozen=True)
class EvaluationConfig:
    spacing: float = 5.0
    cov_threshold: float = 1e4

    def __post_init__(self):
        if self.spacing <= 0 or self.cov_threshold <= 0:
            raise ValueError("spacing and cov_threshold must be positive")


@dataclass(frozen=True)
class EvaluationReport:
    mask_kind: str
    mean_abs_err: float
    max_abs_err: float
    std_dev: float
    counted: int
    excluded: int


def _sample_lattice(grid: HeightGrid, model: SurfaceModel, spacing: float):
    spec = grid.spec
    (dx0, dx1), (dy0, dy1) = model.domain
    x0, x1 = max(spec.x_min, dx0), min(spec.x_max, dx1)
    y0, y1 = max(spec.y_min, dy0), min(spec.y_max, dy1)
    if x1 <= x0 or y1 <= y0:
        raise ValueError("grid and surface domains do not overlap")
    xs = x0 + spacing * np.arange(int((x1 - x0) / spacing + 1e-9) + 1)
    ys = y0 + spacing * np.arange(int((y1 - y0) / spacing + 1e-9) + 1)
    return np.meshgrid(xs, ys, indexing="ij")


def evaluate(grid: HeightGrid, model: SurfaceModel,
             config: EvaluationConfig = EvaluationConfig(),
             mask_kind: str = "") -> EvaluationReport:
    """Error statistics of the grid against the ground-truth model."""
    sx, sy = _sample_lattice(grid, model, config.spacing)
    spec = grid.spec
    pairs = [(spec.coord_to_nearest_index(x, y), x, y)
             for x, y in zip(sx.ravel(), sy.ravel())]
    errors = []
    excluded = 0
    for (i, j), x, y in pairs:
        if grid.p_hat[i, j] > config.cov_threshold:
            excluded += 1
            continue
        errors.append(grid.z_hat[i, j] - float(model.height(x, y)))
    if not errors:
        raise NoCountedCells(
            f"all {len(pairs)} sample points filtered at threshold "
            f"{config.cov_threshold}"
        )
    errors = np.asarray(errors)
    return EvaluationReport(
        mask_kind=mask_kind,
        mean_abs_err=float(np.mean(np.abs(errors))),
        max_abs_err=float(np.max(np.abs(errors))),
        std_dev=float(np.std(errors)),  # population convention
        counted=len(errors),
        excluded=excluded,
    )


def error_map(grid: HeightGrid, model: SurfaceModel,
              cov_threshold: float = 1e4) -> np.ndarray:
    """Signed per-cell error z_hat - z_true; NaN where filtered or off-domain.

    Shares the grid's (N, M) layout; exportable with the grid file writers.
    """
    spec = grid.spec
    gx, gy = np.meshgrid(spec.x_coords(), spec.y_coords(), indexing="ij")
    out = np.full((spec.nx, spec.ny), np.nan)
    inside = model.in_domain(gx, gy)
    keep = inside & (grid.p_hat <= cov_threshold)
    truth = np.where(inside, model.height(gx, gy), 0.0)
    out[keep] = grid.z_hat[keep] - truth[keep]
    return out


def write_report_csv(path, reports: list[EvaluationReport]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mask", "mean_abs_err_mm", "max_abs_err_mm",
                         "std_dev_mm", "counted", "excluded"])
        for r in reports:
            writer.writerow([r.mask_kind, r.mean_abs_err, r.max_abs_err,
                             r.std_dev, r.counted, r.excluded])


def format_report_table(reports: list[EvaluationReport]) -> str:
    lines = [
        "mask             mean err   max err   std dev   counted  excluded",
        "-" * 66,
    ]
    for r in reports:
        lines.append(
            f"{r.mask_kind:<16} {r.mean_abs_err:8.3f}  {r.max_abs_err:8.3f}  "
            f"{r.std_dev:8.3f}  {r.counted:7d}  {r.excluded:8d}"
        )
    return "\n".join(lines)
