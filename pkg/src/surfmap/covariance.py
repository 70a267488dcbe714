"""Heuristic measurement covariance from a sum of Gaussian RBFs.

The variance attached to the plane-derived height measurement at a grid
point grows with its distance from the measurement points: each point is
the center of a Gaussian kernel, and

    R = (R_max - R_min) / L * (1 - sum_l exp(-alpha * |d_l|^2)) + R_min

clamped to [R_min, R_max].  With isolated kernels R equals R_min at a
measurement point; far from all points the unclamped value is
(R_max - R_min) / L + R_min, which reaches R_max only for L = 1.

The displacement d_l is measured in the approximation plane by default
('plane' mode): the grid point is lifted onto the plane and the
measurement point's out-of-plane component is removed.  'xy' mode uses
plain xy-plane displacements instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Plane, plane_height_at

DISTANCE_MODES = ("plane", "xy")


@dataclass(frozen=True)
class CovarianceParams:
    r_min: float = 10.0
    r_max: float = 1e4
    alpha: float = 0.1  # 1/mm^2
    distance_mode: str = "plane"

    def __post_init__(self):
        if not (self.r_max > self.r_min > 0):
            raise ValueError("need r_max > r_min > 0")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.distance_mode not in DISTANCE_MODES:
            raise ValueError(f"distance_mode must be one of {DISTANCE_MODES}")


def rbf_covariance(x, y, plane: Plane, points, params: CovarianceParams):
    """Covariance R at grid coordinates (x, y); vectorized over arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pts = np.asarray(points, dtype=float)
    L = len(pts)

    if params.distance_mode == "plane":
        z = plane_height_at(plane, x, y)
        p0s = np.stack([x, y, np.broadcast_to(z, x.shape)], axis=-1)  # (..., 3)
        n = plane.normal
        # d_l = p_l - ((p_l - p0s) . n) n - p0s  (in-plane displacement)
        diff = pts.reshape((1,) * x.ndim + (L, 3)) - p0s[..., None, :]
        out_of_plane = diff @ n
        d = diff - out_of_plane[..., None] * n
        sq = np.sum(d * d, axis=-1)  # (..., L)
    else:
        dx = x[..., None] - pts[:, 0]
        dy = y[..., None] - pts[:, 1]
        sq = dx * dx + dy * dy

    kernels = np.exp(-params.alpha * sq).sum(axis=-1)
    raw = (params.r_max - params.r_min) / L * (1.0 - kernels) + params.r_min
    return np.clip(raw, params.r_min, params.r_max)


@dataclass(frozen=True)
class CovarianceField:
    """R values for the masked cells, aligned with (idx_i, idx_j)."""

    idx_i: np.ndarray
    idx_j: np.ndarray
    values: np.ndarray


def covariance_field(mask, plane: Plane, points, params: CovarianceParams) -> CovarianceField:
    """Evaluate :func:`rbf_covariance` on every set cell of the mask."""
    idx_i, idx_j = np.nonzero(mask.bits)
    spec = mask.spec
    x = spec.x_min + spec.h_x * idx_i
    y = spec.y_min + spec.h_y * idx_j
    if len(idx_i) == 0:
        return CovarianceField(idx_i, idx_j, np.empty(0))
    values = rbf_covariance(x, y, plane, points, params)
    return CovarianceField(idx_i, idx_j, values)
