"""Per-cell scalar Kalman filters and the masked map update.

Every grid cell carries an independent one-state filter.  One local
plane approximation produces, for each masked cell, a height measurement
(the plane evaluated at the cell coordinates) and a measurement variance
(the RBF covariance); the cell's filter is then advanced one step.
Cells outside the mask are left untouched.

The update recursion for one cell with state (z, P):

    z- = f z           P- = f^2 P + Q
    S  = R + h^2 P-    K  = h P- / S
    z+ = z- + K (z_meas - h z-)
    P+ = (1 - K h) P-

with f = 1, h = 1, Q = 0 for a static surface (the defaults).
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from .covariance import CovarianceParams, rbf_covariance
from .errors import NonPositiveR
from .geometry import Plane, plane_height_at
from .grid import HeightGrid
from .masks import BinaryMask, check_shape


@dataclass(frozen=True)
class KFParams:
    f: float = 1.0
    h: float = 1.0
    q: float = 0.0

    def __post_init__(self):
        if self.q < 0:
            raise ValueError("process covariance q must be >= 0")
        if self.h == 0:
            raise ValueError("observation gain h must be nonzero")


def kf_cell_update(z_hat, p_hat, z_meas, r, params: KFParams = KFParams()):
    """One filter step; scalar or elementwise over equal-shaped arrays.

    Returns the posterior (z_hat, p_hat).
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise NonPositiveR("measurement variance must be > 0")
    f, h, q = params.f, params.h, params.q
    z_prior = f * np.asarray(z_hat, dtype=float)
    p_prior = f * f * np.asarray(p_hat, dtype=float) + q
    s = r + h * h * p_prior
    k = h * p_prior / s
    z_post = z_prior + k * (np.asarray(z_meas, dtype=float) - h * z_prior)
    p_post = (1.0 - k * h) * p_prior
    return z_post, p_post


@dataclass
class UpdateStats:
    cells: int
    r_min: float | None = None
    r_max: float | None = None


def masked_map_update(grid: HeightGrid, plane: Plane, points, mask: BinaryMask,
                      cov_params: CovarianceParams = CovarianceParams(),
                      kf_params: KFParams = KFParams(),
                      workers: int = 1) -> UpdateStats:
    """Apply one plane approximation to every masked cell of the grid.

    The masked cells may be partitioned across ``workers`` threads; each
    cell is read and written by exactly one worker, so the result is
    bit-identical for any worker count.
    """
    check_shape(mask, grid.spec)
    idx_i, idx_j = np.nonzero(mask.bits)
    n = len(idx_i)
    if n == 0:
        return UpdateStats(cells=0)

    spec = grid.spec
    pts = np.asarray(points, dtype=float)

    def run_chunk(sl):
        ii, jj = idx_i[sl], idx_j[sl]
        x = spec.x_min + spec.h_x * ii
        y = spec.y_min + spec.h_y * jj
        z_meas = plane_height_at(plane, x, y)
        r = rbf_covariance(x, y, plane, pts, cov_params)
        z_post, p_post = kf_cell_update(
            grid.z_hat[ii, jj], grid.p_hat[ii, jj], z_meas, r, kf_params
        )
        grid.z_hat[ii, jj] = z_post
        grid.p_hat[ii, jj] = p_post
        return float(r.min()), float(r.max())

    workers = max(1, int(workers))
    if workers == 1 or n < 2:
        bounds = [run_chunk(slice(0, n))]
    else:
        edges = np.linspace(0, n, min(workers, n) + 1, dtype=int)
        slices = [slice(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        with concurrent.futures.ThreadPoolExecutor(max_workers=len(slices)) as pool:
            bounds = list(pool.map(run_chunk, slices))

    return UpdateStats(
        cells=n,
        r_min=min(b[0] for b in bounds),
        r_max=max(b[1] for b in bounds),
    )


@dataclass
class UpdateTrigger:
    """Accept a sample only after the centroid moved far enough.

    The travel distance is measured from the centroid of the last
    *accepted* update, so applied updates are always more than
    ``min_travel`` apart.
    """

    min_travel: float = 2.0
    last_centroid: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.min_travel <= 0:
            raise ValueError("min_travel must be positive")

    def should_update(self, centroid) -> bool:
        centroid = np.asarray(centroid, dtype=float)
        if self.last_centroid is None or \
                np.linalg.norm(centroid - self.last_centroid) > self.min_travel:
            self.last_centroid = centroid
            return True
        return False
