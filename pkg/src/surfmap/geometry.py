"""Plane fitting and local-frame geometry.

A set of L >= 3 points measured on the surface defines a local first-order
approximation: the plane through the point centroid whose normal is the
eigenvector of the point covariance matrix for the smallest eigenvalue
(PCA plane fit).  A local frame on that plane is used for region masks and
projections.

All lengths are in millimetres.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CollinearPoints,
    DegenerateFrame,
    DuplicatePoints,
    VerticalPlane,
)

# |n_z| below this value means the plane is not a height function locally.
VERTICAL_EPS = 1e-6

# Collinearity: ratio of second-smallest to largest covariance eigenvalue.
DEGENERACY_RATIO = 1e-10

# Two points closer than this are treated as duplicates (mm).
DISTINCT_TOL = 1e-9


@dataclass(frozen=True)
class Plane:
    """Plane n . x = offset through ``centroid`` with unit normal."""

    normal: np.ndarray
    offset: float
    centroid: np.ndarray


@dataclass(frozen=True)
class LocalFrame:
    """Frame with origin on the plane and z-axis along the plane normal.

    ``rotation`` columns are (e_x, n x e_x, n); world = rotation @ local + origin.
    """

    origin: np.ndarray
    rotation: np.ndarray


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (L, 3) point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain non-finite components")
    return pts


def _count_distinct(pts: np.ndarray) -> int:
    n = 0
    kept: list[np.ndarray] = []
    for p in pts:
        if all(np.linalg.norm(p - q) > DISTINCT_TOL for q in kept):
            kept.append(p)
            n += 1
    return n


def _orient_normal(n: np.ndarray) -> np.ndarray:
    """Fix the eigenvector sign: prefer n_z > 0, then n_x > 0, then n_y > 0."""
    if abs(n[2]) > VERTICAL_EPS:
        return n if n[2] > 0 else -n
    if abs(n[0]) > VERTICAL_EPS:
        return n if n[0] > 0 else -n
    return n if n[1] > 0 else -n


def fit_plane_pca(points) -> Plane:
    """Fit a plane to L >= 3 points by PCA of their covariance matrix.

    The normal is the unit eigenvector for the smallest eigenvalue; the
    plane passes through the centroid.  Raises :class:`DuplicatePoints`
    or :class:`CollinearPoints` on degenerate input.
    """
    pts = _as_points(points)
    if len(pts) < 3:
        raise DuplicatePoints(f"need at least 3 points, got {len(pts)}")
    if _count_distinct(pts) < 3:
        raise DuplicatePoints("fewer than 3 distinct points")

    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / len(pts)
    eigvals, eigvecs = np.linalg.eigh(cov)  # ascending eigenvalues
    if eigvals[1] <= DEGENERACY_RATIO * eigvals[2]:
        raise CollinearPoints("points are collinear; plane normal undefined")

    normal = _orient_normal(eigvecs[:, 0])
    return Plane(normal=normal, offset=float(normal @ centroid), centroid=centroid)


def plane_height_at(plane: Plane, x, y):
    """Height z of the plane at (x, y); vectorized over array inputs."""
    n = plane.normal
    if abs(n[2]) <= VERTICAL_EPS:
        raise VerticalPlane(f"|n_z| = {abs(n[2]):.3e} too small for height evaluation")
    return (plane.offset - n[0] * np.asarray(x) - n[1] * np.asarray(y)) / n[2]


def project_to_plane(plane: Plane, q) -> np.ndarray:
    """Orthogonal projection of point(s) q onto the plane."""
    q = np.asarray(q, dtype=float)
    n = plane.normal
    dist = (q - plane.centroid) @ n
    return q - np.multiply.outer(dist, n)


def build_local_frame(plane: Plane, p1) -> LocalFrame:
    """Frame on the plane: origin at the centroid, x-axis toward p1.

    The x-axis is the in-plane projection of (p1 - centroid); raises
    :class:`DegenerateFrame` when that projection vanishes.
    """
    p1 = np.asarray(p1, dtype=float)
    n = plane.normal
    v = p1 - plane.centroid
    proj = v - (v @ n) * n
    norm = np.linalg.norm(proj)
    if norm < 1e-9:
        raise DegenerateFrame("reference point projects onto the frame origin")
    e_x = proj / norm
    rotation = np.column_stack([e_x, np.cross(n, e_x), n])
    return LocalFrame(origin=plane.centroid.copy(), rotation=rotation)


def to_local(frame: LocalFrame, q) -> np.ndarray:
    """World -> local coordinates; accepts a single point or an (N, 3) batch."""
    q = np.asarray(q, dtype=float)
    return (q - frame.origin) @ frame.rotation


def from_local(frame: LocalFrame, q) -> np.ndarray:
    """Local -> world coordinates; inverse of :func:`to_local`."""
    q = np.asarray(q, dtype=float)
    return q @ frame.rotation.T + frame.origin
