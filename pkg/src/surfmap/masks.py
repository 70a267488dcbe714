"""Binary update-region masks.

A mask selects the grid cells a single local plane approximation is
allowed to update.  Four constructions are provided: axis-aligned
bounding box of the measurement points (roi), the triangle spanned by
three points, the smallest disk around the centroid containing all
points (largest_circle), and a union of fixed-radius disks around each
point (cap).  Masks can be grown by binary dilation.

Membership is tested in 2D.  In 'local' mode (default, following the
local-approximation geometry) grid points are lifted onto the plane and
expressed in the local frame before testing; 'xy' mode tests raw
inertial xy coordinates.  All boundary tests are closed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import MaskShapeMismatch
from .geometry import LocalFrame, Plane, plane_height_at, to_local
from .grid import GridSpec

FRAME_MODES = ("local", "xy")
MASK_KINDS = ("roi", "triangle", "largest_circle", "cap")


@dataclass(frozen=True)
class MaskSpec:
    kind: str = "triangle"
    cap_radius: float = 5.0
    dilation_steps: int = 2
    frame_mode: str = "local"

    def __post_init__(self):
        if self.kind not in MASK_KINDS:
            raise ValueError(f"kind must be one of {MASK_KINDS}")
        if self.kind == "cap" and self.cap_radius <= 0:
            raise ValueError("cap_radius must be positive")
        if self.dilation_steps < 0:
            raise ValueError("dilation_steps must be >= 0")
        if self.frame_mode not in FRAME_MODES:
            raise ValueError(f"frame_mode must be one of {FRAME_MODES}")


@dataclass(frozen=True)
class BinaryMask:
    bits: np.ndarray  # (N, M) bool, indexed [i, j]
    spec: GridSpec
    degenerate: bool = field(default=False, compare=False)

    def count(self) -> int:
        return int(self.bits.sum())


def _membership_coords(spec, points, plane, frame, mode):
    """Test coordinates for every grid cell and measurement point.

    Returns (gx, gy) arrays of shape (N, M) and a (L, 2) point array in
    the chosen 2D test frame.
    """
    pts = np.asarray(points, dtype=float)
    gx, gy = np.meshgrid(spec.x_coords(), spec.y_coords(), indexing="ij")
    if mode == "xy":
        return gx, gy, pts[:, :2]
    if plane is None or frame is None:
        raise ValueError("local frame mode requires plane and frame")
    gz = plane_height_at(plane, gx, gy)
    cells = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
    local_cells = to_local(frame, cells)[:, :2].reshape(spec.nx, spec.ny, 2)
    local_pts = to_local(frame, pts)[:, :2]
    return local_cells[..., 0], local_cells[..., 1], local_pts


def roi_mask(spec: GridSpec, points, plane: Plane | None = None,
             frame: LocalFrame | None = None, mode: str = "local") -> BinaryMask:
    """Axis-aligned bounding box of the measurement points."""
    gx, gy, p2 = _membership_coords(spec, points, plane, frame, mode)
    lo = p2.min(axis=0)
    hi = p2.max(axis=0)
    bits = (gx >= lo[0]) & (gx <= hi[0]) & (gy >= lo[1]) & (gy <= hi[1])
    return BinaryMask(bits, spec)


def triangle_mask(spec: GridSpec, points, plane: Plane | None = None,
                  frame: LocalFrame | None = None, mode: str = "local") -> BinaryMask:
    """Triangle spanned by exactly three points, boundary inclusive.

    Vertex order is normalized to counter-clockwise, so the mask does not
    depend on sensor labeling.  Collinear points give an empty mask with
    the ``degenerate`` flag set.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] != 3:
        raise ValueError("triangle mask requires exactly 3 points")
    gx, gy, p2 = _membership_coords(spec, points, plane, frame, mode)
    u = p2[1] - p2[0]
    v = p2[2] - p2[0]
    signed_area = 0.5 * (u[0] * v[1] - u[1] * v[0])
    if abs(signed_area) < 1e-9:
        return BinaryMask(np.zeros((spec.nx, spec.ny), dtype=bool), spec, degenerate=True)
    if signed_area < 0:
        p2 = p2[[0, 2, 1]]

    bits = np.ones((spec.nx, spec.ny), dtype=bool)
    for a, b in ((0, 1), (1, 2), (2, 0)):
        edge = (gy - p2[a, 1]) * (p2[b, 0] - p2[a, 0]) \
             - (p2[b, 1] - p2[a, 1]) * (gx - p2[a, 0])
        bits &= edge >= 0
    return BinaryMask(bits, spec)


def largest_circle_mask(spec: GridSpec, points, plane: Plane | None = None,
                        frame: LocalFrame | None = None, mode: str = "local") -> BinaryMask:
    """Disk around the point centroid containing every measurement point."""
    gx, gy, p2 = _membership_coords(spec, points, plane, frame, mode)
    center = p2.mean(axis=0)
    r_sq = np.max(np.sum((p2 - center) ** 2, axis=1))
    bits = (gx - center[0]) ** 2 + (gy - center[1]) ** 2 <= r_sq
    return BinaryMask(bits, spec)


def cap_mask(spec: GridSpec, points, radius: float, plane: Plane | None = None,
             frame: LocalFrame | None = None, mode: str = "local") -> BinaryMask:
    """Union of disks of fixed radius around each measurement point."""
    if radius <= 0:
        raise ValueError("cap radius must be positive")
    gx, gy, p2 = _membership_coords(spec, points, plane, frame, mode)
    bits = np.zeros((spec.nx, spec.ny), dtype=bool)
    for px, py in p2:
        bits |= (gx - px) ** 2 + (gy - py) ** 2 <= radius * radius
    return BinaryMask(bits, spec)


def dilate(mask: BinaryMask, steps: int) -> BinaryMask:
    """Binary dilation with a 3x3 (8-connected) structuring element."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if steps == 0 or not mask.bits.any():
        return BinaryMask(mask.bits.copy(), mask.spec, mask.degenerate)
    bits = ndimage.binary_dilation(
        mask.bits, structure=np.ones((3, 3), dtype=bool), iterations=steps
    )
    return BinaryMask(bits, mask.spec, mask.degenerate)


def make_mask(mask_spec: MaskSpec, spec: GridSpec, points,
              plane: Plane | None = None, frame: LocalFrame | None = None) -> BinaryMask:
    """Build the configured mask kind and apply its dilation."""
    mode = mask_spec.frame_mode
    if mask_spec.kind == "roi":
        mask = roi_mask(spec, points, plane, frame, mode)
    elif mask_spec.kind == "triangle":
        mask = triangle_mask(spec, points, plane, frame, mode)
    elif mask_spec.kind == "largest_circle":
        mask = largest_circle_mask(spec, points, plane, frame, mode)
    else:
        mask = cap_mask(spec, points, mask_spec.cap_radius, plane, frame, mode)
    return dilate(mask, mask_spec.dilation_steps)


def save_pbm(mask: BinaryMask, path) -> None:
    """ASCII PBM debug export, one image row per y index."""
    bits = mask.bits.T  # (M, N)
    with open(path, "w") as fh:
        fh.write("P1\n")
        fh.write(f"# surfmap mask, N={mask.spec.nx} M={mask.spec.ny}\n")
        fh.write(f"{mask.spec.nx} {mask.spec.ny}\n")
        for row in bits:
            fh.write(" ".join("1" if b else "0" for b in row) + "\n")


def check_shape(mask: BinaryMask, spec: GridSpec) -> None:
    if mask.bits.shape != (spec.nx, spec.ny):
        raise MaskShapeMismatch(
            f"mask shape {mask.bits.shape} vs grid ({spec.nx}, {spec.ny})"
        )
