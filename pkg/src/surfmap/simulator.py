"""Deterministic scan simulator.

Stands in for the robot rig: three distance sensors on the end-effector,
tilted toward a common point below the tool, swept over an analytic
ground-truth surface along a boustrophedon raster.  Each pose yields one
measurement sample with three surface points in the inertial frame {0}.

Units are millimetres and seconds throughout.  Sample streams are fully
reproducible from (model, rig, plan, noise seed).

Noise pipeline per sensor distance, in order: slowly varying per-sensor
bias, white noise, quantization to the sensor resolution; optionally the
reported pose is delayed and perturbed, and the points are reconstructed
from that reported pose.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import AreaOutsideDomain, NoIntersection, OutOfDomain

logger = logging.getLogger(__name__)


# ── ground-truth surface models ──────────────────────────────────────

class SurfaceModel:
    """Analytic height field z = g(x, y) with gradient and Hessian."""

    #: ((x_min, x_max), (y_min, y_max))
    domain: tuple[tuple[float, float], tuple[float, float]]

    def height(self, x, y):
        raise NotImplementedError

    def gradient(self, x, y):
        raise NotImplementedError

    def hessian(self, x, y):
        raise NotImplementedError

    def in_domain(self, x, y):
        (x0, x1), (y0, y1) = self.domain
        return (np.asarray(x) >= x0) & (np.asarray(x) <= x1) \
             & (np.asarray(y) >= y0) & (np.asarray(y) <= y1)


@dataclass
class FlatSurface(SurfaceModel):
    z0: float = 0.0
    domain: tuple = ((0.0, 500.0), (0.0, 200.0))

    def height(self, x, y):
        return np.broadcast_arrays(np.asarray(x, dtype=float), y)[0] * 0.0 + self.z0

    def gradient(self, x, y):
        z = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return z, z.copy()

    def hessian(self, x, y):
        z = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return z, z.copy(), z.copy()


@dataclass
class RampSurface(SurfaceModel):
    slope_x: float = 0.2
    slope_y: float = 0.0
    z0: float = 0.0
    domain: tuple = ((0.0, 500.0), (0.0, 200.0))

    def height(self, x, y):
        return self.z0 + self.slope_x * np.asarray(x) + self.slope_y * np.asarray(y)

    def gradient(self, x, y):
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        return np.full(shape, self.slope_x), np.full(shape, self.slope_y)

    def hessian(self, x, y):
        z = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return z, z.copy(), z.copy()


@dataclass
class SinusoidSurface(SurfaceModel):
    """Separable two-axis sinusoid; the default desk-scale test surface.

    Defaults give a 30 mm height span with minimum curvature radius
    about 25 mm over a 500 x 200 mm domain.
    """

    amp_x: float = 10.0
    wav_x: float = 100.0
    amp_y: float = 5.0
    wav_y: float = 80.0
    domain: tuple = ((0.0, 500.0), (0.0, 200.0))

    @property
    def _kx(self):
        return 2.0 * math.pi / self.wav_x

    @property
    def _ky(self):
        return 2.0 * math.pi / self.wav_y if self.amp_y else 0.0

    def height(self, x, y):
        return self.amp_x * np.sin(self._kx * np.asarray(x)) \
             + self.amp_y * np.sin(self._ky * np.asarray(y))

    def gradient(self, x, y):
        gx = self.amp_x * self._kx * np.cos(self._kx * np.asarray(x))
        gy = self.amp_y * self._ky * np.cos(self._ky * np.asarray(y)) \
            + 0.0 * np.asarray(x)
        return np.broadcast_arrays(gx, gy)

    def hessian(self, x, y):
        hxx = -self.amp_x * self._kx ** 2 * np.sin(self._kx * np.asarray(x))
        hyy = -self.amp_y * self._ky ** 2 * np.sin(self._ky * np.asarray(y)) \
            + 0.0 * np.asarray(x)
        hxx, hyy = np.broadcast_arrays(hxx, hyy)
        return hxx, np.zeros_like(hxx), hyy


@dataclass
class SphereCapSurface(SurfaceModel):
    """Cap of a sphere: convex bump (sign=+1) or concave bowl (sign=-1).

    z = sign * (sqrt(R^2 - r^2) - sqrt(R^2 - cap_radius^2)), so the bump
    is >= 0 and the bowl <= 0 everywhere inside the cap footprint.  The
    default domain stays well inside the footprint (no edge kink).
    """

    sphere_radius: float = 300.0
    cap_radius: float = 150.0
    center: tuple = (80.0, 50.0)
    sign: float = 1.0
    domain: tuple = ((0.0, 160.0), (0.0, 100.0))

    def _r2(self, x, y):
        return (np.asarray(x) - self.center[0]) ** 2 + (np.asarray(y) - self.center[1]) ** 2

    def height(self, x, y):
        r2 = np.minimum(self._r2(x, y), self.cap_radius ** 2)
        rim = math.sqrt(self.sphere_radius ** 2 - self.cap_radius ** 2)
        return self.sign * (np.sqrt(self.sphere_radius ** 2 - r2) - rim)

    def gradient(self, x, y):
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        r2 = np.minimum(dx * dx + dy * dy, self.cap_radius ** 2)
        w = np.sqrt(self.sphere_radius ** 2 - r2)
        inside = (dx * dx + dy * dy) < self.cap_radius ** 2
        gx = np.where(inside, -self.sign * dx / w, 0.0)
        gy = np.where(inside, -self.sign * dy / w, 0.0)
        return gx, gy

    def hessian(self, x, y):
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        r2 = dx * dx + dy * dy
        inside = r2 < self.cap_radius ** 2
        w2 = self.sphere_radius ** 2 - np.minimum(r2, self.cap_radius ** 2)
        w = np.sqrt(w2)
        hxx = np.where(inside, -self.sign * (1.0 / w + dx * dx / w ** 3), 0.0)
        hyy = np.where(inside, -self.sign * (1.0 / w + dy * dy / w ** 3), 0.0)
        hxy = np.where(inside, -self.sign * dx * dy / w ** 3, 0.0)
        return hxx, hxy, hyy


MODEL_REGISTRY = {
    "flat": FlatSurface,
    "ramp": RampSurface,
    "sinusoid": SinusoidSurface,
    "sphere_cap": SphereCapSurface,
}


def make_model(name: str, params: dict | None = None) -> SurfaceModel:
    if name not in MODEL_REGISTRY:
        raise ValueError(f"unknown surface model {name!r}")
    params = dict(params or {})
    for key in ("domain", "center"):
        if key in params:
            params[key] = _to_tuple(params[key])
    return MODEL_REGISTRY[name](**params)


def _to_tuple(v):
    if isinstance(v, (list, tuple)):
        return tuple(_to_tuple(x) for x in v)
    return v


def surface_eval(model: SurfaceModel, x, y):
    """Ground-truth height and unit normal at (x, y)."""
    if not np.all(model.in_domain(x, y)):
        raise OutOfDomain(f"query outside surface domain {model.domain}")
    z = model.height(x, y)
    gx, gy = model.gradient(x, y)
    n = np.stack(np.broadcast_arrays(-gx, -gy, np.ones_like(np.asarray(gx, dtype=float))), axis=-1)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return z, n


def min_curvature_radius(model: SurfaceModel, samples: int = 200) -> float:
    """Minimum principal curvature radius over a sample lattice."""
    (x0, x1), (y0, y1) = model.domain
    x = np.linspace(x0, x1, samples)
    y = np.linspace(y0, y1, samples)
    gx, gy = np.meshgrid(x, y, indexing="ij")
    p, q = model.gradient(gx, gy)
    hxx, hxy, hyy = model.hessian(gx, gy)
    w = np.sqrt(1.0 + p * p + q * q)
    # Shape operator II * I^-1 for the graph z = g(x, y).
    e, f_, g_ = 1.0 + p * p, p * q, 1.0 + q * q
    l, m, n_ = hxx / w, hxy / w, hyy / w
    det_i = e * g_ - f_ * f_
    a11 = (l * g_ - m * f_) / det_i
    a12 = (m * g_ - n_ * f_) / det_i
    a21 = (m * e - l * f_) / det_i
    a22 = (n_ * e - m * f_) / det_i
    tr = a11 + a22
    det = a11 * a22 - a12 * a21
    disc = np.sqrt(np.maximum(tr * tr / 4.0 - det, 0.0))
    kappa = np.maximum(np.abs(tr / 2.0 + disc), np.abs(tr / 2.0 - disc))
    k_max = float(kappa.max())
    return math.inf if k_max == 0.0 else 1.0 / k_max


# ── ray casting ──────────────────────────────────────────────────────

def _ray_residual(model, origins, dirs, t):
    p = origins + dirs * t[:, None]
    return p[:, 2] - model.height(p[:, 0], p[:, 1])


def _ray_intersect_batch(model: SurfaceModel, origins: np.ndarray, dirs: np.ndarray,
                         t_lo: float, t_hi: float, step: float = 1.0,
                         iters: int = 52) -> np.ndarray:
    """First surface crossing along each ray; NaN where none is bracketed.

    March with fixed steps until the residual changes sign, then bisect.
    Valid for rays that approach the surface from above with residual
    strictly decreasing (steep rays over bounded surface slope).
    """
    n = len(origins)
    lo = np.full(n, np.nan)
    hi = np.full(n, np.nan)
    found = np.zeros(n, dtype=bool)
    t_prev = np.full(n, t_lo)
    f_prev = _ray_residual(model, origins, dirs, t_prev)
    t = t_lo
    while t < t_hi:
        t_next = min(t + step, t_hi)
        f_next = _ray_residual(model, origins, dirs, np.full(n, t_next))
        new = ~found & (f_prev > 0) & (f_next <= 0)
        lo[new] = t
        hi[new] = t_next
        found |= new
        f_prev = f_next
        t = t_next

    if not found.any():
        return lo
    idx = np.nonzero(found)[0]
    a, b = lo[idx], hi[idx]
    o, d = origins[idx], dirs[idx]
    fa = _ray_residual(model, o, d, a)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        fm = _ray_residual(model, o, d, mid)
        take_hi = (fa > 0) & (fm <= 0) | (fa <= 0) & (fm > 0)
        b = np.where(take_hi, mid, b)
        keep_lo = ~take_hi
        fa = np.where(keep_lo, fm, fa)
        a = np.where(keep_lo, mid, a)
    lo[idx] = 0.5 * (a + b)
    return lo


def ray_intersect(model: SurfaceModel, origin, direction,
                  t_lo: float = 0.0, t_hi: float = 500.0) -> np.ndarray:
    """First intersection point of one ray with the surface.

    Raises :class:`NoIntersection` when the ray misses within [t_lo, t_hi]
    and :class:`OutOfDomain` when the hit falls outside the model domain.
    """
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    t = _ray_intersect_batch(model, origin[None, :], direction[None, :], t_lo, t_hi)[0]
    if np.isnan(t):
        raise NoIntersection("ray does not cross the surface within range")
    p = origin + t * direction
    if not np.all(model.in_domain(p[0], p[1])):
        raise OutOfDomain("ray hit outside the surface domain")
    return p


# ── sensor rig and trajectories ──────────────────────────────────────

@dataclass(frozen=True)
class SensorRig:
    """Three distance sensors around the tool axis, converging downward.

    Sensors sit on a circle of ``mount_radius`` in the tool xy-plane and
    point toward a common point on the tool axis at mount_radius /
    tan(tilt) below the flange.  With the default azimuths two sensors
    share a y-coordinate at nominal (identity) orientation.
    """

    mount_radius: float = 25.0
    tilt_deg: float = 30.0
    azimuths_deg: tuple = (90.0, 210.0, 330.0)
    range_min: float = 50.0
    range_max: float = 300.0
    resolution: float = 0.33
    max_linearization_error: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.tilt_deg < 90.0:
            raise ValueError("tilt must be in (0, 90) degrees")
        if not self.range_min < self.range_max:
            raise ValueError("invalid measurement range")

    def sensor_geometry(self) -> tuple[np.ndarray, np.ndarray]:
        """(origins, unit directions) of the rays in the tool frame."""
        az = np.deg2rad(np.asarray(self.azimuths_deg, dtype=float))
        origins = self.mount_radius * np.stack(
            [np.cos(az), np.sin(az), np.zeros_like(az)], axis=-1
        )
        converge_depth = self.mount_radius / math.tan(math.radians(self.tilt_deg))
        target = np.array([0.0, 0.0, -converge_depth])
        dirs = target - origins
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        return origins, dirs


@dataclass(frozen=True)
class Pose:
    position: np.ndarray
    rotation: np.ndarray  # 3x3, tool -> world


@dataclass(frozen=True)
class TrajectoryPlan:
    kind: str = "constant_height"  # or "surface_tracking"
    lines: int = 21
    spacing: float = 5.0
    speed: float = 25.0
    sample_rate: float = 100.0
    z_const: float = 65.0
    standoff: float = 55.0
    area: tuple = (50.0, 450.0, 50.0, 150.0)  # x0, x1, y0, y1

    def __post_init__(self):
        if self.kind not in ("constant_height", "surface_tracking"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.spacing <= 0 or self.speed <= 0 or self.sample_rate <= 0:
            raise ValueError("spacing, speed and sample_rate must be positive")
        if self.lines < 0:
            raise ValueError("line count must be >= 0")


def plan_raster(plan: TrajectoryPlan, model: SurfaceModel | None = None) -> list[Pose]:
    """Boustrophedon pose sequence over the plan area.

    Lines run along x with alternating direction, ``spacing`` apart in y.
    constant_height keeps z and orientation fixed; surface_tracking places
    the tool at ``standoff`` along the local ground-truth normal with the
    tool z-axis aligned to it (emulating a tracking controller).
    """
    x0, x1, y0, y1 = plan.area
    if model is not None:
        (dx0, dx1), (dy0, dy1) = model.domain
        y_top = y0 + plan.spacing * max(plan.lines - 1, 0)
        if not (dx0 <= x0 and x1 <= dx1 and dy0 <= y0 and y_top <= dy1):
            raise AreaOutsideDomain("scan area not contained in the surface domain")

    ds = plan.speed / plan.sample_rate
    n_per_line = int(math.floor((x1 - x0) / ds)) + 1
    poses: list[Pose] = []
    identity = np.eye(3)
    for line in range(plan.lines):
        y = y0 + plan.spacing * line
        xs = x0 + ds * np.arange(n_per_line)
        if line % 2 == 1:
            xs = xs[::-1]
        for x in xs:
            if plan.kind == "constant_height":
                poses.append(Pose(np.array([x, y, plan.z_const]), identity))
            else:
                z = float(model.height(x, y))
                gx, gy = model.gradient(x, y)
                n = np.array([-float(gx), -float(gy), 1.0])
                n /= np.linalg.norm(n)
                pos = np.array([x, y, z]) + plan.standoff * n
                e_x = np.array([1.0, 0.0, 0.0])
                e_x = e_x - (e_x @ n) * n
                e_x /= np.linalg.norm(e_x)
                rot = np.column_stack([e_x, np.cross(n, e_x), n])
                poses.append(Pose(pos, rot))
    return poses


# ── noise model and scan simulation ──────────────────────────────────

@dataclass(frozen=True)
class NoiseModel:
    """Seeded sensor/pose error model; identical seed, identical stream."""

    seed: int = 0
    quantum: float = 0.33            # distance quantization (mm)
    bias_amplitude: float = 1.0      # slowly varying per-sensor bias (mm)
    bias_wavelength: float = 250.0   # bias period over distance (mm)
    white_sigma: float = 0.05        # white distance noise (mm)
    pose_sigma_pos: float = 0.0      # reported-pose position noise (mm)
    pose_sigma_rot: float = 0.0      # reported-pose rotation noise (rad)
    pose_delay: int = 0              # reported pose lags by this many samples

    def __post_init__(self):
        for name in ("quantum", "bias_amplitude", "bias_wavelength",
                     "white_sigma", "pose_sigma_pos", "pose_sigma_rot"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.pose_delay < 0:
            raise ValueError("pose_delay must be nonnegative")


@dataclass(frozen=True)
class MeasurementSample:
    timestamp: float
    position: np.ndarray      # reported end-effector position, frame {0}
    quaternion: np.ndarray    # reported orientation, (x, y, z, w)
    points: np.ndarray        # (3, 3) measured surface points, frame {0}


def simulate_scan(model: SurfaceModel, rig: SensorRig, plan: TrajectoryPlan,
                  noise: NoiseModel = NoiseModel()) -> list[MeasurementSample]:
    """Cast the three sensor rays at every trajectory pose.

    Poses whose rays miss the surface or fall outside the sensor range
    are dropped (logged as gaps); all others yield one sample.
    """
    poses = plan_raster(plan, model)
    if not poses:
        return []

    n_poses = len(poses)
    o_tool, d_tool = rig.sensor_geometry()
    n_sensors = len(o_tool)
    positions = np.stack([p.position for p in poses])         # (K, 3)
    rotations = np.stack([p.rotation for p in poses])         # (K, 3, 3)

    w_origins = positions[:, None, :] + np.einsum("kab,sb->ksa", rotations, o_tool)
    w_dirs = np.einsum("kab,sb->ksa", rotations, d_tool)

    flat_o = w_origins.reshape(-1, 3)
    flat_d = w_dirs.reshape(-1, 3)
    t_true = _ray_intersect_batch(model, flat_o, flat_d, rig.range_min, rig.range_max)
    t_true = t_true.reshape(n_poses, n_sensors)

    hits = flat_o + flat_d * np.nan_to_num(
        t_true.reshape(-1), nan=rig.range_min
    )[:, None]
    hit_in_domain = model.in_domain(hits[:, 0], hits[:, 1]).reshape(n_poses, n_sensors)
    valid = np.isfinite(t_true).all(axis=1) & hit_in_domain.all(axis=1)

    rng = np.random.default_rng(noise.seed)
    bias_phase = rng.uniform(0.0, 2.0 * math.pi, size=n_sensors)
    white = rng.normal(0.0, noise.white_sigma, size=(n_poses, n_sensors)) \
        if noise.white_sigma > 0 else np.zeros((n_poses, n_sensors))
    pose_dpos = rng.normal(0.0, noise.pose_sigma_pos, size=(n_poses, 3)) \
        if noise.pose_sigma_pos > 0 else np.zeros((n_poses, 3))
    pose_drot = rng.normal(0.0, noise.pose_sigma_rot, size=(n_poses, 3)) \
        if noise.pose_sigma_rot > 0 else np.zeros((n_poses, 3))

    d_meas = t_true.copy()
    if noise.bias_amplitude > 0:
        d_meas += noise.bias_amplitude * np.sin(
            2.0 * math.pi * t_true / noise.bias_wavelength + bias_phase
        )
    d_meas += white
    if noise.quantum > 0:
        d_meas = np.round(d_meas / noise.quantum) * noise.quantum
    valid &= (d_meas >= rig.range_min).all(axis=1) & (d_meas <= rig.range_max).all(axis=1)

    dt = 1.0 / plan.sample_rate
    samples: list[MeasurementSample] = []
    dropped = 0
    for k in range(n_poses):
        if not valid[k]:
            dropped += 1
            continue
        k_rep = max(0, k - noise.pose_delay)
        pos_rep = positions[k_rep] + pose_dpos[k_rep]
        rot_rep = rotations[k_rep]
        if noise.pose_sigma_rot > 0:
            rot_rep = Rotation.from_rotvec(pose_drot[k_rep]).as_matrix() @ rot_rep
        pts_tool = o_tool + d_meas[k][:, None] * d_tool
        pts = pos_rep + pts_tool @ rot_rep.T
        samples.append(MeasurementSample(
            timestamp=k * dt,
            position=pos_rep,
            quaternion=Rotation.from_matrix(rot_rep).as_quat(),
            points=pts,
        ))
    if dropped:
        logger.warning("dropped %d of %d poses (ray miss or out of range)",
                       dropped, n_poses)
    return samples


# ── sample stream serialization (JSON lines) ─────────────────────────

def write_samples(path, samples: list[MeasurementSample]) -> None:
    """One JSON object per line: t (s), pos (mm), quat (xyzw), points (mm)."""
    with open(path, "w") as fh:
        for s in samples:
            fh.write(json.dumps({
                "t": s.timestamp,
                "pos": s.position.tolist(),
                "quat": s.quaternion.tolist(),
                "points": s.points.tolist(),
            }) + "\n")


def read_samples(path) -> list[MeasurementSample]:
    from .errors import DataError

    samples = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pts = np.asarray(obj["points"], dtype=float)
                if pts.shape != (3, 3):
                    raise ValueError(f"expected 3 points, got shape {pts.shape}")
                samples.append(MeasurementSample(
                    timestamp=float(obj["t"]),
                    position=np.asarray(obj["pos"], dtype=float),
                    quaternion=np.asarray(obj["quat"], dtype=float),
                    points=pts,
                ))
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise DataError(f"{path}:{lineno}: bad sample record: {exc}") from exc
    return samples
