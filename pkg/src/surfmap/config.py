"""Run configuration: one YAML file describes a reproducible run.

Every field defaults to the desk-scale reference setup (2 mm grid over a
400 x 100 mm area, triangle mask with 2-step dilation, alpha = 0.1,
R in [10, 1e4], 2 mm update trigger, 21-line raster at 25 mm/s).  A run
is fully determined by the resolved config plus the seed; resolved
configs are written back next to every output for provenance.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import yaml

from .covariance import CovarianceParams
from .errors import ConfigError
from .evaluation import EvaluationConfig
from .grid import GridSpec
from .kalman import KFParams
from .masks import MaskSpec
from .simulator import NoiseModel, SensorRig, SurfaceModel, TrajectoryPlan, make_model


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    workers: int = 1
    trigger_distance: float = 2.0
    z0: float = 0.0
    p0: float = 1e6
    grid: GridSpec = field(default_factory=lambda: GridSpec(50.0, 450.0, 50.0, 150.0, 200, 50))
    mask: MaskSpec = field(default_factory=MaskSpec)
    covariance: CovarianceParams = field(default_factory=CovarianceParams)
    kalman: KFParams = field(default_factory=KFParams)
    surface_model: str = "sinusoid"
    surface_params: dict = field(default_factory=dict)
    rig: SensorRig = field(default_factory=SensorRig)
    plan: TrajectoryPlan = field(default_factory=TrajectoryPlan)
    noise: NoiseModel = field(default_factory=NoiseModel)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def make_surface(self) -> SurfaceModel:
        return make_model(self.surface_model, self.surface_params)

    def validate(self) -> None:
        model = self.make_surface()
        (dx0, dx1), (dy0, dy1) = model.domain
        if self.grid.x_min >= dx1 or self.grid.x_max <= dx0 \
                or self.grid.y_min >= dy1 or self.grid.y_max <= dy0:
            raise ConfigError("grid does not overlap the surface domain")
        if self.trigger_distance <= 0:
            raise ConfigError("trigger_distance must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.p0 <= 0:
            raise ConfigError("initial variance p0 must be positive")


_SECTIONS = {
    "grid": (GridSpec, "grid"),
    "mask": (MaskSpec, "mask"),
    "covariance": (CovarianceParams, "covariance"),
    "kalman": (KFParams, "kalman"),
    "rig": (SensorRig, "rig"),
    "plan": (TrajectoryPlan, "plan"),
    "noise": (NoiseModel, "noise"),
    "evaluation": (EvaluationConfig, "evaluation"),
}

_SCALARS = ("seed", "workers", "trigger_distance", "z0", "p0")


def _build_section(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"section {name!r}: unknown keys {sorted(unknown)}")
    if cls in (SensorRig, TrajectoryPlan) :
        data = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return cls(**data)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"section {name!r}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data or {})
    kwargs = {}
    for key in _SCALARS:
        if key in data:
            kwargs[key] = data.pop(key)
    surface = data.pop("surface", None)
    if surface is not None:
        if not isinstance(surface, dict):
            raise ConfigError("section 'surface' must be a mapping")
        kwargs["surface_model"] = surface.get("model", "sinusoid")
        kwargs["surface_params"] = surface.get("params", {}) or {}
    noise_section = data.get("noise") or {}
    explicit_noise_seed = isinstance(noise_section, dict) and "seed" in noise_section
    for key, (cls, attr) in _SECTIONS.items():
        if key in data:
            kwargs[attr] = _build_section(cls, data.pop(key), key)
    if data:
        raise ConfigError(f"unknown config sections {sorted(data)}")
    cfg = RunConfig(**kwargs)
    # The noise seed follows the run seed unless set explicitly.
    if not explicit_noise_seed:
        cfg = dataclasses.replace(cfg, noise=dataclasses.replace(cfg.noise, seed=cfg.seed))
    cfg.validate()
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    def section(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}

    out = {key: getattr(cfg, key) for key in _SCALARS}
    out["surface"] = {"model": cfg.surface_model, "params": dict(cfg.surface_params)}
    for key, (_, attr) in _SECTIONS.items():
        out[key] = section(getattr(cfg, attr))
    return out


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data or {})


def save_config(path, cfg: RunConfig) -> None:
    with open(path, "w") as fh:
        fh.write("# surfmap resolved run configuration\n")
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()
