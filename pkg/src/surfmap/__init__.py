"""surfmap: probabilistic height-map reconstruction from sparse 3-point
surface measurements.

Local plane approximations fitted to sensor triples feed per-cell scalar
Kalman filters on a 2D grid; RBF-weighted measurement covariances and
binary region masks keep each update local.  Includes a deterministic
scan simulator and an evaluation harness.
"""

from .covariance import CovarianceField, CovarianceParams, covariance_field, rbf_covariance
from .evaluation import EvaluationConfig, EvaluationReport, error_map, evaluate
from .geometry import (
    LocalFrame,
    Plane,
    build_local_frame,
    fit_plane_pca,
    from_local,
    plane_height_at,
    project_to_plane,
    to_local,
)
from .grid import GridSpec, HeightGrid, new_grid
from .kalman import KFParams, UpdateTrigger, kf_cell_update, masked_map_update
from .masks import (
    BinaryMask,
    MaskSpec,
    cap_mask,
    dilate,
    largest_circle_mask,
    make_mask,
    roi_mask,
    triangle_mask,
)
from .simulator import (
    FlatSurface,
    MeasurementSample,
    NoiseModel,
    RampSurface,
    SensorRig,
    SinusoidSurface,
    SphereCapSurface,
    SurfaceModel,
    TrajectoryPlan,
    make_model,
    plan_raster,
    ray_intersect,
    simulate_scan,
    surface_eval,
)

__version__ = "0.1.0"
