"""High-order meshes interpolating Loop subdivision limit models.

The linear input mesh is interpreted as interpolation points of a Loop
limit surface with sharp feature curves and points. Degree-``q`` surface
nodes are evaluated exactly on that limit model, and volume meshes are
curved by replacing their boundary and blending the change inward.
"""

from .interpolation import HighOrderMesh, build_ho_topology, generate_ho_surface_mesh, refine_to_linear
from .limit import LimitEvaluator
from .mesh import (
    FeatureError,
    FeatureModel,
    MeshError,
    NonManifoldError,
    OrientationError,
    Role,
    SurfaceMesh,
    VertexClass,
    VolumeMesh,
    classify_vertex,
    extract_boundary,
    infer_features,
)
from .metrics import (
    DistanceReport,
    LebesgueReport,
    SmoothingSuggestion,
    best_approx_bounds,
    curve_average_angle,
    detect_smooth_candidates,
    edge_normal_angle,
    element_distance,
    lebesgue_constant,
    model_distance,
)
from .nodes import NodalDistribution, make_distribution
from .subdivision import ControlMesh, compute_control_mesh, subdivide_curve, subdivide_surface
from .volume import (
    QualityReport,
    SmoothingPlan,
    curve_volume_mesh,
    element_quality,
    generate_ho_volume_mesh,
    smooth_features,
    tfi_edge,
    tfi_face,
    tfi_tet,
)
from .fileio import load_linear_mesh, write_mesh

__version__ = "0.1.0"

__all__ = [
    "ControlMesh",
    "DistanceReport",
    "FeatureError",
    "FeatureModel",
    "HighOrderMesh",
    "LebesgueReport",
    "LimitEvaluator",
    "MeshError",
    "NodalDistribution",
    "NonManifoldError",
    "OrientationError",
    "QualityReport",
    "Role",
    "SmoothingPlan",
    "SmoothingSuggestion",
    "SurfaceMesh",
    "VertexClass",
    "VolumeMesh",
    "best_approx_bounds",
    "build_ho_topology",
    "classify_vertex",
    "compute_control_mesh",
    "curve_average_angle",
    "curve_volume_mesh",
    "detect_smooth_candidates",
    "edge_normal_angle",
    "element_distance",
    "element_quality",
    "extract_boundary",
    "generate_ho_surface_mesh",
    "generate_ho_volume_mesh",
    "infer_features",
    "lebesgue_constant",
    "load_linear_mesh",
    "make_distribution",
    "model_distance",
    "refine_to_linear",
    "smooth_features",
    "subdivide_curve",
    "subdivide_surface",
    "tfi_edge",
    "tfi_face",
    "tfi_tet",
    "write_mesh",
]
