"""Accuracy and smoothness measures of high-order surface meshes.

Distances compare the isoparametric map of each element with the limit
model over the same triangle. Angles compare the normals of neighbouring
elements along shared edges.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .interpolation import HighOrderMesh
from .limit import LimitEvaluator
from .mesh import FeatureModel
from .nodes import NodalDistribution, lagrange_basis, make_distribution, simplex_lattice

__all__ = [
    "DistanceReport",
    "LebesgueReport",
    "SmoothingSuggestion",
    "best_approx_bounds",
    "curve_average_angle",
    "detect_smooth_candidates",
    "distance_grid",
    "edge_normal_angle",
    "element_distance",
    "element_normals",
    "lebesgue_constant",
    "max_normal_angle",
    "model_distance",
    "normal_angles",
    "point_tangent_angle",
    "write_csv",
    "write_json",
]

DISTANCE_GRID_DEGREE = 20
LEBESGUE_RESOLUTION = 200
EDGE_SAMPLES = 20
CURVE_GAUSS_POINTS = 5


def _basis(dist: NodalDistribution):
    return lagrange_basis(dist.degree, dist.kind, dist.dim)


# ----------------------------------------------------------------------
# distance to the limit model


@dataclass
class DistanceReport:
    """Distance between a high-order mesh and the limit model.

    Attributes
    ----------
    surfaces : dict
        Feature surface id to the largest element distance on it.
    distance : float
        Largest surface distance divided by ``length``.
    length : float
        Characteristic length.
    grid : str
        Sampling description.
    elements : ndarray
        Absolute distance per element.
    """

    surfaces: dict
    distance: float
    length: float
    grid: str
    elements: np.ndarray = field(repr=False)

    def to_dict(self):
        return {
            "distance": self.distance,
            "length": self.length,
            "grid": self.grid,
            "surfaces": {str(k): v for k, v in sorted(self.surfaces.items())},
        }


def distance_grid(dist: NodalDistribution, degree=DISTANCE_GRID_DEGREE):
    """Equispaced lattice of ``degree`` plus the element's own nodes."""
    return np.concatenate([simplex_lattice(degree, 2), dist.points])


def element_distance(evaluator: LimitEvaluator, ho: HighOrderMesh, element, grid=None):
    """Largest distance between element ``element`` and the limit over its triangle.

    Parameters
    ----------
    evaluator : LimitEvaluator
        Built on ``ho.linear``.
    ho : HighOrderMesh
    element : int
    grid : ndarray, shape (n, 3), optional
        Barycentric samples; :func:`distance_grid` by default.
    """
    if grid is None:
        grid = distance_grid(ho.distribution)
    phi_q = _basis(ho.distribution).values(grid) @ ho.element_nodes(element)
    phi_inf = evaluator.map_onto_limit(int(element), grid)
    return float(np.linalg.norm(phi_q - phi_inf, axis=1).max())


def model_distance(evaluator: LimitEvaluator | None, ho: HighOrderMesh, length=None,
                   grid_degree=DISTANCE_GRID_DEGREE) -> DistanceReport:
    """Adimensional distance between a high-order surface mesh and the limit model.

    Parameters
    ----------
    evaluator : LimitEvaluator or None
        Defaults to the evaluator stored on ``ho``.
    ho : HighOrderMesh
    length : float, optional
        Characteristic length; the bounding-box diagonal by default.
    grid_degree : int
    """
    evaluator = evaluator or ho.evaluator
    if evaluator is None:
        raise ValueError("a limit evaluator is required")
    if length is None:
        length = ho.linear.bounding_box_diagonal()
    if not length > 0:
        raise ValueError("characteristic length must be positive")
    grid = distance_grid(ho.distribution, grid_degree)
    per_elem = np.array([element_distance(evaluator, ho, e, grid) for e in range(ho.n_elements)])
    sid = ho.model.triangle_surface(ho.n_elements)
    surfaces = {int(s): float(per_elem[sid == s].max()) for s in np.unique(sid)}
    dmax = max(surfaces.values()) if surfaces else 0.0
    return DistanceReport(surfaces, dmax / length, float(length),
                          f"lattice degree {grid_degree} + element nodes", per_elem)


# ----------------------------------------------------------------------
# Lebesgue constants


@dataclass
class LebesgueReport:
    """Estimated Lebesgue constant of a nodal distribution."""

    degree: int
    kind: str
    value: float
    resolution: int
    cond: float


def lebesgue_constant(dist, resolution=LEBESGUE_RESOLUTION, kind=None, chunk=4096) -> LebesgueReport:
    """Largest sum of absolute Lagrange basis values over a triangle lattice.

    Parameters
    ----------
    dist : NodalDistribution or int
        Distribution, or a degree combined with ``kind``.
    resolution : int
        Degree of the sampling lattice.
    kind : str, optional
    """
    if not isinstance(dist, NodalDistribution):
        dist = make_distribution(int(dist), kind or "equispaced", 2)
    basis = _basis(dist)
    if dist.kind == "equispaced" and dist.degree > 10:
        warnings.warn(f"Vandermonde condition number {basis.cond:.3g} at degree {dist.degree}",
                      stacklevel=2)
    grid = simplex_lattice(resolution, dist.dim)
    lam = 0.0
    for i in range(0, len(grid), chunk):
        lam = max(lam, float(np.abs(basis.values(grid[i:i + chunk])).sum(axis=1).max()))
    return LebesgueReport(dist.degree, dist.kind, lam, int(resolution), basis.cond)


def best_approx_bounds(distance, lebesgue):
    """Bounds on the best-approximation error implied by an interpolation error.

    Returns ``(distance / (1 + lebesgue), distance)``.
    """
    return distance / (1.0 + lebesgue), float(distance)


# ----------------------------------------------------------------------
# normals and angles


def element_normals(ho: HighOrderMesh, element, lam, unit=True):
    """Normals of a surface element at barycentric points.

    Returns
    -------
    ndarray, shape (n, 3)
        Oriented by the element orientation; unit length unless ``unit`` is
        false.
    """
    g = _basis(ho.distribution).gradients(np.atleast_2d(lam))
    x = ho.element_nodes(element)
    n = np.cross(g[0] @ x, g[1] @ x)
    if unit:
        n = n / np.linalg.norm(n, axis=1, keepdims=True)
    return n


def _edge_lam(tri, a, b, s):
    """Barycentric points of ``(1 - s) a + s b`` in triangle ``tri``."""
    lam = np.zeros((len(s), 3))
    lam[:, list(tri).index(a)] = 1.0 - s
    lam[:, list(tri).index(b)] += s
    return lam


def _edge_derivative(ho, t, a, b, s):
    """``dx/ds`` of element ``t`` along the edge from ``a`` to ``b``."""
    tri = list(ho.linear.triangles[t])
    g = _basis(ho.distribution).gradients(_edge_lam(tri, a, b, s))
    d = np.zeros(3)
    d[tri.index(b)] += 1.0
    d[tri.index(a)] -= 1.0
    x = ho.element_nodes(t)
    return d[1] * (g[0] @ x) + d[2] * (g[1] @ x)


def _normal_pair(ho, edge, s):
    a, b = int(edge[0]), int(edge[1])
    e = ho.linear.edge_id(a, b)
    ts = ho.linear.edge_triangles[e]
    if ts[1] < 0:
        raise ValueError(f"edge {edge} has a single incident element")
    out = []
    for t in ts:
        tri = ho.linear.triangles[t]
        n = element_normals(ho, t, _edge_lam(tri, a, b, s), unit=False)
        out.append(n)
    return out


def _angles(n1, n2):
    l1 = np.linalg.norm(n1, axis=1)
    l2 = np.linalg.norm(n2, axis=1)
    ok = (l1 > 0) & (l2 > 0) & np.isfinite(l1) & np.isfinite(l2)
    c = np.full(len(n1), np.nan)
    c[ok] = np.einsum("ij,ij->i", n1[ok], n2[ok]) / (l1[ok] * l2[ok])
    return np.degrees(np.arccos(np.clip(c, -1.0, 1.0))), ok


def edge_normal_angle(ho: HighOrderMesh, edge, samples=EDGE_SAMPLES):
    """Largest angle in degrees between the normals of the two elements of an edge.

    Parameters
    ----------
    ho : HighOrderMesh
    edge : pair of int
        Linear vertex ids.
    samples : int
        Interior samples; the endpoints are excluded.
    """
    s = np.arange(1, samples + 1) / (samples + 1)
    n1, n2 = _normal_pair(ho, edge, s)
    ang, ok = _angles(n1, n2)
    if not ok.all():
        warnings.warn(f"degenerate normal at {int((~ok).sum())} samples of edge {tuple(edge)}",
                      stacklevel=2)
    if not ok.any():
        return float("nan")
    return float(ang[ok].max())


def normal_angles(ho: HighOrderMesh, samples=EDGE_SAMPLES):
    """Normal angle per linear edge, NaN for edges on curves or the boundary."""
    lin = ho.linear
    sid = ho.model.triangle_surface(lin.n_triangles)
    curve_edges = ho.model.edge_curve()
    out = np.full(len(lin.edges), np.nan)
    for e, (a, b) in enumerate(lin.edges.tolist()):
        t0, t1 = lin.edge_triangles[e]
        if t1 < 0 or sid[t0] != sid[t1] or (a, b) in curve_edges:
            continue
        out[e] = edge_normal_angle(ho, (a, b), samples)
    return out


def max_normal_angle(ho: HighOrderMesh, samples=EDGE_SAMPLES):
    """Largest normal angle over the edges interior to feature surfaces."""
    ang = normal_angles(ho, samples)
    return float(np.nanmax(ang)) if np.isfinite(ang).any() else 0.0


def curve_average_angle(ho: HighOrderMesh, curve_id, points=CURVE_GAUSS_POINTS):
    """Arclength average of the normal angle along a feature curve, in degrees.

    Each curve edge is integrated with a ``points``-point Gauss rule.
    """
    x, w = np.polynomial.legendre.leggauss(points)
    s, w = (x + 1) / 2, w / 2
    num = den = 0.0
    for a, b in sorted(ho.model.curves[curve_id]):
        n1, n2 = _normal_pair(ho, (a, b), s)
        ang, ok = _angles(n1, n2)
        t = ho.linear.edge_triangles[ho.linear.edge_id(a, b)][0]
        speed = np.linalg.norm(_edge_derivative(ho, t, a, b, s), axis=1)
        num += float((w * speed * np.where(ok, ang, 0.0)).sum())
        den += float((w * speed * ok).sum())
    if not den > 0:
        raise ValueError(f"curve {curve_id} has zero length")
    return num / den


def _point_tangents(ho, model, vertex):
    out = {}
    for cid, edges in sorted(model.curves.items()):
        for a, b in sorted(edges):
            if vertex in (a, b):
                other = b if a == vertex else a
                t = ho.linear.edge_triangles[ho.linear.edge_id(a, b)][0]
                d = _edge_derivative(ho, t, vertex, other, np.zeros(1))[0]
                out.setdefault(cid, []).append(d / np.linalg.norm(d))
    return out


def point_tangent_angle(ho: HighOrderMesh, point_id, model: FeatureModel | None = None):
    """Angle in degrees between the two curves meeting at a point (0 when collinear).

    Returns NaN unless exactly two curve edges meet at the point.
    """
    model = model or ho.model
    tangents = _point_tangents(ho, model, model.points[point_id])
    ts = [t for v in tangents.values() for t in v]
    if len(ts) != 2:
        return float("nan")
    return float(np.degrees(np.arccos(np.clip(-ts[0] @ ts[1], -1.0, 1.0))))


# ----------------------------------------------------------------------
# feature detection


@dataclass
class SmoothingSuggestion:
    """Feature that measures smooth under the threshold.

    Attributes
    ----------
    feature_id : int
    kind : str
        ``"curve"`` or ``"point"``.
    angle : float or None
        Average normal angle (curves) or tangent angle (points) in degrees;
        None for isolated points.
    delta : float
        Threshold in degrees.
    n_curves : int or None
        Incident curves (points only).
    suggested : bool
    """

    feature_id: int
    kind: str
    angle: float | None
    delta: float
    n_curves: int | None = None
    suggested: bool = True

    def to_dict(self):
        return asdict(self)


def detect_smooth_candidates(ho: HighOrderMesh, model: FeatureModel | None = None, delta=17.0,
                             kinds=("curve", "point"), include_all=False):
    """Features whose measured angle is below ``delta``.

    Curves are measured with :func:`curve_average_angle`. Points with two
    incident curves are measured with :func:`point_tangent_angle`; points
    with no incident curve are always suggested and points with one or more
    than two are left to the user.

    Parameters
    ----------
    ho : HighOrderMesh
    model : FeatureModel, optional
        Defaults to ``ho.model``.
    delta : float
        Threshold in degrees, in (0, 180).
    kinds : sequence of str
    include_all : bool
        Also return features that are not suggested.
    """
    model = model or ho.model
    if not 0.0 < delta < 180.0:
        raise ValueError("delta must lie in (0, 180) degrees")
    out = []
    if "curve" in kinds:
        for cid in sorted(model.curves):
            edges = model.curves[cid]
            if any(ho.linear.edge_triangles[ho.linear.edge_id(a, b)][1] < 0 for a, b in edges):
                continue  # boundary curve, no angle
            ang = curve_average_angle(ho, cid)
            out.append(SmoothingSuggestion(int(cid), "curve", ang, float(delta), None, ang < delta))
    if "point" in kinds:
        for pid in sorted(model.points):
            v = model.points[pid]
            tangents = _point_tangents(ho, model, v)
            n = len(tangents)
            if n == 0:
                out.append(SmoothingSuggestion(int(pid), "point", None, float(delta), 0, True))
            elif n == 2 and sum(len(t) for t in tangents.values()) == 2:
                ang = point_tangent_angle(ho, pid, model)
                out.append(SmoothingSuggestion(int(pid), "point", ang, float(delta), 2, ang < delta))
            else:
                out.append(SmoothingSuggestion(int(pid), "point", None, float(delta), n, False))
    return out if include_all else [s for s in out if s.suggested]


# ----------------------------------------------------------------------
# output


def _plain(obj):
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if hasattr(obj, "__dataclass_fields__"):
        return _plain(asdict(obj))
    return obj


def write_json(obj, path):
    """Write a report (or list of reports) as JSON."""
    with open(path, "w") as f:
        json.dump(_plain(obj), f, indent=2, sort_keys=True)
        f.write("\n")


def write_csv(rows, path, header=None):
    """Write rows (sequences or dicts) as CSV."""
    rows = [_plain(r) for r in rows]
    with open(path, "w", newline="") as f:
        if rows and isinstance(rows[0], dict):
            w = csv.DictWriter(f, fieldnames=header or list(rows[0]))
            w.writeheader()
            w.writerows(rows)
        else:
            w = csv.writer(f)
            if header:
                w.writerow(header)
            w.writerows(rows)
