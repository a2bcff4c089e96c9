"""Feature-aware Loop subdivision, limit masks and the control-mesh solve.

Surface-interior vertices and edges follow Loop's rules. Vertices and
edges on feature curves follow the cubic B-spline curve rules so that a
curve is refined independently of the surfaces on either side. Feature
points never move.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .mesh import FeatureModel, Role, SurfaceMesh, edge_key, validate_model, vertex_roles

__all__ = [
    "SubdivisionError",
    "ConvergenceError",
    "SubdivisionWeights",
    "loop_omega",
    "limit_chi",
    "subdivision_weights",
    "subdivide_curve",
    "subdivide_surface",
    "limit_position_curve",
    "limit_position_surface",
    "limit_operator",
    "ControlMesh",
    "compute_control_mesh",
    "refine_connectivity",
]

log = logging.getLogger(__name__)

CURVE_EDGE_MASK = (0.5, 0.5)
CURVE_VERTEX_MASK = (1.0 / 8.0, 6.0 / 8.0, 1.0 / 8.0)
CURVE_LIMIT_MASK = (1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0)

DIRECT_SOLVER_LIMIT = 200_000


class SubdivisionError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


def loop_omega(k):
    """Loop vertex weight ``omega_k`` for valence ``k``."""
    k = np.asarray(k, dtype=float)
    return (5.0 / 8.0 - (3.0 / 8.0 + 0.25 * np.cos(2.0 * np.pi / k)) ** 2) / k


def limit_chi(k):
    """Limit-mask weight ``chi_k = 1 / (k + 3 / (8 omega_k))``."""
    k = np.asarray(k, dtype=float)
    return 1.0 / (k + 3.0 / (8.0 * loop_omega(k)))


@dataclass(frozen=True)
class SubdivisionWeights:
    valence: int
    omega: float
    chi: float


def subdivision_weights(k) -> SubdivisionWeights:
    if k < 3:
        raise SubdivisionError(f"valence {k} < 3 has no Loop weights")
    return SubdivisionWeights(int(k), float(loop_omega(k)), float(limit_chi(k)))


def limit_position_curve(x_prev, x, x_next):
    """Limit position of a curve vertex, ``(x_prev + 4 x + x_next) / 6``."""
    return (np.asarray(x_prev, float) + 4.0 * np.asarray(x, float) + np.asarray(x_next, float)) / 6.0


def limit_position_surface(x_v, ring):
    """Limit position of a surface-interior vertex with its ``k`` neighbors."""
    ring = np.asarray(ring, dtype=float)
    k = len(ring)
    if k < 3:
        raise SubdivisionError(f"valence {k} < 3 has no limit mask")
    c = float(limit_chi(k))
    return (1.0 - k * c) * np.asarray(x_v, float) + c * ring.sum(axis=0)


def subdivide_curve(points, fixed=None, closed=False):
    """One step of the cubic B-spline curve scheme.

    Parameters
    ----------
    points : array_like, shape (n, d)
        Ordered polyline vertices (for a loop, without repeating the first).
    fixed : array_like of bool, optional
        Feature points that keep their position. Defaults to the two ends
        of an open polyline.
    closed : bool

    Returns
    -------
    ndarray
        ``2 n - 1`` points (open) or ``2 n`` points (closed), alternating
        old vertices and edge midpoints.
    """
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    n = len(p)
    n_edges = n if closed else n - 1
    if n_edges < 1:
        raise SubdivisionError("polyline needs at least one edge")
    fx = np.zeros(n, dtype=bool) if fixed is None else np.asarray(fixed, bool).copy()
    if fixed is None and not closed:
        fx[[0, -1]] = True
    if not closed and not (fx[0] and fx[-1]):
        raise SubdivisionError("open polyline ends must be feature points")
    out = np.empty((n + n_edges, p.shape[1]))
    nxt = np.roll(p, -1, axis=0)
    prv = np.roll(p, 1, axis=0)
    vert = CURVE_VERTEX_MASK[0] * prv + CURVE_VERTEX_MASK[1] * p + CURVE_VERTEX_MASK[2] * nxt
    vert[fx] = p[fx]
    out[0::2] = vert
    out[1::2] = 0.5 * (p[:n_edges] + nxt[:n_edges])
    return out


@dataclass
class Refinement:
    """Connectivity of one 1-to-4 split with per-vertex stencils.

    ``stencils[i]`` is ``(indices, weights)`` expressing new vertex ``i`` in
    the parent vertices, or ``None`` when the parent data is incomplete.
    Old vertices keep their index; edge ``e`` of ``edges`` becomes vertex
    ``n_parent + e``. Child ``4 t + j`` of triangle ``(a, b, c)`` is
    ``(a, m_ab, m_ca)``, ``(m_ab, b, m_bc)``, ``(m_ca, m_bc, c)`` and
    ``(m_bc, m_ca, m_ab)`` for ``j = 0..3``.
    """

    triangles: np.ndarray
    roles: np.ndarray
    curve_edges: dict
    edges: list
    stencils: list
    n_parent: int

    def edge_vertex(self):
        return {e: self.n_parent + i for i, e in enumerate(self.edges)}

    def matrix(self):
        """Sparse subdivision matrix; incomplete rows are left empty."""
        rows, cols, vals = [], [], []
        for i, st in enumerate(self.stencils):
            if st is None:
                continue
            idx, w = st
            rows.extend([i] * len(idx))
            cols.extend(idx)
            vals.extend(w)
        return sps.csr_matrix((vals, (rows, cols)), shape=(len(self.stencils), self.n_parent))

    def apply(self, x):
        x = np.asarray(x, float)
        out = np.full((len(self.stencils),) + x.shape[1:], np.nan)
        for i, st in enumerate(self.stencils):
            if st is not None:
                idx, w = st
                out[i] = np.dot(w, x[list(idx)])
        return out


def refine_connectivity(triangles, roles, curve_edges, n_vertices=None, complete=None):
    """Split every triangle into four and record the subdivision stencils.

    Parameters
    ----------
    triangles : array_like, shape (m, 3)
    roles : array_like of int
        :class:`Role` per vertex.
    curve_edges : mapping or set
        Sorted vertex pairs on feature curves, optionally mapped to curve ids.
    complete : set of int, optional
        Vertices whose full star is present. When given, the mesh is a
        local patch: vertex stencils are built only for these vertices and
        non-curve edges with a single triangle get ``None`` instead of
        raising.
    """
    tri = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    roles = np.asarray(roles, dtype=np.int64)
    n = len(roles) if n_vertices is None else int(n_vertices)
    if not isinstance(curve_edges, dict):
        curve_edges = {edge_key(*e): None for e in curve_edges}
    opp = {}
    nbrs = [set() for _ in range(n)]
    for a, b, c in tri.tolist():
        for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
            opp.setdefault((x, y) if x < y else (y, x), []).append(z)
            nbrs[x].add(y)
            nbrs[y].add(x)
    curve_nb = {}
    for a, b in curve_edges:
        curve_nb.setdefault(a, []).append(b)
        curve_nb.setdefault(b, []).append(a)

    stencils = []
    for v in range(n):
        r = roles[v]
        if r == Role.POINT or not nbrs[v]:
            stencils.append(((v,), (1.0,)))
        elif complete is not None and v not in complete:
            stencils.append(None)
        elif r == Role.CURVE:
            a, b = curve_nb[v]
            stencils.append(((a, v, b), CURVE_VERTEX_MASK))
        else:
            ring = sorted(nbrs[v])
            k = len(ring)
            w = float(loop_omega(k))
            stencils.append(((v, *ring), (1.0 - k * w,) + (w,) * k))

    edges = sorted(opp)
    for e in edges:
        a, b = e
        if e in curve_edges:
            stencils.append(((a, b), CURVE_EDGE_MASK))
        elif len(opp[e]) == 2:
            c, d = opp[e]
            stencils.append(((a, b, c, d), (0.375, 0.375, 0.125, 0.125)))
        elif complete is None:
            raise SubdivisionError(f"interior edge {e} lacks two incident triangles")
        else:
            stencils.append(None)

    ev = {e: n + i for i, e in enumerate(edges)}
    kids = np.empty((4 * len(tri), 3), dtype=np.int64)
    for t, (a, b, c) in enumerate(tri.tolist()):
        mab = ev[(a, b) if a < b else (b, a)]
        mbc = ev[(b, c) if b < c else (c, b)]
        mca = ev[(c, a) if c < a else (a, c)]
        kids[4 * t: 4 * t + 4] = ((a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mbc, mca, mab))
    new_roles = np.concatenate(
        [roles[:n], [Role.CURVE if e in curve_edges else Role.INTERIOR for e in edges]]
    ).astype(np.int64)
    new_curves = {}
    for e, cid in curve_edges.items():
        m = ev[e]
        new_curves[edge_key(e[0], m)] = cid
        new_curves[edge_key(m, e[1])] = cid
    return Refinement(kids, new_roles, new_curves, edges, stencils, n)


def subdivide_surface(surface: SurfaceMesh, model: FeatureModel, return_refinement=False):
    """One global subdivision step of a surface and its feature model.

    Returns
    -------
    mesh : SurfaceMesh
    model : FeatureModel
        Child entities keep the parent ids; triangle ``t`` becomes
        ``4 t .. 4 t + 3``.
    refinement : Refinement
        Only when ``return_refinement`` is true.
    """
    validate_model(surface, model)
    roles = vertex_roles(surface, model)
    ref = refine_connectivity(surface.triangles, roles, model.edge_curve())
    x = ref.matrix() @ surface.vertices
    mesh = SurfaceMesh(x, ref.triangles)
    curves = {}
    for e, cid in ref.curve_edges.items():
        curves.setdefault(cid, []).append(e)
    surfaces = {
        sid: [4 * t + j for t in tris for j in range(4)] for sid, tris in model.surfaces.items()
    }
    new_model = FeatureModel(points=model.points, curves=curves, surfaces=surfaces)
    if return_refinement:
        return mesh, new_model, ref
    return mesh, new_model


def _curve_neighbors(model: FeatureModel):
    nb = {}
    for a, b in model.edge_curve():
        nb.setdefault(a, []).append(b)
        nb.setdefault(b, []).append(a)
    return nb


def limit_operator(surface: SurfaceMesh, model: FeatureModel):
    """Sparse matrix mapping control positions to limit positions.

    Rows are the identity for feature points, the curve limit mask along
    the curve for curve vertices and the surface limit mask otherwise.
    """
    roles = vertex_roles(surface, model)
    cnb = _curve_neighbors(model)
    rows, cols, vals = [], [], []
    for v in range(surface.n_vertices):
        ring = surface.one_rings[v]
        if roles[v] == Role.POINT or len(ring) == 0:
            rows.append(v)
            cols.append(v)
            vals.append(1.0)
        elif roles[v] == Role.CURVE:
            a, b = cnb[v]
            rows += [v, v, v]
            cols += [a, v, b]
            vals += list(CURVE_LIMIT_MASK)
        else:
            k = len(ring)
            c = float(limit_chi(k))
            rows += [v] * (k + 1)
            cols += [v] + ring.tolist()
            vals += [1.0 - k * c] + [c] * k
    n = surface.n_vertices
    return sps.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass(frozen=True)
class ControlMesh:
    """Control mesh whose limit interpolates the input vertices.

    Attributes
    ----------
    mesh : SurfaceMesh
        Input topology with control positions ``X^C``.
    model : FeatureModel
    residual : float
        ``max |L X^C - X^0|``.
    """

    mesh: SurfaceMesh
    model: FeatureModel
    residual: float

    @property
    def positions(self):
        return self.mesh.vertices


def compute_control_mesh(surface: SurfaceMesh, model: FeatureModel, rtol=1e-10) -> ControlMesh:
    """Solve ``L X^C = X^0`` so that the limit passes through the input vertices.

    Raises
    ------
    ConvergenceError
        When ``max |L X^C - X^0|`` exceeds ``rtol`` times the bounding-box
        diagonal.
    """
    validate_model(surface, model)
    L = limit_operator(surface, model).tocsc()
    x0 = np.asarray(surface.vertices)
    n = surface.n_vertices
    if n <= DIRECT_SOLVER_LIMIT:
        xc = spla.splu(L).solve(np.ascontiguousarray(x0))
    else:
        xc = np.empty_like(x0)
        for j in range(3):
            sol, info = spla.bicgstab(L, x0[:, j], rtol=1e-14, atol=0.0, maxiter=10_000)
            xc[:, j] = sol
    residual = float(np.abs(L @ xc - x0).max()) if n else 0.0
    bound = rtol * max(surface.bounding_box_diagonal(), np.finfo(float).tiny)
    if residual > bound:
        raise ConvergenceError(f"control mesh residual {residual:.3e} exceeds {bound:.3e}")
    log.debug("control mesh solved: n=%d residual=%.3e", n, residual)
    return ControlMesh(SurfaceMesh(xc, surface.triangles), model, residual)
