"""Curved tetrahedral meshes from a curved boundary.

The volume is elevated to degree ``q`` with straight sides, its boundary
nodes are replaced by the nodes of the high-order surface mesh, and the
boundary elements are accommodated to the curved boundary by transfinite
interpolation applied to edges, then faces, then element interiors.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .interpolation import HighOrderMesh, build_ho_topology, generate_ho_surface_mesh
from .mesh import FeatureError, FeatureModel, MeshError, VolumeMesh, edge_key, extract_boundary
from .nodes import NodalDistribution, lagrange_basis, make_distribution, simplex_quadrature

__all__ = [
    "QualityReport",
    "SmoothingPlan",
    "curve_volume_mesh",
    "element_quality",
    "generate_ho_volume_mesh",
    "mesh_quality",
    "smooth_features",
    "tfi_edge",
    "tfi_face",
    "tfi_tet",
]


# ----------------------------------------------------------------------
# feature smoothing


@dataclass(frozen=True)
class SmoothingPlan:
    """Feature curves and points to remove.

    Attributes
    ----------
    curves : tuple of int
    points : tuple of int
    """

    curves: tuple = ()
    points: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "curves", tuple(sorted(int(c) for c in self.curves)))
        object.__setattr__(self, "points", tuple(sorted(int(p) for p in self.points)))

    @property
    def empty(self):
        return not self.curves and not self.points

    def to_json(self):
        return {"curves": list(self.curves), "points": list(self.points)}

    @classmethod
    def from_json(cls, data):
        """Plan from ``{"curves": [...], "points": [...]}`` or a suggestion list.

        Suggestion entries (dicts with ``kind`` and ``feature_id``) are
        included when their ``suggested`` flag is true or absent.
        """
        if isinstance(data, dict) and "suggestions" in data:
            data = data["suggestions"]
        if isinstance(data, list):
            picked = [s for s in data if s.get("suggested", True)]
            return cls(
                curves=[s["feature_id"] for s in picked if s["kind"] == "curve"],
                points=[s["feature_id"] for s in picked if s["kind"] == "point"],
            )
        return cls(curves=data.get("curves", ()), points=data.get("points", ()))

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_json(json.load(f))

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=2)
            f.write("\n")


def _edge_triangles(triangles):
    out = {}
    for t, tri in enumerate(np.asarray(triangles).tolist()):
        for i in range(3):
            out.setdefault(edge_key(tri[i], tri[(i + 1) % 3]), []).append(t)
    return out


def smooth_features(model: FeatureModel, plan: SmoothingPlan | None, triangles=None) -> FeatureModel:
    """Remove features and merge the features incident to them.

    Each smoothed curve merges the surfaces on its two sides under the
    smallest id. Each smoothed point is removed; when two curves meet
    there they are merged under the smaller id. Curves are processed
    before points. Mesh coordinates and connectivity are not touched.

    Parameters
    ----------
    model : FeatureModel
    plan : SmoothingPlan or None
    triangles : array_like, shape (m, 3), optional
        Triangles the surface ids refer to (``boundary_faces`` for a
        volume). Required when curves are smoothed.

    Raises
    ------
    FeatureError
        Unknown ids, a smoothed point at the end of a curve or with more
        than two incident curves, or a remaining curve left inside a merged
        surface.
    """
    if plan is None or plan.empty:
        return model
    unknown = [c for c in plan.curves if c not in model.curves]
    unknown += [p for p in plan.points if p not in model.points]
    if unknown:
        raise FeatureError("unknown feature ids in smoothing plan", unknown)
    curves = {cid: set(e) for cid, e in model.curves.items()}
    points = dict(model.points)
    surfaces = {sid: set(t) for sid, t in model.surfaces.items()}

    if plan.curves:
        if triangles is None:
            raise ValueError("triangles are required to smooth curves")
        e2t = _edge_triangles(triangles)
        n = len(np.asarray(triangles))
        tri_sid = model.triangle_surface(n)
        parent = {sid: sid for sid in surfaces}

        def find(s):
            while parent[s] != s:
                s = parent[s]
            return s

        for cid in plan.curves:
            sids = {int(tri_sid[t]) for e in curves[cid] for t in e2t.get(e, ())}
            sids.discard(-1)
            if len(sids) < 2:
                raise FeatureError("smoothed curve does not separate two surfaces", [cid])
            roots = sorted({find(s) for s in sids})
            for r in roots[1:]:
                parent[r] = roots[0]
            del curves[cid]
        merged = {}
        for sid in sorted(surfaces):
            merged.setdefault(find(sid), set()).update(surfaces[sid])
        surfaces = merged

    for pid in plan.points:
        v = points[pid]
        inc = sorted(cid for cid, edges in curves.items() if any(v in e for e in edges))
        if len(inc) == 2:
            keep, drop = inc
            curves[keep] |= curves.pop(drop)
        elif len(inc) == 1 and sum(v in e for e in curves[inc[0]]) == 2:
            pass  # the point lies inside a closed curve; removing it leaves the loop
        elif len(inc) != 0:
            raise FeatureError(f"point {pid} has {len(inc)} incident curves; smooth it manually", [pid])
        del points[pid]

    if plan.curves:
        tri_sid = np.full(n, -1, dtype=np.int64)
        for sid, tris in surfaces.items():
            tri_sid[list(tris)] = sid
        inside = sorted(
            cid for cid, edges in curves.items()
            if any(len(e2t.get(e, ())) == 2 and tri_sid[e2t[e][0]] == tri_sid[e2t[e][1]] for e in edges)
        )
        if inside:
            raise FeatureError("curves left inside a merged surface; add them to the plan", inside)
    return FeatureModel(points=points, curves=curves, surfaces=surfaces)


# ----------------------------------------------------------------------
# transfinite interpolation


def tfi_edge(x0, x1, q, distribution="equispaced"):
    """Interior edge nodes on the straight segment between two endpoints.

    Returns
    -------
    ndarray, shape (q - 1, 3)
        In the order of the reference segment nodes, from ``x0`` to ``x1``.
    """
    kind = distribution.kind if isinstance(distribution, NodalDistribution) else distribution
    t = make_distribution(q, kind, 1).points[2:, 1]
    x0, x1 = np.asarray(x0, dtype=float), np.asarray(x1, dtype=float)
    return x0 + t[:, None] * (x1 - x0)


def _projection_rows(dist, basis, p):
    """Interpolation rows at ``p``; points that coincide with nodes become unit rows."""
    rows = basis.values(p)
    diff = np.abs(p[:, None, :] - dist.points[None, :, :]).max(axis=2)
    hit, node = np.nonzero(diff < 1e-13)
    rows[hit] = 0.0
    rows[hit, node] = 1.0
    return rows


@lru_cache(maxsize=None)
def _tfi_matrix(q, kind, dim):
    """Linear map from all nodes to the blended interior nodes.

    Sum over vertices ``j`` of ``lambda_j`` times the alternating sum of the
    boundary entities containing ``j``, each evaluated at the projection
    that keeps the other barycentric coordinates and recomputes the ``j``-th.
    """
    dist = make_distribution(q, kind, dim)
    basis = lagrange_basis(q, kind, dim)
    n = dim + 1
    inner = np.flatnonzero((dist.lattice > 0).sum(axis=1) == n)
    lam = dist.points[inner]
    T = np.zeros((len(inner), dist.size))
    for j in range(n):
        others = [i for i in range(n) if i != j]
        term = np.zeros_like(T)
        for size in range(1, n - 1):
            for drop in itertools.combinations(others, size):
                p = lam.copy()
                p[:, list(drop)] = 0.0
                keep = [i for i in others if i not in drop]
                p[:, j] = 1.0 - p[:, keep].sum(axis=1)
                term += (-1.0) ** (size + 1) * _projection_rows(dist, basis, p)
        term[:, j] += (-1.0) ** n
        T += lam[:, j : j + 1] * term
    T.setflags(write=False)
    return inner, T


def _tfi(x, dist: NodalDistribution):
    x = np.asarray(x, dtype=float)
    inner, T = _tfi_matrix(dist.degree, dist.kind, dist.dim)
    out = x.copy()
    if len(inner):
        out[..., inner, :] = np.einsum("ij,...jk->...ik", T, x)
    return out


def tfi_face(x, q, distribution="equispaced"):
    """Relocate the interior nodes of a triangle from its fixed edge nodes.

    Parameters
    ----------
    x : array_like, shape (..., N_q, 3)
        Triangle nodes in canonical order; interior rows are ignored.
    q : int
    distribution : str or NodalDistribution

    Returns
    -------
    ndarray
        Copy of ``x`` with the interior nodes replaced.
    """
    dist = distribution if isinstance(distribution, NodalDistribution) else make_distribution(q, distribution, 2)
    return _tfi(x, dist)


def tfi_tet(x, q, distribution="equispaced"):
    """Relocate the interior nodes of a tet from its fixed face and edge nodes.

    Parameters
    ----------
    x : array_like, shape (..., N_q, 3)
        Tet nodes in canonical order; interior rows are ignored.
    q : int
    distribution : str or NodalDistribution

    Returns
    -------
    ndarray
        Copy of ``x`` with the interior nodes replaced.
    """
    dist = distribution if isinstance(distribution, NodalDistribution) else make_distribution(q, distribution, 3)
    return _tfi(x, dist)


# ----------------------------------------------------------------------
# quality


@dataclass
class QualityReport:
    """Element quality of one pipeline stage.

    Attributes
    ----------
    stage : str
        ``boundary``, ``no-TFI``, ``TFI`` or ``post-optimization-hook``.
    values : ndarray
        Quality per element in [0, 1].
    min_quality : float
    n_inverted : int
    inverted : list of int
    """

    stage: str
    values: np.ndarray = field(repr=False)
    min_quality: float
    n_inverted: int
    inverted: list = field(repr=False)

    def to_dict(self, per_element=False):
        out = {"stage": self.stage, "min_quality": self.min_quality, "n_inverted": self.n_inverted,
               "mean_quality": float(self.values.mean()) if len(self.values) else 1.0,
               "inverted": list(self.inverted)}
        if per_element:
            out["values"] = self.values.tolist()
        return out


def _quality(nodes, reference, dist: NodalDistribution):
    """Quality of a batch of elements, shape (m,)."""
    nodes = np.asarray(nodes, dtype=float)
    reference = np.asarray(reference, dtype=float)
    d = dist.dim
    basis = lagrange_basis(dist.degree, dist.kind, d)
    qp, qw = simplex_quadrature(2 * dist.degree, d)
    lam = np.concatenate([qp, dist.points])
    g = basis.gradients(lam)
    D = np.einsum("dnN,eNk->enkd", g, nodes)
    D0 = (reference[:, 1:] - reference[:, :1]).transpose(0, 2, 1)
    if d == 3:
        J = D @ np.linalg.inv(D0)[:, None]
        det = np.linalg.det(J)
        fro = (J * J).sum(axis=(2, 3))
    else:
        G = np.einsum("enki,enkj->enij", D, D)
        G0 = np.einsum("eki,ekj->eij", D0, D0)
        fro = np.einsum("eij,enji->en", np.linalg.inv(G0), G)
        n = np.cross(D[..., 0], D[..., 1])
        n0 = np.cross(D0[..., 0], D0[..., 1])
        sign = np.sign(np.einsum("enk,ek->en", n, n0))
        det = sign * np.sqrt(np.maximum(np.linalg.det(G), 0.0) / np.linalg.det(G0)[:, None])
    nq = len(qp)
    bad = (det <= 0).any(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = fro[:, :nq] / (d * np.abs(det[:, :nq]) ** (2.0 / d))
        eta_bar = np.sqrt((eta**2 * qw).sum(axis=1) / qw.sum())
        quality = np.where(bad, 0.0, 1.0 / eta_bar)
    return np.clip(np.nan_to_num(quality, nan=0.0), 0.0, 1.0)


def element_quality(nodes, reference, distribution: NodalDistribution):
    """Jacobian distortion quality of one element against its linear counterpart.

    The pointwise distortion ``|J|_F^2 / (d det(J)^(2/d))`` of the map from
    the linear element is averaged in the L2 sense over a degree-``2q``
    quadrature rule; the quality is its inverse, and 0 when the Jacobian
    determinant is non-positive at a quadrature point or a node.

    Parameters
    ----------
    nodes : array_like, shape (N_q, 3)
    reference : array_like, shape (dim + 1, 3)
        Vertices of the linear element.
    distribution : NodalDistribution
    """
    return float(_quality(np.asarray(nodes)[None], np.asarray(reference)[None], distribution)[0])


def mesh_quality(ho: HighOrderMesh, stage="", nodes=None, chunk=2048) -> QualityReport:
    """Quality of every element of a high-order mesh."""
    x = ho.nodes if nodes is None else nodes
    lin = ho.linear
    cells = lin.tets if ho.dim == 3 else lin.triangles
    vals = np.concatenate([
        _quality(x[ho.elements[i:i + chunk]], lin.vertices[cells[i:i + chunk]], ho.distribution)
        for i in range(0, ho.n_elements, chunk)
    ]) if ho.n_elements else np.zeros(0)
    inv = np.flatnonzero(vals <= 0.0).tolist()
    return QualityReport(stage, vals, float(vals.min()) if len(vals) else 1.0, len(inv), inv)


# ----------------------------------------------------------------------
# volume pipeline


def _entity_nodes(dist: NodalDistribution):
    """Local node indices of the edges, faces and interior of a simplex.

    Edge nodes run from the first to the second vertex. Face nodes are
    returned as full triangle node lists in canonical triangle order.
    """
    lat = dist.lattice
    q = dist.degree
    index = {tuple(r): j for j, r in enumerate(lat.tolist())}
    n = dist.dim + 1
    edges = {}
    for a, b in itertools.combinations(range(n), 2):
        ids = []
        for i in range(1, q):
            r = [0] * n
            r[a], r[b] = q - i, i
            ids.append(index[tuple(r)])
        edges[(a, b)] = ids
    faces = {}
    tri = make_distribution(q, "equispaced", 2).lattice
    for f in itertools.combinations(range(n), 3):
        ids = []
        for r3 in tri.tolist():
            r = [0] * n
            for v, i in zip(f, r3):
                r[v] = i
            ids.append(index[tuple(r)])
        faces[f] = ids
    inner = np.flatnonzero((lat > 0).sum(axis=1) == n)
    return edges, faces, inner


def generate_ho_volume_mesh(mesh: VolumeMesh, model: FeatureModel | None, q, distribution="equispaced",
                            optimize=None, threads=1, keep_stages=False) -> HighOrderMesh:
    """Degree-``q`` tet mesh whose boundary interpolates the limit model.

    Parameters
    ----------
    mesh : VolumeMesh
    model : FeatureModel or None
        Model over ``mesh.boundary_faces``; one smooth surface when None.
    q : int
    distribution : str
        Only equispaced nodes are used for volumes; other kinds warn.
    optimize : callable, optional
        ``optimize(ho, report) -> HighOrderMesh`` run after TFI.
    threads : int
        Worker threads for the surface node evaluation.
    keep_stages : bool
        Keep node coordinates of the straight and pre-TFI stages in
        ``info["stages"]``.

    Returns
    -------
    HighOrderMesh
        ``info`` holds the quality reports, the surface mesh and counts.
    """
    kind = distribution.kind if isinstance(distribution, NodalDistribution) else distribution
    if make_distribution(q, kind, 1).kind != "equispaced":
        warnings.warn("volume meshes use equispaced nodes; ignoring the requested distribution", stacklevel=2)
    dist3 = make_distribution(q, "equispaced", 3)
    dist2 = make_distribution(q, "equispaced", 2)
    surface, smodel, bmap = extract_boundary(mesh, model)
    ho_s = generate_ho_surface_mesh(surface, smodel, q, dist2, threads=threads)
    if model is None:
        model = FeatureModel(surfaces=smodel.surfaces)

    topo = build_ho_topology(mesh, q, dist3)
    nv = mesh.n_vertices
    nodes = np.empty((topo.n_nodes, 3))
    nodes[:nv] = mesh.vertices
    free = np.arange(nv, topo.n_nodes)
    nodes[free] = np.einsum("nk,nkj->nj", dist3.points[topo.local[free]],
                            mesh.vertices[mesh.tets[topo.owner[free]]])
    straight = nodes.copy()

    stopo = build_ho_topology(surface, q, dist2)
    vol_index = {k: i for i, k in enumerate(topo.keys)}
    vmap = bmap.vertex_map
    on_boundary = np.zeros(topo.n_nodes, dtype=bool)
    for i, k in enumerate(stopo.keys):
        g = vol_index.get(tuple(sorted((int(vmap[v]), idx) for v, idx in k)))
        if g is None:
            raise MeshError("boundary node has no volume counterpart", [i])
        nodes[g] = ho_s.nodes[i]
        on_boundary[g] = True
    ho = HighOrderMesh(int(q), nodes, topo.elements, dist3, model, mesh,
                       {"surface": ho_s, "control_residual": ho_s.info.get("control_residual")})
    reports = [mesh_quality(ho_s, "boundary"), mesh_quality(ho, "no-TFI")]
    pre_tfi = nodes.copy()

    relocated = on_boundary.copy()
    relocated[:nv] = False
    affected = np.flatnonzero(relocated[topo.elements].any(axis=1))
    edges, faces, inner = _entity_nodes(dist3)
    el = topo.elements
    # edges
    for e in affected:
        for (a, b), ids in edges.items():
            g = el[e, ids]
            if not on_boundary[g].any():
                nodes[g] = tfi_edge(nodes[el[e, a]], nodes[el[e, b]], q, dist3.kind)
    # faces, each shared face once
    tri_inner = (dist2.lattice > 0).all(axis=1)
    face_ids = {}
    for e in affected:
        for f, ids in faces.items():
            g = el[e, ids]
            key = tuple(sorted(el[e, list(f)].tolist()))
            if key not in face_ids and not on_boundary[g[tri_inner]].any():
                face_ids[key] = g
    if face_ids and tri_inner.any():
        g = np.array(list(face_ids.values()))
        nodes[g] = tfi_face(nodes[g], q, dist2)
    # interiors
    if len(affected) and len(inner):
        g = el[affected]
        nodes[g[:, inner]] = tfi_tet(nodes[g], q, dist3)[:, inner]
    ho.nodes = nodes
    reports.append(mesh_quality(ho, "TFI"))
    if optimize is not None:
        ho = optimize(ho, reports[-1])
        reports.append(mesh_quality(ho, "post-optimization-hook"))
    ho.info.update({"quality": reports, "tfi_elements": len(affected), "boundary_nodes": int(on_boundary.sum())})
    if keep_stages:
        ho.info["stages"] = {"straight": straight, "no-TFI": pre_tfi, "TFI": nodes}
    return ho


def curve_volume_mesh(mesh: VolumeMesh, model: FeatureModel | None, q, plan: SmoothingPlan | None = None,
                      distribution="equispaced", **kwargs) -> HighOrderMesh:
    """Smooth the planned features, then curve the volume mesh.

    Extra keyword arguments go to :func:`generate_ho_volume_mesh`.
    """
    if model is not None:
        model = smooth_features(model, plan, mesh.boundary_faces)
    elif plan is not None and not plan.empty:
        raise FeatureError("a smoothing plan needs a feature model")
    return generate_ho_volume_mesh(mesh, model, q, distribution, **kwargs)
