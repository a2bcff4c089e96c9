"""Linear simplicial meshes, adjacency tables and the feature model.

Meshes are treated as immutable once built: coordinate and connectivity
arrays are flagged read-only and all derived tables are computed in the
constructor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Mapping

import numpy as np

__all__ = [
    "MeshError",
    "NonManifoldError",
    "OrientationError",
    "FeatureError",
    "Role",
    "SurfaceMesh",
    "VolumeMesh",
    "FeatureModel",
    "VertexClass",
    "BoundaryMap",
    "edge_key",
    "classify_vertex",
    "vertex_roles",
    "infer_features",
    "validate_model",
    "extract_boundary",
    "trace_chains",
]

# outward faces of a positively oriented tet, indexed by the opposite vertex
TET_FACES = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]])
# tet edges in the usual high-order ordering
TET_EDGES = np.array([[0, 1], [1, 2], [2, 0], [3, 0], [3, 2], [3, 1]])


class MeshError(ValueError):
    """Invalid mesh input. ``entities`` lists the offending ids."""

    def __init__(self, message, entities=()):
        self.entities = list(entities)
        if self.entities:
            shown = ", ".join(str(e) for e in self.entities[:10])
            more = "" if len(self.entities) <= 10 else f" (+{len(self.entities) - 10} more)"
            message = f"{message}: {shown}{more}"
        super().__init__(message)


class NonManifoldError(MeshError):
    pass


class OrientationError(MeshError):
    pass


class FeatureError(MeshError):
    pass


class Role(IntEnum):
    """Feature role of a vertex."""

    INTERIOR = 0
    CURVE = 1
    POINT = 2


def edge_key(a, b):
    a, b = int(a), int(b)
    return (a, b) if a < b else (b, a)


def _readonly(a):
    a.setflags(write=False)
    return a


class SurfaceMesh:
    """Oriented manifold triangle mesh with adjacency.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
    triangles : array_like of int, shape (m, 3)
        Vertex triples; consistently oriented.

    Attributes
    ----------
    edges : ndarray, shape (E, 2)
        Undirected edges as sorted vertex pairs, lexicographically sorted.
    triangle_edges : ndarray, shape (m, 3)
        Edge id of local edge ``i`` = ``(t[i], t[(i+1) % 3])``.
    edge_triangles : ndarray, shape (E, 2)
        Incident triangles of each edge, ``-1`` when missing (boundary).
    one_rings : list of ndarray
        Neighbors of each vertex in counterclockwise order. Closed fans
        start at the smallest neighbor; open fans start at the boundary
        neighbor whose edge has no predecessor.
    ring_triangles : list of ndarray
        Triangle between ``one_rings[v][i]`` and ``one_rings[v][i+1]``.
    ring_closed : ndarray of bool
    """

    def __init__(self, vertices, triangles):
        v = np.array(vertices, dtype=float).reshape(-1, 3)
        t = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle references a missing vertex")
        bad = np.flatnonzero((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 2] == t[:, 0]))
        if len(bad):
            raise MeshError("degenerate triangles with repeated vertices", bad.tolist())
        self.vertices = _readonly(v)
        self.triangles = _readonly(t)
        self._build_edges()
        self._build_rings()

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def _build_edges(self):
        t = self.triangles
        directed = t[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        keys = np.sort(directed, axis=1)
        if len(keys):
            edges, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        else:
            edges, inv, counts = np.zeros((0, 2), np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64)
        inv = inv.reshape(-1)
        over = np.flatnonzero(counts > 2)
        if len(over):
            raise NonManifoldError(
                "edges shared by more than two triangles",
                [tuple(int(x) for x in edges[e]) for e in over],
            )
        forward = (directed[:, 0] < directed[:, 1]).astype(np.int64)
        nfwd = np.bincount(inv, weights=forward, minlength=len(edges))
        wrong = np.flatnonzero((counts == 2) & (nfwd != 1))
        if len(wrong):
            raise OrientationError(
                "inconsistently oriented triangles across edges",
                [tuple(int(x) for x in edges[e]) for e in wrong],
            )
        et = -np.ones((len(edges), 2), dtype=np.int64)
        tri = np.repeat(np.arange(len(t)), 3)
        order = np.argsort(inv, kind="stable")
        starts = np.concatenate([[0], np.cumsum(counts)])
        for e in range(len(edges)):
            sl = order[starts[e]:starts[e + 1]]
            et[e, : len(sl)] = tri[sl]
        self.edges = _readonly(edges.astype(np.int64))
        self.edge_counts = _readonly(counts.astype(np.int64))
        self.triangle_edges = _readonly(inv.reshape(-1, 3).astype(np.int64))
        self.edge_triangles = _readonly(et)
        self._edge_index = {(int(a), int(b)): i for i, (a, b) in enumerate(edges)}

    def _build_rings(self):
        n = self.n_vertices
        nxt = [dict() for _ in range(n)]
        tri_of = [dict() for _ in range(n)]
        for ti, (a, b, c) in enumerate(self.triangles.tolist()):
            nxt[a][b] = c
            tri_of[a][b] = ti
            nxt[b][c] = a
            tri_of[b][c] = ti
            nxt[c][a] = b
            tri_of[c][a] = ti
        rings, rtris, closed = [], [], np.zeros(n, dtype=bool)
        pinched = []
        for v in range(n):
            m = nxt[v]
            if not m:
                rings.append(np.zeros(0, np.int64))
                rtris.append(np.zeros(0, np.int64))
                continue
            heads = set(m) - set(m.values())
            if len(heads) > 1:
                pinched.append(v)
                heads = {min(heads)}
            if heads:
                start = heads.pop()
            else:
                start = min(m)
                closed[v] = True
            ring, rt = [start], []
            cur = start
            while cur in m:
                rt.append(tri_of[v][cur])
                cur = m[cur]
                if cur == start:
                    break
                ring.append(cur)
            if len(rt) != len(m):
                pinched.append(v)
            rings.append(np.array(ring, dtype=np.int64))
            rtris.append(np.array(rt, dtype=np.int64))
        if pinched:
            raise NonManifoldError("non-manifold (pinched) vertices", sorted(set(pinched)))
        self.one_rings = rings
        self.ring_triangles = rtris
        self.ring_closed = _readonly(closed)

    def edge_id(self, a, b):
        """Id of the undirected edge ``(a, b)``; ``KeyError`` if absent."""
        return self._edge_index[edge_key(a, b)]

    def has_edge(self, a, b):
        return edge_key(a, b) in self._edge_index

    def valence(self, v):
        return len(self.one_rings[v])

    def boundary_edges(self):
        """Edge ids with a single incident triangle."""
        return np.flatnonzero(self.edge_counts == 1)

    def bounding_box_diagonal(self):
        if not len(self.vertices):
            return 0.0
        return float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))

    def signed_volume(self):
        """Divergence-theorem volume; positive for outward closed surfaces."""
        p = self.vertices[self.triangles]
        return float(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0)

    def areas(self):
        p = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)


class VolumeMesh:
    """Tetrahedral mesh with positively oriented elements.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
    tets : array_like of int, shape (m, 4)
    check_orientation : bool
        Reject tets with non-positive signed volume.

    Attributes
    ----------
    boundary_faces : ndarray, shape (F, 3)
        Faces incident to exactly one tet, oriented outward, ordered by
        ``(tet, local face)``.
    boundary_owner : ndarray, shape (F, 2)
        ``(tet, local face)`` of each boundary face; local face ``i`` is the
        face opposite vertex ``i``.
    """

    def __init__(self, vertices, tets, check_orientation=True):
        v = np.array(vertices, dtype=float).reshape(-1, 3)
        t = np.array(tets, dtype=np.int64).reshape(-1, 4)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("tet references a missing vertex")
        vol = self._volumes(v, t)
        bad = np.flatnonzero(vol <= 0)
        if check_orientation and len(bad):
            raise OrientationError("tets with non-positive signed volume", bad.tolist())
        self.vertices = _readonly(v)
        self.tets = _readonly(t)
        faces = t[:, TET_FACES].reshape(-1, 3)
        keys = np.sort(faces, axis=1)
        uniq, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        inv = inv.reshape(-1)
        over = np.flatnonzero(counts > 2)
        if len(over):
            raise NonManifoldError(
                "faces shared by more than two tets", [tuple(int(x) for x in uniq[f]) for f in over]
            )
        bnd = np.flatnonzero(counts[inv] == 1)
        self.boundary_faces = _readonly(faces[bnd])
        self.boundary_owner = _readonly(np.stack([bnd // 4, bnd % 4], axis=1))

    @staticmethod
    def _volumes(v, t):
        p = v[t]
        return np.einsum(
            "ij,ij->i", p[:, 1] - p[:, 0], np.cross(p[:, 2] - p[:, 0], p[:, 3] - p[:, 0])
        ) / 6.0

    @property
    def n_vertices(self):
        return len(self.vertices)

    def volumes(self):
        return self._volumes(self.vertices, self.tets)

    def bounding_box_diagonal(self):
        return float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))


def _norm_edges(edges):
    return frozenset(edge_key(a, b) for a, b in edges)


@dataclass(frozen=True)
class FeatureModel:
    """Feature points, curves and surfaces attached to mesh entities.

    Parameters
    ----------
    points : mapping
        Point id to vertex index.
    curves : mapping
        Curve id to a set of edges given as vertex pairs.
    surfaces : mapping
        Surface id to a set of triangle indices. For a volume mesh the
        indices refer to ``VolumeMesh.boundary_faces``.
    """

    points: Mapping[int, int] = field(default_factory=dict)
    curves: Mapping[int, frozenset] = field(default_factory=dict)
    surfaces: Mapping[int, frozenset] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "points", {int(k): int(v) for k, v in sorted(self.points.items())})
        object.__setattr__(
            self, "curves", {int(k): _norm_edges(v) for k, v in sorted(self.curves.items())}
        )
        object.__setattr__(
            self,
            "surfaces",
            {int(k): frozenset(int(x) for x in v) for k, v in sorted(self.surfaces.items())},
        )

    @property
    def counts(self):
        """``(n_points, n_curves, n_surfaces)``."""
        return len(self.points), len(self.curves), len(self.surfaces)

    def point_vertices(self):
        return {v: pid for pid, v in self.points.items()}

    def edge_curve(self):
        """Map from sorted vertex pair to curve id."""
        out = {}
        for cid, edges in self.curves.items():
            for e in edges:
                if e in out:
                    raise FeatureError("edge assigned to two curves", [e])
                out[e] = cid
        return out

    def triangle_surface(self, n_triangles):
        """Per-triangle surface id, ``-1`` where untagged."""
        ids = -np.ones(n_triangles, dtype=np.int64)
        for sid, tris in self.surfaces.items():
            idx = np.fromiter(tris, dtype=np.int64, count=len(tris))
            if len(idx) and (ids[idx] >= 0).any():
                raise FeatureError("triangle in two surfaces", idx[ids[idx] >= 0].tolist())
            ids[idx] = sid
        return ids

    def curve_chain(self, cid):
        """Ordered vertices of a curve and whether it is closed.

        Open chains start at the endpoint with the smaller index. Closed
        loops start at the lowest-index edge, traversed from its smaller
        vertex; when the loop passes through a feature point it starts
        there instead so the point is never interior to a segment window.
        """
        edges = self.curves[cid]
        chains = trace_chains(edges, set(self.points.values()))
        if len(chains) != 1:
            raise FeatureError(f"curve {cid} is not a single connected chain")
        return chains[0]

    def to_json(self):
        return {
            "points": {str(k): v for k, v in self.points.items()},
            "curves": {str(k): sorted(list(e) for e in v) for k, v in self.curves.items()},
            "surfaces": {str(k): sorted(v) for k, v in self.surfaces.items()},
        }

    @classmethod
    def from_json(cls, data):
        return cls(
            points={int(k): v for k, v in data.get("points", {}).items()},
            curves={int(k): [tuple(e) for e in v] for k, v in data.get("curves", {}).items()},
            surfaces={int(k): v for k, v in data.get("surfaces", {}).items()},
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def trace_chains(edges, breakpoints=()):
    """Split an edge set into maximal chains.

    Chains break at vertices whose degree in the edge graph is not 2 and
    at ``breakpoints``. Returns a list of ``(vertices, closed)`` sorted by
    the smallest edge of each chain. Open chains run from the smaller end
    vertex. Closed loops start at their smallest break vertex if any,
    otherwise at the smaller vertex of their lowest-index edge.
    """
    edges = sorted({edge_key(a, b) for a, b in edges})
    adj = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    for a in adj:
        adj[a].sort()
    stops = {v for v, nb in adj.items() if len(nb) != 2} | (set(breakpoints) & set(adj))
    used = set()

    def walk(cur):
        path = []
        while cur not in stops:
            nxt = [w for w in adj[cur] if edge_key(cur, w) not in used]
            if not nxt:
                break
            used.add(edge_key(cur, nxt[0]))
            cur = nxt[0]
            path.append(cur)
        return path

    chains = []
    for e in edges:
        if e in used:
            continue
        used.add(e)
        a, b = e
        fwd = walk(b)
        if fwd and fwd[-1] == a:
            chains.append((_canonical_loop([a, b] + fwd[:-1], stops), True))
            continue
        bwd = walk(a)
        path = bwd[::-1] + [a, b] + fwd
        if path[0] > path[-1]:
            path.reverse()
        chains.append((path, False))

    def first_edge(chain):
        p, closed = chain
        n = len(p)
        return min(edge_key(p[i], p[(i + 1) % n]) for i in range(n if closed else n - 1))

    chains.sort(key=first_edge)
    return chains


def _canonical_loop(path, stops):
    """Rotate a closed loop to its canonical start and direction."""
    n = len(path)
    on_stop = [v for v in path if v in stops]
    if on_stop:
        i = path.index(min(on_stop))
        p = path[i:] + path[:i]
        if p[-1] < p[1]:
            p = [p[0]] + p[:0:-1]
        return p
    best = min(range(n), key=lambda i: edge_key(path[i], path[(i + 1) % n]))
    a, b = path[best], path[(best + 1) % n]
    if a < b:
        return path[best:] + path[:best]
    p = path[::-1]
    j = p.index(b)
    return p[j:] + p[:j]


@dataclass(frozen=True)
class VertexClass:
    """Valence, regularity and feature role of a vertex."""

    valence: int
    regular: bool
    role: Role


def vertex_roles(surface: SurfaceMesh, model: FeatureModel):
    """Per-vertex :class:`Role` as an int array."""
    roles = np.zeros(surface.n_vertices, dtype=np.int64)
    for e in model.edge_curve():
        roles[list(e)] = Role.CURVE
    for v in model.points.values():
        roles[v] = Role.POINT
    return roles


def classify_vertex(surface: SurfaceMesh, model: FeatureModel, v: int) -> VertexClass:
    """Classify vertex ``v``.

    Interior vertices are regular at valence 6; vertices on a curve are
    regular at valence 4; feature points are never regular.
    """
    if not 0 <= v < surface.n_vertices:
        raise IndexError(f"vertex {v} out of range")
    k = surface.valence(v)
    if v in set(model.points.values()):
        role = Role.POINT
    elif any(v in e for e in model.edge_curve()):
        role = Role.CURVE
    else:
        role = Role.INTERIOR
    regular = (role == Role.INTERIOR and k == 6) or (role == Role.CURVE and k == 4)
    return VertexClass(valence=k, regular=regular, role=role)


def validate_model(surface: SurfaceMesh, model: FeatureModel):
    """Check the feature model against the mesh; raise :class:`FeatureError`.

    Checks that surfaces partition the triangles, that every curve edge
    exists and separates two surfaces or bounds the mesh, that every
    interface or boundary edge is a curve edge, that curve vertices which
    are not feature points see exactly two curve edges, and that vertices
    on curves are not of valence 2.
    """
    sid = model.triangle_surface(surface.n_triangles)
    untagged = np.flatnonzero(sid < 0)
    if len(untagged):
        raise FeatureError("triangles without a surface id", untagged.tolist())
    for pid, v in model.points.items():
        if not 0 <= v < surface.n_vertices:
            raise FeatureError("feature point on a missing vertex", [pid])
    ec = model.edge_curve()
    missing = [e for e in ec if not surface.has_edge(*e)]
    if missing:
        raise FeatureError("curve edges not in the mesh", missing)
    et = surface.edge_triangles
    for e, (a, b) in enumerate(surface.edges.tolist()):
        t0, t1 = et[e]
        interface = t1 < 0 or sid[t0] != sid[t1]
        if interface and (a, b) not in ec:
            raise FeatureError("surface interface or boundary edge is not on a curve", [(a, b)])
        if not interface and (a, b) in ec:
            raise FeatureError("curve edge inside a single surface", [(a, b)])
    deg = np.zeros(surface.n_vertices, dtype=np.int64)
    for a, b in ec:
        deg[a] += 1
        deg[b] += 1
    pts = set(model.points.values())
    bad = [v for v in np.flatnonzero(deg).tolist() if v not in pts and deg[v] != 2]
    if bad:
        raise FeatureError("curve vertices that are not feature points need two curve edges", bad)
    thin = [v for v in np.flatnonzero(deg).tolist() if v not in pts and surface.valence(v) < 3]
    if thin:
        raise FeatureError("valence-2 vertices on feature curves are not supported", thin)
    for cid in model.curves:
        model.curve_chain(cid)


def infer_features(surface: SurfaceMesh, surface_ids) -> FeatureModel:
    """Derive curves and points from per-triangle surface tags.

    Curves are maximal chains of edges between differently tagged
    triangles (mesh boundary edges included). Points are the vertices of
    curve-graph degree other than 2 and the ends of open chains.
    """
    sid = np.asarray(surface_ids, dtype=np.int64).reshape(-1)
    if len(sid) != surface.n_triangles:
        raise FeatureError("one surface id per triangle is required")
    et = surface.edge_triangles
    iface = (et[:, 1] < 0) | (sid[et[:, 0]] != sid[np.maximum(et[:, 1], 0)])
    edges = [tuple(e) for e in surface.edges[iface].tolist()]
    deg = {}
    for a, b in edges:
        deg[a] = deg.get(a, 0) + 1
        deg[b] = deg.get(b, 0) + 1
    points = sorted(v for v, d in deg.items() if d != 2)
    chains = trace_chains(edges, points)
    curves = {}
    for i, (path, closed) in enumerate(chains, start=1):
        n = len(path)
        m = n if closed else n - 1
        curves[i] = [(path[j], path[(j + 1) % n]) for j in range(m)]
        if not closed:
            for end in (path[0], path[-1]):
                if end not in points:
                    points.append(end)
    points = sorted(set(points))
    surfaces = {}
    for t, s in enumerate(sid.tolist()):
        surfaces.setdefault(s, []).append(t)
    return FeatureModel(
        points={i: v for i, v in enumerate(points, start=1)},
        curves=curves,
        surfaces=surfaces,
    )


@dataclass(frozen=True)
class BoundaryMap:
    """Correspondence between an extracted surface and its volume.

    Attributes
    ----------
    vertex_map : ndarray
        Volume vertex of each surface vertex.
    face_owner : ndarray, shape (m, 2)
        ``(tet, local face)`` of each surface triangle.
    """

    vertex_map: np.ndarray
    face_owner: np.ndarray


def extract_boundary(mesh: VolumeMesh, model: FeatureModel | None = None):
    """Boundary surface of a tet mesh with the model restricted to it.

    Parameters
    ----------
    mesh : VolumeMesh
    model : FeatureModel, optional
        Model over ``mesh.boundary_faces`` and volume vertex ids. When
        omitted, all boundary triangles form surface 1.

    Returns
    -------
    surface : SurfaceMesh
        Compact vertex numbering in increasing volume vertex order.
    model : FeatureModel
        Model over the surface's own indices.
    bmap : BoundaryMap
    """
    faces = mesh.boundary_faces
    used = np.unique(faces)
    remap = -np.ones(mesh.n_vertices, dtype=np.int64)
    remap[used] = np.arange(len(used))
    surface = SurfaceMesh(mesh.vertices[used], remap[faces])
    if model is None:
        model = FeatureModel(surfaces={1: range(len(faces))})
    points = {pid: int(remap[v]) for pid, v in model.points.items() if remap[v] >= 0}
    curves = {}
    for cid, edges in model.curves.items():
        kept = [(remap[a], remap[b]) for a, b in edges if remap[a] >= 0 and remap[b] >= 0]
        kept = [e for e in kept if surface.has_edge(*e)]
        if kept:
            curves[cid] = kept
    out = FeatureModel(points=points, curves=curves, surfaces=model.surfaces)
    bmap = BoundaryMap(vertex_map=_readonly(used.copy()), face_owner=mesh.boundary_owner)
    return surface, out, bmap


def model_for_volume(mesh: VolumeMesh, face_tags: Mapping, edge_tags: Mapping | None = None,
                     point_tags: Mapping | None = None) -> FeatureModel:
    """Build a volume feature model from tags keyed by vertex tuples.

    ``face_tags`` maps vertex triples (any order) to surface ids. Missing
    curves and points are inferred from the surface tags.
    """
    lookup = {tuple(sorted(f)): i for i, f in enumerate(mesh.boundary_faces.tolist())}
    sid = -np.ones(len(lookup), dtype=np.int64)
    for f, s in face_tags.items():
        key = tuple(sorted(int(x) for x in f))
        if key in lookup:
            sid[lookup[key]] = int(s)
    untagged = np.flatnonzero(sid < 0)
    if len(untagged):
        raise FeatureError(
            "boundary faces without a surface tag", [tuple(mesh.boundary_faces[i]) for i in untagged]
        )
    surfaces = {}
    for i, s in enumerate(sid.tolist()):
        surfaces.setdefault(s, []).append(i)
    if not edge_tags:
        surface, _, bmap = extract_boundary(mesh, FeatureModel(surfaces=surfaces))
        inferred = infer_features(surface, sid)
        vm = bmap.vertex_map
        return FeatureModel(
            points={k: int(vm[v]) for k, v in inferred.points.items()},
            curves={k: [(int(vm[a]), int(vm[b])) for a, b in e] for k, e in inferred.curves.items()},
            surfaces=surfaces,
        )
    curves = {}
    for e, c in edge_tags.items():
        curves.setdefault(int(c), []).append(tuple(e))
    if point_tags:
        points = {int(p): int(v) for v, p in point_tags.items()}
    else:
        points = _points_from_curves(curves)
    return FeatureModel(points=points, curves=curves, surfaces=surfaces)


def _points_from_curves(curves):
    deg = {}
    per_curve = {}
    for cid, edges in curves.items():
        for a, b in edges:
            for v in (a, b):
                deg[v] = deg.get(v, 0) + 1
                per_curve.setdefault(v, set()).add(cid)
    pts = set()
    for cid, edges in curves.items():
        for path, closed in trace_chains(edges):
            if not closed:
                pts.update((path[0], path[-1]))
    pts |= {v for v, d in deg.items() if d != 2}
    return {i: v for i, v in enumerate(sorted(pts), start=1)}


def surface_model_from_tags(surface: SurfaceMesh, tri_tags, edge_tags: Mapping | None = None,
                            point_tags: Mapping | None = None) -> FeatureModel:
    """Feature model for a surface mesh from per-entity tags.

    ``edge_tags`` maps vertex pairs to curve ids and ``point_tags`` maps
    vertex indices to point ids. Missing families are inferred.
    """
    sid = np.asarray(tri_tags, dtype=np.int64)
    if not edge_tags:
        return infer_features(surface, sid)
    surfaces = {}
    for i, s in enumerate(sid.tolist()):
        surfaces.setdefault(s, []).append(i)
    curves = {}
    for e, c in edge_tags.items():
        curves.setdefault(int(c), []).append(tuple(e))
    if point_tags:
        points = {int(p): int(v) for v, p in point_tags.items()}
    else:
        points = _points_from_curves(curves)
    return FeatureModel(points=points, curves=curves, surfaces=surfaces)
