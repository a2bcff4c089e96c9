"""High-order nodal meshes interpolating the limit model.

A degree-``q`` mesh shares its vertex nodes with the linear mesh. Edge and
face nodes are owned by one element and evaluated once, so neighbouring
elements reference identical node ids and coordinates.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .limit import EvalInfo, LimitEvaluator
from .mesh import FeatureModel, SurfaceMesh, VolumeMesh
from .nodes import NodalDistribution, lattice_order, make_distribution
from .subdivision import ControlMesh, compute_control_mesh, limit_operator, subdivide_surface

__all__ = [
    "HighOrderMesh",
    "HOTopology",
    "build_ho_topology",
    "generate_ho_surface_mesh",
    "node_key",
    "pre_refine",
    "refine_to_linear",
    "sub_simplices",
]


@dataclass
class HighOrderMesh:
    """Degree-``q`` nodal mesh of triangles or tets.

    Attributes
    ----------
    degree : int
    nodes : ndarray, shape (N, 3)
    elements : ndarray of int, shape (m, N_q)
        Global node ids in the order of ``distribution``.
    distribution : NodalDistribution
    model : FeatureModel
        Feature model over the linear entities (same ids and element indices).
    linear : SurfaceMesh or VolumeMesh
        The straight-sided mesh the elements were built from.
    info : dict
        Diagnostics (evaluation depth, capped evaluations, stages).
    evaluator : LimitEvaluator or None
        Parameterization of the limit model over ``linear`` (surface meshes).
    """

    degree: int
    nodes: np.ndarray
    elements: np.ndarray
    distribution: NodalDistribution
    model: FeatureModel
    linear: SurfaceMesh | VolumeMesh
    info: dict = field(default_factory=dict)
    evaluator: LimitEvaluator | None = field(default=None, repr=False, compare=False)

    @property
    def dim(self):
        return self.distribution.dim

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_nodes(self):
        return len(self.nodes)

    def element_nodes(self, e):
        """Node coordinates of element ``e`` in canonical order."""
        return self.nodes[self.elements[e]]

    def vertex_nodes(self):
        """Global ids of the element corner nodes, shape (m, dim + 1)."""
        return self.elements[:, : self.dim + 1]


@dataclass
class HOTopology:
    """Global node table of a high-order mesh.

    Attributes
    ----------
    elements : ndarray of int, shape (m, N_q)
    owner : ndarray of int, shape (N,)
        Element that evaluates each node.
    local : ndarray of int, shape (N,)
        Local index of the node inside its owner.
    keys : list of tuple
        Owner-independent key of each node: sorted ``(vertex, lattice index)``
        pairs over the nonzero lattice indices.
    """

    elements: np.ndarray
    owner: np.ndarray
    local: np.ndarray
    keys: list

    @property
    def n_nodes(self):
        return len(self.owner)


def node_key(element_vertices, lattice_index):
    """Key of a lattice node, independent of the element that sees it."""
    return tuple(sorted((int(v), int(i)) for v, i in zip(element_vertices, lattice_index) if i > 0))


def build_ho_topology(linear: SurfaceMesh | VolumeMesh, q, distribution: NodalDistribution | None = None,
                      n_vertices=None) -> HOTopology:
    """Number the nodes of a degree-``q`` mesh.

    Vertex nodes reuse the linear vertex ids. Edge nodes follow, grouped by
    edge in sorted order and ordered from the lower to the higher vertex id.
    Face nodes (tets only) and element-interior nodes come last.

    Parameters
    ----------
    linear : SurfaceMesh or VolumeMesh
    q : int
    distribution : NodalDistribution, optional
        Only its canonical order is used; equispaced of matching dimension
        by default.
    n_vertices : int, optional
        Number of vertex ids to reserve (defaults to the mesh vertex count).
    """
    cells = linear.triangles if isinstance(linear, SurfaceMesh) else linear.tets
    dim = cells.shape[1] - 1
    if distribution is None:
        distribution = make_distribution(q, "equispaced", dim)
    if distribution.degree != q or distribution.dim != dim:
        raise ValueError("distribution does not match degree or element dimension")
    lat = distribution.lattice
    nv = linear.n_vertices if n_vertices is None else int(n_vertices)
    m, n_loc = len(cells), len(lat)
    support = (lat > 0).sum(axis=1)

    owner_of = {}
    for e, cell in enumerate(cells.tolist()):
        for j in range(n_loc):
            if support[j] == 1:
                continue
            k = node_key(cell, lat[j])
            if k not in owner_of:
                owner_of[k] = (e, j)
    # deterministic numbering: by support size, then by key
    def sort_key(k):
        verts = tuple(v for v, _ in k)
        # edge nodes run from the lower vertex: larger index on the lower vertex first
        return (len(k), verts, tuple(-i for _, i in k))

    ordered = sorted(owner_of, key=sort_key)
    gid = {k: nv + i for i, k in enumerate(ordered)}
    n_total = nv + len(ordered)
    owner = np.full(n_total, -1, dtype=np.int64)
    local = np.full(n_total, -1, dtype=np.int64)
    elements = np.empty((m, n_loc), dtype=np.int64)
    for e, cell in enumerate(cells.tolist()):
        for j in range(n_loc):
            if support[j] == 1:
                g = cell[int(np.argmax(lat[j]))]
            else:
                g = gid[node_key(cell, lat[j])]
            elements[e, j] = g
            if owner[g] < 0:
                owner[g] = e
                local[g] = j
    all_keys = [((v, q),) for v in range(nv)] + ordered
    return HOTopology(elements, owner, local, all_keys)


def pre_refine(control: ControlMesh, levels):
    """Global subdivision of a control mesh before curving.

    Returns the finer linear mesh (vertices on the limit), its model and the
    finer control mesh. The limit model is unchanged.
    """
    mesh, model = control.mesh, control.model
    for _ in range(int(levels)):
        mesh, model = subdivide_surface(mesh, model)
    limit = limit_operator(mesh, model) @ mesh.vertices
    linear = SurfaceMesh(limit, mesh.triangles)
    return linear, model, ControlMesh(mesh, model, 0.0)


def generate_ho_surface_mesh(linear: SurfaceMesh, model: FeatureModel, q, distribution="equispaced",
                             evaluator: LimitEvaluator | None = None, pre_refinement=0,
                             threads=1) -> HighOrderMesh:
    """Degree-``q`` surface mesh whose nodes lie on the limit model.

    Parameters
    ----------
    linear : SurfaceMesh
    model : FeatureModel
    q : int
    distribution : str or NodalDistribution
    evaluator : LimitEvaluator, optional
        Reused when given (must belong to ``linear`` and ``model``).
    pre_refinement : int
        Global subdivisions of the control mesh before curving.
    threads : int
        Worker threads for node evaluation.

    Returns
    -------
    HighOrderMesh
        Vertex nodes keep the linear coordinates; all other nodes are
        evaluated once from their owning triangle.
    """
    dist = distribution if isinstance(distribution, NodalDistribution) else make_distribution(q, distribution, 2)
    if dist.degree != q or dist.dim != 2:
        raise ValueError("distribution must be a degree-q triangle distribution")
    if evaluator is None:
        evaluator = LimitEvaluator(linear, model, compute_control_mesh(linear, model))
    info = {"control_residual": float(evaluator.control.residual)}
    if pre_refinement:
        linear, model, control = pre_refine(evaluator.control, pre_refinement)
        evaluator = LimitEvaluator(linear, model, control)
        info["pre_refinement"] = int(pre_refinement)
    topo = build_ho_topology(linear, q, dist)
    nodes = np.empty((topo.n_nodes, 3))
    nv = linear.n_vertices
    nodes[:nv] = linear.vertices
    free = np.flatnonzero(np.arange(topo.n_nodes) >= nv)
    order = np.argsort(topo.owner[free], kind="stable")
    free = free[order]
    splits = np.flatnonzero(np.diff(topo.owner[free])) + 1
    groups = np.split(free, splits) if len(free) else []

    def work(ids):
        ev_info = EvalInfo()
        t = int(topo.owner[ids[0]])
        return ids, evaluator.map_onto_limit(t, dist.points[topo.local[ids]], ev_info), ev_info

    stats = EvalInfo()
    if threads and threads > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            results = list(pool.map(work, groups))
    else:
        results = [work(g) for g in groups]
    for ids, x, ev_info in results:
        nodes[ids] = x
        stats.max_depth = max(stats.max_depth, ev_info.max_depth)
        stats.capped += ev_info.capped
    info["max_depth"] = stats.max_depth
    info["capped"] = stats.capped
    return HighOrderMesh(int(q), nodes, topo.elements, dist, model, linear, info, evaluator)


def sub_simplices(q, dim=2):
    """Linear sub-simplices of the degree-``q`` lattice as local node indices.

    Returns ``q**dim`` positively oriented simplices (``q**2`` triangles or
    ``q**3`` tets).
    """
    lat = lattice_order(q, dim)
    index = {tuple(r[1:]): j for j, r in enumerate(lat.tolist())}
    out = []
    if dim == 2:
        for i in range(q):
            for j in range(q - i):
                out.append([(i, j), (i + 1, j), (i, j + 1)])
                if i + j <= q - 2:
                    out.append([(i + 1, j), (i + 1, j + 1), (i, j + 1)])
    elif dim == 3:
        e = np.eye(3, dtype=int)
        A, B, C = e
        D, E, F = A + B, A + C, B + C
        octa = [(A, F, B, D), (A, F, D, E), (A, F, E, C), (A, F, C, B)]
        for i in range(q):
            for j in range(q - i):
                for k in range(q - i - j):
                    p = np.array([i, j, k])
                    out.append([p, p + A, p + B, p + C])
                    if i + j + k <= q - 2:
                        out.extend([[p + x for x in tet] for tet in octa])
                    if i + j + k <= q - 3:
                        out.append([p + D, p + E, p + F, p + A + B + C])
    else:
        raise ValueError("dim must be 2 or 3")
    cells = []
    for s in out:
        pts = np.array([np.asarray(x) for x in s], dtype=float)
        d = pts[1:] - pts[0]
        if np.linalg.det(d) < 0:
            s = [s[1], s[0]] + list(s[2:])
        cells.append([index[tuple(int(c) for c in x)] for x in s])
    return np.array(cells, dtype=np.int64)


def refine_to_linear(ho: HighOrderMesh):
    """Reinterpret a high-order mesh as a linear mesh on the node lattice.

    Returns
    -------
    SurfaceMesh or VolumeMesh
        ``q**2`` triangles per triangle or ``q**3`` tets per tet; the node
        coordinates are reused. Tet orientation is not checked.
    """
    sub = sub_simplices(ho.degree, ho.dim)
    cells = ho.elements[:, sub].reshape(-1, ho.dim + 1)
    if ho.dim == 2:
        return SurfaceMesh(ho.nodes, cells)
    return VolumeMesh(ho.nodes, cells, check_orientation=False)
