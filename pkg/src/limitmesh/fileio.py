"""Mesh files: Gmsh MSH 2.2 / 4.1 (ASCII), VTU output and JSON feature sidecars.

Physical tags carry feature ids: triangles hold surface ids, lines hold
curve ids and point elements hold point ids. High-order nodes follow the
Gmsh numbering, which is the canonical node order of this package.
"""

from __future__ import annotations

import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from .interpolation import HighOrderMesh, sub_simplices
from .mesh import (
    TET_FACES,
    FeatureModel,
    MeshError,
    SurfaceMesh,
    VolumeMesh,
    model_for_volume,
    surface_model_from_tags,
)
from .nodes import lattice_order, make_distribution

__all__ = [
    "MAX_MSH_DEGREE",
    "MshData",
    "UnsupportedDegreeError",
    "load_ho_mesh",
    "load_linear_mesh",
    "read_msh",
    "sidecar_path",
    "write_mesh",
    "write_msh",
    "write_vtu",
]

MAX_MSH_DEGREE = 10

# Gmsh element type ids per degree 1..10
_LINE_TYPES = (1, 8, 26, 27, 28, 62, 63, 64, 65, 66)
_TRI_TYPES = (2, 9, 21, 23, 25, 42, 43, 44, 45, 46)
_TET_TYPES = (4, 11, 29, 30, 31, 71, 72, 73, 74, 75)
_POINT_TYPE = 15
_TYPE_INFO = {_POINT_TYPE: ("point", 0, 1)}
for _q in range(1, MAX_MSH_DEGREE + 1):
    _TYPE_INFO[_LINE_TYPES[_q - 1]] = ("line", _q, _q + 1)
    _TYPE_INFO[_TRI_TYPES[_q - 1]] = ("triangle", _q, (_q + 1) * (_q + 2) // 2)
    _TYPE_INFO[_TET_TYPES[_q - 1]] = ("tetra", _q, (_q + 1) * (_q + 2) * (_q + 3) // 6)

_VTK_TRIANGLE, _VTK_TETRA, _VTK_QUADRATIC_TETRA, _VTK_LAGRANGE_TRIANGLE = 5, 10, 24, 69
_GMSH_TO_VTK_TET10 = [0, 1, 2, 3, 4, 5, 6, 7, 9, 8]


class UnsupportedDegreeError(ValueError):
    """Element degree not representable in the requested format."""


@dataclass
class MshData:
    """Raw content of an MSH file.

    Attributes
    ----------
    nodes : ndarray, shape (n, 3)
    node_ids : ndarray of int
        File tags of the rows of ``nodes``.
    blocks : dict
        ``(kind, degree)`` to ``(connectivity as row indices, physical tags)``.
    version : str
    """

    nodes: np.ndarray
    node_ids: np.ndarray
    blocks: dict = field(default_factory=dict)
    version: str = "4.1"


def sidecar_path(path):
    """Feature-model sidecar next to a mesh file."""
    return os.path.splitext(str(path))[0] + ".features.json"


# ----------------------------------------------------------------------
# reading


def _sections(text):
    lines = text.splitlines()
    out = {}
    i = 0
    while i < len(lines):
        s = lines[i].strip()
        if s.startswith("$") and not s.startswith("$End"):
            name = s[1:]
            j = i + 1
            while j < len(lines) and lines[j].strip() != f"$End{name}":
                j += 1
            if j == len(lines):
                raise MeshError(f"unterminated section ${name}")
            out.setdefault(name, lines[i + 1 : j])
            i = j
        i += 1
    return out


def read_msh(path) -> MshData:
    """Parse an ASCII Gmsh MSH 2.2 or 4.1 file."""
    with open(path) as f:
        text = f.read()
    sec = _sections(text)
    if "MeshFormat" not in sec:
        raise MeshError("missing $MeshFormat section")
    head = sec["MeshFormat"][0].split()
    version, ftype = head[0], int(head[1])
    if ftype != 0:
        raise MeshError("binary MSH files are not supported")
    if version.startswith("2"):
        data = _read_v2(sec)
    elif version.startswith("4"):
        data = _read_v4(sec)
    else:
        raise MeshError(f"unsupported MSH version {version}")
    data.version = version
    return data


def _collect(data, raw, index):
    for (etype, phys), conns in raw.items():
        if etype not in _TYPE_INFO:
            continue
        kind, q, _ = _TYPE_INFO[etype]
        conn = index[np.array(conns, dtype=np.int64)]
        if (conn < 0).any():
            raise MeshError("element references a missing node")
        key = (kind, q)
        c0, p0 = data.blocks.get(key, (np.zeros((0, conn.shape[1]), np.int64), np.zeros(0, np.int64)))
        data.blocks[key] = (np.vstack([c0, conn]), np.concatenate([p0, np.full(len(conn), phys)]))


def _node_index(ids):
    index = np.full(int(ids.max()) + 2 if len(ids) else 1, -1, dtype=np.int64)
    index[ids] = np.arange(len(ids))
    return index


def _read_v2(sec):
    rows = sec["Nodes"]
    n = int(rows[0])
    arr = np.array([r.split() for r in rows[1 : n + 1]], dtype=float).reshape(n, 4)
    ids = arr[:, 0].astype(np.int64)
    data = MshData(arr[:, 1:].copy(), ids)
    index = _node_index(ids)
    raw = {}
    rows = sec.get("Elements", ["0"])
    for r in rows[1 : int(rows[0]) + 1]:
        v = [int(x) for x in r.split()]
        etype, ntags = v[1], v[2]
        phys = v[3] if ntags >= 1 else 0
        raw.setdefault((etype, phys), []).append(v[3 + ntags :])
    _collect(data, raw, index)
    return data


def _read_v4(sec):
    phys = {}
    if "Entities" in sec:
        rows = sec["Entities"]
        counts = [int(x) for x in rows[0].split()]
        k = 1
        for dim, cnt in enumerate(counts):
            for _ in range(cnt):
                v = rows[k].split()
                k += 1
                tag = int(v[0])
                off = 4 if dim == 0 else 7
                nphys = int(v[off])
                tags = [int(x) for x in v[off + 1 : off + 1 + nphys]]
                phys[(dim, tag)] = tags[0] if tags else tag
    rows = sec["Nodes"]
    nblocks = int(rows[0].split()[0])
    k = 1
    ids, xyz = [], []
    for _ in range(nblocks):
        dim, tag, parametric, cnt = (int(x) for x in rows[k].split())
        k += 1
        if parametric:
            raise MeshError("parametric nodes are not supported")
        ids.extend(int(rows[k + i]) for i in range(cnt))
        xyz.extend([float(x) for x in rows[k + cnt + i].split()[:3]] for i in range(cnt))
        k += 2 * cnt
    ids = np.array(ids, dtype=np.int64)
    data = MshData(np.array(xyz, dtype=float).reshape(-1, 3), ids)
    index = _node_index(ids)
    raw = {}
    rows = sec.get("Elements", ["0 0 0 0"])
    nblocks = int(rows[0].split()[0])
    k = 1
    for _ in range(nblocks):
        dim, tag, etype, cnt = (int(x) for x in rows[k].split())
        k += 1
        p = phys.get((dim, tag), tag)
        bucket = raw.setdefault((etype, p), [])
        for i in range(cnt):
            bucket.append([int(x) for x in rows[k + i].split()[1:]])
        k += cnt
    _collect(data, raw, index)
    return data


def _pick(data, kind):
    keys = [k for k in data.blocks if k[0] == kind]
    if len(keys) > 1:
        raise MeshError(f"mixed {kind} degrees in one file")
    return (keys[0][1], *data.blocks[keys[0]]) if keys else (None, None, None)


def _tags_from_blocks(data, vertex_of):
    edge_tags, point_tags = {}, {}
    q, conn, phys = _pick(data, "line")
    if conn is not None:
        for c, p in zip(conn[:, :2].tolist(), phys.tolist()):
            edge_tags[tuple(sorted((vertex_of[c[0]], vertex_of[c[1]])))] = int(p)
    _, conn, phys = _pick(data, "point")
    if conn is not None:
        for c, p in zip(conn[:, 0].tolist(), phys.tolist()):
            point_tags[vertex_of[c]] = int(p)
    return edge_tags, point_tags


def _load(path, fmt=None):
    fmt = _format(path, fmt)
    if fmt not in ("msh", "msh2", "msh4"):
        raise MeshError(f"cannot read format {fmt!r}")
    data = read_msh(path)
    qt, tets, _ = _pick(data, "tetra")
    qs, tris, tri_phys = _pick(data, "triangle")
    if tets is None and tris is None:
        raise MeshError("no triangles or tets in file")
    cells = tets if tets is not None else tris
    nc = 4 if tets is not None else 3
    corners = np.unique(cells[:, :nc])
    vertex_of = -np.ones(len(data.nodes), dtype=np.int64)
    vertex_of[corners] = np.arange(len(corners))
    return data, cells, nc, corners, vertex_of, (qt if tets is not None else qs), tris, tri_phys


def load_linear_mesh(path, fmt=None, features=None):
    """Read a linear mesh and its feature model.

    High-order files are reduced to their corner vertices.

    Parameters
    ----------
    path : str
    fmt : str, optional
        ``msh`` (either version); inferred from the extension.
    features : str, optional
        JSON feature sidecar; ``<stem>.features.json`` is used when present.

    Returns
    -------
    mesh : SurfaceMesh or VolumeMesh
    model : FeatureModel
    """
    data, cells, nc, corners, vertex_of, _, tris, tri_phys = _load(path, fmt)
    x = data.nodes[corners]
    lin = vertex_of[cells[:, :nc]]
    mesh = VolumeMesh(x, lin) if nc == 4 else SurfaceMesh(x, lin)
    side = features or sidecar_path(path)
    if os.path.exists(side):
        return mesh, FeatureModel.load(side)
    if features:
        raise FileNotFoundError(features)
    edge_tags, point_tags = _tags_from_blocks(data, vertex_of)
    if nc == 3:
        tags = tri_phys if tri_phys is not None and (tri_phys > 0).any() else np.ones(len(lin), np.int64)
        return mesh, surface_model_from_tags(mesh, tags, edge_tags, point_tags)
    if tris is None:
        face_tags = {tuple(f): 1 for f in mesh.boundary_faces.tolist()}
    else:
        face_tags = {tuple(f): int(p) for f, p in zip(vertex_of[tris[:, :3]].tolist(), tri_phys.tolist())}
    return mesh, model_for_volume(mesh, face_tags, edge_tags, point_tags)


def load_ho_mesh(path, fmt=None, kind="equispaced", features=None) -> HighOrderMesh:
    """Read a high-order mesh written by :func:`write_mesh`.

    Corner vertices are numbered first (in file order), then the remaining
    nodes in file order.
    """
    mesh, model = load_linear_mesh(path, fmt, features)
    data, cells, nc, corners, vertex_of, q, _, _ = _load(path, fmt)
    rest = np.setdiff1d(np.arange(len(data.nodes)), corners)
    order = np.concatenate([corners, rest])
    new_id = np.empty(len(order), dtype=np.int64)
    new_id[order] = np.arange(len(order))
    dist = make_distribution(q, kind, nc - 1)
    return HighOrderMesh(int(q), data.nodes[order], new_id[cells], dist, model, mesh)


# ----------------------------------------------------------------------
# writing


def _format(path, fmt):
    if fmt:
        f = fmt.lower().replace(".", "")
        return {"msh22": "msh2", "msh2": "msh2", "msh41": "msh4", "msh4": "msh4", "msh": "msh4",
                "vtu": "vtu", "json": "json"}.get(f, f)
    ext = os.path.splitext(str(path))[1].lower()
    return {".msh": "msh", ".vtu": "vtu"}.get(ext, ext.lstrip("."))


def _as_ho(mesh, model):
    if isinstance(mesh, HighOrderMesh):
        return mesh
    if isinstance(mesh, SurfaceMesh):
        cells, dim = mesh.triangles, 2
    elif isinstance(mesh, VolumeMesh):
        cells, dim = mesh.tets, 3
    else:
        raise TypeError(f"cannot write {type(mesh).__name__}")
    return HighOrderMesh(1, np.asarray(mesh.vertices), np.asarray(cells), make_distribution(1, "equispaced", dim),
                         model or FeatureModel(), mesh)


def _local_index(q, dim):
    return {tuple(r): j for j, r in enumerate(lattice_order(q, dim).tolist())}


def _boundary_triangles(ho):
    """High-order node lists of the faces the surface ids refer to."""
    if ho.dim == 2:
        return ho.elements
    q = ho.degree
    idx = _local_index(q, 3)
    tri_lat = lattice_order(q, 2).tolist()
    maps = []
    for lf in range(4):
        f = TET_FACES[lf]
        rows = []
        for r3 in tri_lat:
            r = [0, 0, 0, 0]
            for v, i in zip(f, r3):
                r[v] = i
            rows.append(idx[tuple(r)])
        maps.append(rows)
    maps = np.array(maps, dtype=np.int64)
    own = ho.linear.boundary_owner
    return ho.elements[own[:, 0][:, None], maps[own[:, 1]]]


def _edge_lines(ho):
    """High-order node lists of curve edges, ``{(a, b): nodes}`` from a to b."""
    q, dim = ho.degree, ho.dim
    idx = _local_index(q, dim)
    n = dim + 1
    cells = ho.linear.triangles if dim == 2 else ho.linear.tets
    where = {}
    for e, cell in enumerate(cells.tolist()):
        for i in range(n):
            for j in range(n):
                if i != j:
                    where.setdefault((cell[i], cell[j]), (e, i, j))
    out = {}
    for edges in ho.model.curves.values():
        for a, b in sorted(edges):
            e, i, j = where[(a, b)]
            rows = []
            for k in [0, q] + list(range(1, q)):
                r = [0] * n
                r[i], r[j] = q - k, k
                rows.append(idx[tuple(r)])
            out[(a, b)] = ho.elements[e, rows]
    return out


def _check_degree(q):
    if q > MAX_MSH_DEGREE:
        raise UnsupportedDegreeError(f"degree {q} exceeds the MSH limit of {MAX_MSH_DEGREE}")


def _surface_ids(ho, n):
    sids = ho.model.triangle_surface(n)
    return np.ones(n, np.int64) if (sids < 0).all() else sids


def _written_model(ho):
    """Feature model renumbered to the triangle order of the MSH file.

    Triangles are written grouped by surface id, so a surface mesh read
    back has its triangles in that order.
    """
    model = ho.model
    if ho.dim != 2 or not model.surfaces:
        return model
    sids = _surface_ids(ho, ho.n_elements)
    order = np.concatenate([np.flatnonzero(sids == sid) for sid in np.unique(sids)])
    new = np.empty(len(order), dtype=np.int64)
    new[order] = np.arange(len(order))
    surfaces = {sid: new[sorted(tris)].tolist() for sid, tris in model.surfaces.items()}
    return FeatureModel(points=model.points, curves=model.curves, surfaces=surfaces)


def _msh_records(ho):
    """Element records ``(dim, tag, type, [node lists])`` grouped by entity."""
    q = ho.degree
    recs = []
    for pid, v in sorted(ho.model.points.items()):
        recs.append((0, pid, _POINT_TYPE, [[v]]))
    lines = _edge_lines(ho)
    for cid, edges in sorted(ho.model.curves.items()):
        recs.append((1, cid, _LINE_TYPES[q - 1], [lines[e].tolist() for e in sorted(edges)]))
    tris = _boundary_triangles(ho)
    sids = _surface_ids(ho, len(tris))
    for sid in np.unique(sids).tolist():
        recs.append((2, sid, _TRI_TYPES[q - 1], tris[sids == sid].tolist()))
    if ho.dim == 3:
        recs.append((3, 1, _TET_TYPES[q - 1], ho.elements.tolist()))
    return recs


def write_msh(mesh, path, version="4.1", model=None):
    """Write a linear or high-order mesh as ASCII MSH.

    Parameters
    ----------
    mesh : HighOrderMesh, SurfaceMesh or VolumeMesh
    path : str
    version : {"4.1", "2.2"}
    model : FeatureModel, optional
        Tags for linear meshes.
    """
    ho = _as_ho(mesh, model)
    _check_degree(ho.degree)
    recs = _msh_records(ho)
    x = np.asarray(ho.nodes)
    nn = len(x)
    out = ["$MeshFormat", f"{version} 0 8", "$EndMeshFormat"]
    if version.startswith("2"):
        out += ["$Nodes", str(nn)]
        out += [f"{i + 1} {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}" for i, p in enumerate(x)]
        out += ["$EndNodes", "$Elements"]
        body = []
        eid = 1
        for dim, tag, etype, conns in recs:
            for c in conns:
                body.append(f"{eid} {etype} 2 {tag} {tag} " + " ".join(str(v + 1) for v in c))
                eid += 1
        out += [str(len(body))] + body + ["$EndElements"]
    elif version.startswith("4"):
        lo, hi = (x.min(0), x.max(0)) if nn else (np.zeros(3), np.zeros(3))
        box = " ".join(f"{v:.17g}" for v in np.concatenate([lo, hi]))
        ents = {d: sorted({tag for dd, tag, _, _ in recs if dd == d}) for d in range(4)}
        out += ["$Entities", " ".join(str(len(ents[d])) for d in range(4))]
        for pid in ents[0]:
            p = x[ho.model.points[pid]]
            out.append(f"{pid} {p[0]:.17g} {p[1]:.17g} {p[2]:.17g} 1 {pid}")
        for d in (1, 2, 3):
            for tag in ents[d]:
                out.append(f"{tag} {box} 1 {tag} 0")
        out.append("$EndEntities")
        top = max(d for d in range(4) if ents[d])
        out += ["$Nodes", f"1 {nn} 1 {nn}", f"{top} {ents[top][0]} 0 {nn}"]
        out += [str(i + 1) for i in range(nn)]
        out += [f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}" for p in x]
        out += ["$EndNodes", "$Elements"]
        total = sum(len(c) for *_, c in recs)
        out.append(f"{len(recs)} {total} 1 {total}")
        eid = 1
        for dim, tag, etype, conns in recs:
            out.append(f"{dim} {tag} {etype} {len(conns)}")
            for c in conns:
                out.append(f"{eid} " + " ".join(str(v + 1) for v in c))
                eid += 1
        out.append("$EndElements")
    else:
        raise ValueError(f"unsupported MSH version {version}")
    with open(path, "w") as f:
        f.write("\n".join(out) + "\n")


def _data_array(parent, name, values, ncomp=1):
    values = np.asarray(values)
    kind = "Float64" if values.dtype.kind == "f" else ("UInt8" if name == "types" else "Int64")
    el = ET.SubElement(parent, "DataArray", type=kind, Name=name, format="ascii")
    if ncomp > 1:
        el.set("NumberOfComponents", str(ncomp))
    fmt = "{:.17g}" if kind == "Float64" else "{:d}"
    el.text = " ".join(fmt.format(v) for v in values.ravel().tolist())
    return el


def write_vtu(mesh, path, scalars=None, model=None):
    """Write a mesh for visualization as VTK XML unstructured grid.

    Triangles of any degree use Lagrange cells; tets of degree 2 use
    quadratic cells and higher degrees are split into their linear
    lattice sub-tets with cell data repeated.

    Parameters
    ----------
    mesh : HighOrderMesh, SurfaceMesh or VolumeMesh
    path : str
    scalars : dict, optional
        Name to per-element or per-node values.
    """
    ho = _as_ho(mesh, model)
    q, dim = ho.degree, ho.dim
    el = np.asarray(ho.elements)
    repeat = 1
    if dim == 2:
        cells = el
        ctype = _VTK_TRIANGLE if q == 1 else _VTK_LAGRANGE_TRIANGLE
    elif q == 1:
        cells, ctype = el, _VTK_TETRA
    elif q == 2:
        cells, ctype = el[:, _GMSH_TO_VTK_TET10], _VTK_QUADRATIC_TETRA
    else:
        sub = sub_simplices(q, 3)
        cells, ctype, repeat = el[:, sub].reshape(-1, 4), _VTK_TETRA, len(sub)
    nc = len(cells)
    root = ET.Element("VTKFile", type="UnstructuredGrid", version="1.0", byte_order="LittleEndian",
                      header_type="UInt64")
    piece = ET.SubElement(ET.SubElement(root, "UnstructuredGrid"), "Piece",
                          NumberOfPoints=str(ho.n_nodes), NumberOfCells=str(nc))
    _data_array(ET.SubElement(piece, "Points"), "Points", np.asarray(ho.nodes, dtype=float), 3)
    cel = ET.SubElement(piece, "Cells")
    _data_array(cel, "connectivity", cells.ravel().astype(np.int64))
    _data_array(cel, "offsets", np.arange(1, nc + 1, dtype=np.int64) * cells.shape[1])
    _data_array(cel, "types", np.full(nc, ctype, dtype=np.int64))
    pdata = ET.SubElement(piece, "PointData")
    cdata = ET.SubElement(piece, "CellData")
    for name, vals in (scalars or {}).items():
        vals = np.asarray(vals, dtype=float)
        if len(vals) == ho.n_elements:
            _data_array(cdata, name, np.repeat(vals, repeat))
        elif len(vals) == ho.n_nodes:
            _data_array(pdata, name, vals)
        else:
            raise ValueError(f"scalar {name!r} matches neither elements nor nodes")
    ET.ElementTree(root).write(path, xml_declaration=True, encoding="utf-8")


def write_mesh(mesh, path, fmt=None, scalars=None, model=None, sidecar=False):
    """Write a mesh in the format given by ``fmt`` or the file extension.

    Parameters
    ----------
    mesh : HighOrderMesh, SurfaceMesh or VolumeMesh
    path : str
    fmt : {"msh", "msh4", "msh2", "vtu"}, optional
    scalars : dict, optional
        Fields for VTU output.
    model : FeatureModel, optional
        Tags for linear meshes.
    sidecar : bool
        Also write the feature model as ``<stem>.features.json``.
    """
    f = _format(path, fmt)
    if f in ("msh", "msh4"):
        write_msh(mesh, path, "4.1", model)
    elif f == "msh2":
        write_msh(mesh, path, "2.2", model)
    elif f == "vtu":
        write_vtu(mesh, path, scalars, model)
    else:
        raise ValueError(f"unsupported output format {f!r}")
    if sidecar:
        ho = _as_ho(mesh, model)
        if isinstance(mesh, HighOrderMesh) or model is not None:
            (_written_model(ho) if f.startswith("msh") else ho.model).save(sidecar_path(path))
