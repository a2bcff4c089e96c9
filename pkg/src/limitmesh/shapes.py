"""Synthetic test geometries with feature tags.

Each builder returns plain arrays or ready meshes plus per-triangle
surface ids so that examples, tests and the CLI share the same inputs.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull, Delaunay

from .mesh import FeatureModel, SurfaceMesh, VolumeMesh, infer_features, model_for_volume

__all__ = [
    "fibonacci_sphere",
    "icosphere",
    "torus",
    "planar_grid",
    "cube_surface",
    "cylinder_surface",
    "box_tets",
    "cube_five_tets",
    "octant_ball",
    "orient_outward",
]


def orient_outward(points, triangles, center=None):
    """Flip triangles of a star-shaped closed surface to face away from ``center``."""
    points = np.asarray(points, float)
    tri = np.array(triangles, dtype=np.int64)
    c = points.mean(0) if center is None else np.asarray(center, float)
    p = points[tri]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    flip = np.einsum("ij,ij->i", n, p.mean(1) - c) < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    return tri


def _hull_surface(points):
    hull = ConvexHull(points)
    used = np.unique(hull.simplices)
    remap = -np.ones(len(points), dtype=np.int64)
    remap[used] = np.arange(len(used))
    pts = points[used]
    tri = orient_outward(pts, remap[hull.simplices], center=pts.mean(0))
    # deterministic triangle order
    tri = np.array([np.roll(t, -int(np.argmin(t))) for t in tri])
    tri = tri[np.lexsort(tri.T[::-1])]
    return pts, tri


def fibonacci_sphere(n, radius=1.0):
    """Convex hull of ``n`` golden-spiral points on a sphere.

    Returns
    -------
    SurfaceMesh
        Closed triangulation with mixed valences.
    """
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (1.0 + 5**0.5) * i
    pts = radius * np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    v, t = _hull_surface(pts)
    return SurfaceMesh(v, t)


def icosphere(level=0, radius=1.0):
    """Icosahedron refined ``level`` times with vertices pushed to the sphere."""
    g = (1 + 5**0.5) / 2
    v = [(-1, g, 0), (1, g, 0), (-1, -g, 0), (1, -g, 0), (0, -1, g), (0, 1, g),
         (0, -1, -g), (0, 1, -g), (g, 0, -1), (g, 0, 1), (-g, 0, -1), (-g, 0, 1)]
    f = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
         (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
         (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    v = [np.array(p, float) / np.linalg.norm(p) for p in v]
    for _ in range(level):
        mid = {}
        nf = []
        for a, b, c in f:
            m = []
            for x, y in ((a, b), (b, c), (c, a)):
                k = (min(x, y), max(x, y))
                if k not in mid:
                    p = v[x] + v[y]
                    v.append(p / np.linalg.norm(p))
                    mid[k] = len(v) - 1
                m.append(mid[k])
            nf += [(a, m[0], m[2]), (m[0], b, m[1]), (m[2], m[1], c), (m[0], m[1], m[2])]
        f = nf
    return SurfaceMesh(radius * np.array(v), f)


def torus(nu=12, nv=8, R=2.0, r=0.75):
    """Structured torus where every vertex has valence 6."""
    i, j = np.meshgrid(np.arange(nu), np.arange(nv), indexing="ij")
    u = 2 * np.pi * i.ravel() / nu
    w = 2 * np.pi * j.ravel() / nv
    pts = np.stack([(R + r * np.cos(w)) * np.cos(u), (R + r * np.cos(w)) * np.sin(u), r * np.sin(w)], 1)

    def vid(a, b):
        return (a % nu) * nv + (b % nv)

    tri = []
    for a in range(nu):
        for b in range(nv):
            tri.append((vid(a, b), vid(a + 1, b), vid(a + 1, b + 1)))
            tri.append((vid(a, b), vid(a + 1, b + 1), vid(a, b + 1)))
    return SurfaceMesh(pts, tri)


def planar_grid(nx=4, ny=4, size=1.0):
    """Equilateral-type structured grid in the z=0 plane.

    Interior vertices have valence 6. Returns the mesh and the inferred
    model (boundary loop broken at the four corners).
    """
    i, j = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    x = (i + 0.5 * j).ravel() * size / nx
    y = (j * np.sqrt(3) / 2).ravel() * size / ny
    pts = np.stack([x, y, np.zeros_like(x)], 1)

    def vid(a, b):
        return a * (ny + 1) + b

    tri = []
    for a in range(nx):
        for b in range(ny):
            tri.append((vid(a, b), vid(a + 1, b), vid(a, b + 1)))
            tri.append((vid(a + 1, b), vid(a + 1, b + 1), vid(a, b + 1)))
    mesh = SurfaceMesh(pts, tri)
    model = infer_features(mesh, np.ones(mesh.n_triangles, dtype=np.int64))
    corners = {vid(0, 0), vid(nx, 0), vid(0, ny), vid(nx, ny)}
    pts_ = {k + 1: v for k, v in enumerate(sorted(corners | set(model.points.values())))}
    edges = [e for c in model.curves.values() for e in c]
    from .mesh import trace_chains
    curves = {}
    for k, (path, closed) in enumerate(trace_chains(edges, pts_.values()), start=1):
        n = len(path)
        curves[k] = [(path[m], path[(m + 1) % n]) for m in range(n if closed else n - 1)]
    return mesh, FeatureModel(points=pts_, curves=curves, surfaces=model.surfaces)


def _merge(points, tol=1e-9):
    key = np.round(np.asarray(points) / tol).astype(np.int64)
    _, idx, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(idx)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return np.asarray(points)[idx[order]], rank[inv.reshape(-1)]


def cube_surface(n=2, size=1.0):
    """Surface of ``[0, size]^3`` with an ``n x n`` grid per face.

    Returns the mesh and per-triangle face ids 1..6.
    """
    pts, tris, ids = [], [], []
    s = np.linspace(0.0, size, n + 1)
    faces = [  # origin, u, v chosen so u x v points outward
        ((0, 0, 0), (0, 1, 0), (1, 0, 0)),
        ((0, 0, 1), (1, 0, 0), (0, 1, 0)),
        ((0, 0, 0), (1, 0, 0), (0, 0, 1)),
        ((0, 1, 0), (0, 0, 1), (1, 0, 0)),
        ((0, 0, 0), (0, 0, 1), (0, 1, 0)),
        ((1, 0, 0), (0, 1, 0), (0, 0, 1)),
    ]
    for fid, (o, u, v) in enumerate(faces, start=1):
        o, u, v = (np.array(a, float) for a in (o, u, v))
        base = len(pts)
        for a in s:
            for b in s:
                pts.append(o * size + a * u + b * v)
        for a in range(n):
            for b in range(n):
                p00 = base + a * (n + 1) + b
                p10, p01, p11 = p00 + n + 1, p00 + 1, p00 + n + 2
                tris += [(p00, p10, p11), (p00, p11, p01)]
                ids += [fid, fid]
    v, inv = _merge(pts)
    tri = inv[np.array(tris)]
    return SurfaceMesh(v, tri), np.array(ids)


def cylinder_surface(n_theta=32, n_z=8, radius=1.0, height=2.0, seam=False, n_cap=3):
    """Closed cylinder with caps.

    Surface ids: 1 bottom cap, 2 top cap, 3 side. With ``seam=True`` the
    side is split into two halves (ids 3 and 4) along two generators.
    """
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    zs = np.linspace(-height / 2, height / 2, n_z + 1)
    pts = [(radius * np.cos(t), radius * np.sin(t), z) for z in zs for t in th]

    def sid(k, i):
        return k * n_theta + (i % n_theta)

    tris, ids = [], []
    for k in range(n_z):
        for i in range(n_theta):
            tag = 3 if (not seam or i < n_theta // 2) else 4
            tris += [(sid(k, i), sid(k, i + 1), sid(k + 1, i + 1)), (sid(k, i), sid(k + 1, i + 1), sid(k + 1, i))]
            ids += [tag, tag]
    # caps: concentric rings with a Delaunay triangulation
    for cap, z in ((1, zs[0]), (2, zs[-1])):
        rim = [sid(0 if cap == 1 else n_z, i) for i in range(n_theta)]
        local = [np.array(pts[r][:2]) for r in rim]
        inner = []
        for m in range(1, n_cap):
            rr = radius * (1 - m / n_cap)
            cnt = max(3, int(round(n_theta * (1 - m / n_cap))))
            off = 0.5 * (m % 2)
            for i in range(cnt):
                a = 2 * np.pi * (i + off) / cnt
                inner.append((rr * np.cos(a), rr * np.sin(a)))
        inner.append((0.0, 0.0))
        xy = np.array(local + [np.array(p) for p in inner])
        ids_local = rim + list(range(len(pts), len(pts) + len(inner)))
        pts += [(x, y, z) for x, y in inner]
        d = Delaunay(xy)
        for s in d.simplices:
            a, b, c = (ids_local[q] for q in s)
            p = np.array([pts[a], pts[b], pts[c]])
            nz = np.cross(p[1] - p[0], p[2] - p[0])[2]
            if (nz > 0) != (cap == 2):
                b, c = c, b
            tris.append((a, b, c))
            ids.append(cap)
    return SurfaceMesh(np.array(pts), tris), np.array(ids)


def box_tets(nx=4, ny=4, nz=2, size=(1.0, 1.0, 0.5), height_fn=None):
    """Structured box split into six tets per cell.

    Parameters
    ----------
    height_fn : callable, optional
        ``height_fn(x, y)`` displacement added to the z coordinate,
        scaled linearly with height so that the bottom stays flat.

    Returns
    -------
    VolumeMesh, FeatureModel
        Boundary faces tagged by box side (1..6), curves and points inferred.
    """
    lx, ly, lz = size
    i, j, k = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), np.arange(nz + 1), indexing="ij")
    x = i.ravel() * lx / nx
    y = j.ravel() * ly / ny
    z = k.ravel() * lz / nz
    if height_fn is not None:
        z = z + height_fn(x, y) * (z / lz)
    pts = np.stack([x, y, z], 1)

    def vid(a, b, c):
        return (a * (ny + 1) + b) * (nz + 1) + c

    # Kuhn split of the unit cube along the main diagonal
    paths = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    tets = []
    for a in range(nx):
        for b in range(ny):
            for c in range(nz):
                for path in paths:
                    cur = [a, b, c]
                    verts = [vid(*cur)]
                    for ax in path:
                        cur[ax] += 1
                        verts.append(vid(*cur))
                    p = pts[verts]
                    if np.linalg.det(p[1:] - p[0]) < 0:
                        verts[2], verts[3] = verts[3], verts[2]
                    tets.append(verts)
    mesh = VolumeMesh(pts, tets)
    tags = {}
    for f in mesh.boundary_faces.tolist():
        f_ = np.array(f)
        ii = f_ // ((ny + 1) * (nz + 1))
        jj = (f_ // (nz + 1)) % (ny + 1)
        kk = f_ % (nz + 1)
        for tag, hit in enumerate((ii == 0, ii == nx, jj == 0, jj == ny, kk == 0, kk == nz), start=1):
            if hit.all():
                tags[tuple(f)] = tag
                break
    return mesh, model_for_volume(mesh, tags)


def cube_five_tets():
    """Unit cube split into five tets (one central, four corners)."""
    p = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], float)
    # vertex index = 4x + 2y + z
    tets = [(0, 4, 2, 1), (6, 2, 4, 7), (5, 1, 7, 4), (3, 1, 2, 7), (1, 2, 4, 7)]
    out = []
    for t in tets:
        q = p[list(t)]
        if np.linalg.det(q[1:] - q[0]) < 0:
            t = (t[0], t[2], t[1], t[3])
        out.append(t)
    return VolumeMesh(p, out)


def octant_ball(n_shell=60, n_inner=20, radius=1.0, seed=0):
    """Delaunay tet mesh of the positive octant of a ball.

    Surface ids: 1,2,3 the planes x=0, y=0, z=0 and 4 the spherical part.
    """
    rng = np.random.default_rng(seed)
    pts = [np.zeros(3)]
    # points on the three quarter-circle arcs and the spherical patch
    m = 6
    for a in range(m + 1):
        t = 0.5 * np.pi * a / m
        pts += [radius * np.array([np.cos(t), np.sin(t), 0]), radius * np.array([0, np.cos(t), np.sin(t)]),
                radius * np.array([np.sin(t), 0, np.cos(t)])]
    d = rng.normal(size=(n_shell, 3))
    d = np.abs(d) / np.linalg.norm(d, axis=1)[:, None]
    d = d[np.min(d, axis=1) > 0.15]
    pts += list(radius * d)
    for axis in range(3):
        q = rng.uniform(0, 1, size=(n_inner, 2))
        q = q[np.linalg.norm(q, axis=1) < 0.85]
        for u, v in q * radius:
            w = np.zeros(3)
            w[[(axis + 1) % 3, (axis + 2) % 3]] = (u, v)
            pts.append(w)
    for a in range(1, 4):
        for axis in range(3):
            w = np.zeros(3)
            w[axis] = radius * a / 4
            pts.append(w)
    pts = np.array(pts)
    pts, _ = _merge(pts, tol=1e-9)
    dl = Delaunay(pts)
    tets = []
    for t in dl.simplices:
        q = pts[t]
        vol = np.linalg.det(q[1:] - q[0])
        if abs(vol) < 1e-10:
            continue
        if vol < 0:
            t = t[[0, 2, 1, 3]]
        tets.append(t)
    mesh = VolumeMesh(pts, tets)
    tags = {}
    for f in mesh.boundary_faces.tolist():
        q = pts[f]
        tag = 4
        for axis in range(3):
            if np.all(np.abs(q[:, axis]) < 1e-12):
                tag = axis + 1
        tags[tuple(f)] = tag
    return mesh, model_for_volume(mesh, tags)
