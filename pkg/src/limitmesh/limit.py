"""Element-wise evaluation of the limit curves and surfaces.

Points are evaluated on their own triangle: feature points return the
input vertex, points on feature-curve edges follow the limit cubic
B-spline of the curve and all other points follow the limit surface of
the triangle's feature surface. Near feature entities and extraordinary
vertices a small local copy of the control mesh is subdivided until the
point falls into a regular sub-patch, where the quartic box spline is
evaluated in closed form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .mesh import FeatureModel, Role, SurfaceMesh, edge_key, vertex_roles
from .subdivision import (
    CURVE_LIMIT_MASK,
    CURVE_VERTEX_MASK,
    ControlMesh,
    compute_control_mesh,
    limit_chi,
    limit_operator,
    refine_connectivity,
)

__all__ = [
    "LimitEvaluator",
    "EvalInfo",
    "box_spline_basis",
    "eval_curve_segment",
    "eval_surface_patch",
    "REGULAR_STENCIL",
]

log = logging.getLogger(__name__)

MAX_DEPTH = 48

# lattice coordinates of the regular stencil; the container is (0,0),(1,0),(0,1)
REGULAR_STENCIL = ((0, 0), (1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1),
                   (2, -1), (2, 0), (1, 1), (0, 2), (-1, 2))

# monomial exponents (i, j) of u**i * v**j with u = xi_1, v = xi_2
_POWERS = np.array([(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0), (0, 3), (1, 2), (2, 1),
                    (3, 0), (0, 4), (1, 3), (2, 2), (3, 1), (4, 0)])
# quartic box-spline basis of the regular patch, times 12
_BOX12 = np.array([
    [6, 0, 0, -12, -12, -12, 8, 12, 12, 8, -1, -2, 0, -2, -1],
    [1, 2, 4, 0, 6, 6, -4, -12, -6, -4, 2, 4, 0, -2, -1],
    [1, 4, 2, 6, 6, 0, -4, -6, -12, -4, -1, -2, 0, 4, 2],
    [1, 2, -2, 0, -6, 0, -4, 0, 6, 2, 2, 4, 0, -2, -1],
    [1, -2, -4, 0, 6, 6, 2, 0, -6, -4, -1, -2, 0, 2, 1],
    [1, -4, -2, 6, 6, 0, -4, -6, 0, 2, 1, 2, 0, -2, -1],
    [1, -2, 2, 0, -6, 0, 2, 6, 0, -4, -1, -2, 0, 4, 2],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 0, -2, -1],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2, 1],
    [0, 0, 0, 0, 0, 0, 2, 6, 6, 2, -1, -2, 0, -2, -1],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 2, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 2, 0, 0, 0, -1, -2, 0, 0, 0],
], dtype=float)
_BOX = _BOX12.T / 12.0  # (15, 12)


def box_spline_basis(xi, derivatives=False):
    """Regular-patch basis at barycentric points.

    Parameters
    ----------
    xi : array_like, shape (n, 3)
    derivatives : bool
        Also return derivatives with respect to ``xi_1`` and ``xi_2``.

    Returns
    -------
    B : ndarray, shape (n, 12)
    dB : tuple of ndarray, optional
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    u, v = xi[:, 1:2], xi[:, 2:3]
    pi, pj = _POWERS[:, 0], _POWERS[:, 1]
    up = u ** pi
    vp = v ** pj
    B = (up * vp) @ _BOX
    if not derivatives:
        return B
    du = (pi * u ** np.maximum(pi - 1, 0) * vp) @ _BOX
    dv = (up * pj * v ** np.maximum(pj - 1, 0)) @ _BOX
    return B, (du, dv)


def eval_curve_segment(stencil, t):
    """Uniform cubic B-spline segment between ``stencil[1]`` and ``stencil[2]``.

    Parameters
    ----------
    stencil : array_like, shape (4, d)
    t : float or array_like
        Parameter in ``[0, 1]``.
    """
    x = np.asarray(stencil, dtype=float)
    u = np.asarray(t, dtype=float)
    w = _bspline_weights(u)
    return w @ x if u.ndim else w[0] @ x


def _bspline_weights(u):
    u = np.atleast_1d(u)[:, None]
    return np.hstack([(1 - u) ** 3, 3 * u**3 - 6 * u**2 + 4, -3 * u**3 + 3 * u**2 + 3 * u + 1, u**3]) / 6.0


def _bspline_derivative(u):
    u = np.atleast_1d(u)[:, None]
    return np.hstack([-3 * (1 - u) ** 2, 9 * u**2 - 12 * u, -9 * u**2 + 6 * u + 3, 3 * u**2]) / 6.0


@dataclass
class EvalInfo:
    """Diagnostics of a batch evaluation."""

    max_depth: int = 0
    capped: int = 0

    def note(self, depth):
        self.max_depth = max(self.max_depth, depth)


class _Patch:
    """Local control mesh around a container triangle."""

    __slots__ = ("x", "tri", "roles", "curves", "container", "_kids", "_regular", "_stencil", "_nxt")

    def __init__(self, x, tri, roles, curves, container):
        self.x = x
        self.tri = tri
        self.roles = roles
        self.curves = curves
        self.container = container
        self._kids = None
        self._regular = None
        self._stencil = None
        self._nxt = None

    @property
    def corners(self):
        return self.tri[self.container]

    def _next_maps(self):
        if self._nxt is None:
            nxt = {}
            for a, b, c in self.tri.tolist():
                nxt.setdefault(a, {})[b] = c
                nxt.setdefault(b, {})[c] = a
                nxt.setdefault(c, {})[a] = b
            self._nxt = nxt
        return self._nxt

    def ring(self, v, start=None):
        m = self._next_maps()[v]
        if start is None:
            heads = set(m) - set(m.values())
            start = heads.pop() if heads else min(m)
        out = [start]
        cur = m.get(start)
        while cur is not None and cur != start:
            out.append(cur)
            cur = m.get(cur)
        return out

    @property
    def regular(self):
        if self._regular is None:
            self._regular = all(
                self.roles[v] == Role.INTERIOR and len(self._next_maps()[v]) == 6 for v in self.corners
            )
        return self._regular

    def stencil(self):
        if self._stencil is None:
            v0, v1, v2 = self.corners.tolist()
            r0 = self.ring(v0, v1)
            r1 = self.ring(v1, v2)
            r2 = self.ring(v2, v0)
            idx = [v0, v1, v2, r0[2], r0[3], r0[4], r0[5], r1[3], r1[4], r1[5], r2[3], r2[4]]
            assert r1[2] == r0[5] and r2[2] == r1[5] and r2[5] == r0[2], "inconsistent regular stencil"
            self._stencil = self.x[idx]
        return self._stencil

    def vertex_limit(self, v):
        r = self.roles[v]
        if r == Role.POINT:
            return self.x[v]
        if r == Role.CURVE:
            a, b = (w for e in self.curves for w in e if v in e and w != v)
            return CURVE_LIMIT_MASK[0] * self.x[a] + CURVE_LIMIT_MASK[1] * self.x[v] + CURVE_LIMIT_MASK[2] * self.x[b]
        ring = list(self._next_maps()[v])
        k = len(ring)
        c = float(limit_chi(k))
        return (1.0 - k * c) * self.x[v] + c * self.x[ring].sum(axis=0)

    def children(self):
        if self._kids is None:
            corners = set(self.corners.tolist())
            ref = refine_connectivity(self.tri, self.roles, self.curves, complete=corners)
            x = ref.apply(self.x)
            kids = []
            for j in range(4):
                ct = 4 * self.container + j
                cv = ref.triangles[ct]
                mask = np.isin(ref.triangles, cv).any(axis=1)
                sub = ref.triangles[mask]
                used = np.unique(sub)
                if np.isnan(x[used]).any():
                    raise RuntimeError("local subdivision patch is missing required control points")
                remap = np.full(len(ref.roles), -1, dtype=np.int64)
                remap[used] = np.arange(len(used))
                curves = {
                    edge_key(remap[a], remap[b])
                    for a, b in ref.curve_edges
                    if remap[a] >= 0 and remap[b] >= 0
                }
                container = int(np.flatnonzero(np.flatnonzero(mask) == ct)[0])
                kids.append(_Patch(x[used], remap[sub], ref.roles[used], curves, container))
            self._kids = kids
        return self._kids


_CORNER_SHIFT = np.eye(3)


def _select_children(xi):
    """Child index per point: corner ``k`` when ``xi_k > 1/2`` else center 3."""
    child = np.full(len(xi), 3, dtype=np.int64)
    for k in range(3):
        child[xi[:, k] > 0.5] = k
    return child


def _eval_patch(patch, xi, depth, max_depth, derivatives, info):
    n = len(xi)
    out = np.empty((n, 3))
    du = np.full((n, 3), np.nan) if derivatives else None
    dv = np.full((n, 3), np.nan) if derivatives else None
    info.note(depth)
    if patch.regular:
        S = patch.stencil()
        if derivatives:
            B, (Bu, Bv) = box_spline_basis(xi, True)
            out[:] = B @ S
            du[:] = Bu @ S
            dv[:] = Bv @ S
        else:
            out[:] = box_spline_basis(xi) @ S
        return out, du, dv
    rest = np.ones(n, dtype=bool)
    for k in range(3):
        at = xi[:, k] == 1.0
        if at.any():
            out[at] = patch.vertex_limit(patch.corners[k])
            rest &= ~at
    if not rest.any():
        return out, du, dv
    if depth >= max_depth:
        idx = np.flatnonzero(rest)
        k = np.argmax(xi[idx], axis=1)
        for i, kk in zip(idx, k):
            out[i] = patch.vertex_limit(patch.corners[kk])
        info.capped += len(idx)
        log.warning("subdivision depth cap reached for %d points; using the vertex limit", len(idx))
        return out, du, dv
    kids = patch.children()
    child = _select_children(xi)
    for j in range(4):
        sel = rest & (child == j)
        if not sel.any():
            continue
        if j < 3:
            mu = 2.0 * xi[sel] - _CORNER_SHIFT[j]
            scale = 2.0
        else:
            mu = 1.0 - 2.0 * xi[sel]
            scale = -2.0
        mu = np.clip(mu, 0.0, 1.0)
        r, ru, rv = _eval_patch(kids[j], mu, depth + 1, max_depth, derivatives, info)
        out[sel] = r
        if derivatives:
            du[sel] = scale * ru
            dv[sel] = scale * rv
    return out, du, dv


def _irregular_patch(stencil):
    """Local patch for a canonically ordered stencil of ``k + 6`` points.

    Ordering: the irregular vertex ``v0``, its ``k`` neighbors
    counterclockwise starting with ``v1`` and ``v2`` (the container is
    ``(v0, v1, v2)``), then the five outer points of the two regular
    corners, ordered as in the 12-point regular stencil.
    """
    x = np.asarray(stencil, dtype=float)
    k = len(x) - 6
    if k < 3:
        raise ValueError("stencil needs k + 6 points with k >= 3")
    v0, v1, v2 = 0, 1, 2
    ring = list(range(1, k + 1))
    rk, r3 = ring[-1], ring[2] if k > 2 else None
    e_2m1, e_20, e_11, e_02, e_m12 = range(k + 1, k + 6)
    tri = [(v0, ring[i], ring[(i + 1) % k]) for i in range(k)]
    tri += [(v1, rk, e_2m1), (v1, e_2m1, e_20), (v1, e_20, e_11), (v1, e_11, v2)]
    tri += [(v2, e_11, e_02), (v2, e_02, e_m12), (v2, e_m12, r3)]
    tri = np.array(tri, dtype=np.int64)
    # the v1 fan closes with (v1, v0, rk); v2 with (v2, r3, v0): both already in v0's fan
    roles = np.zeros(len(x), dtype=np.int64)
    return _Patch(x, tri, roles, set(), 0)


def eval_surface_patch(stencil, xi, derivatives=False):
    """Evaluate the limit surface over the container of a patch stencil.

    Parameters
    ----------
    stencil : array_like, shape (k + 6, 3)
        Regular 12-point stencil or the canonical irregular stencil.
    xi : array_like, shape (3,) or (n, 3)
    derivatives : bool
        Also return derivatives with respect to ``xi_1`` and ``xi_2``
        (undefined, NaN, exactly at an irregular corner).
    """
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    xi = np.atleast_2d(xi)
    stencil = np.asarray(stencil, dtype=float)
    if len(stencil) == 12:
        B = box_spline_basis(xi, derivatives)
        if derivatives:
            B, (Bu, Bv) = B
            res = (B @ stencil, Bu @ stencil, Bv @ stencil)
        else:
            res = (B @ stencil,)
    else:
        out, du, dv = _eval_patch(_irregular_patch(stencil), xi, 0, MAX_DEPTH, derivatives, EvalInfo())
        res = (out, du, dv) if derivatives else (out,)
    if single:
        res = tuple(r[0] for r in res)
    return res if derivatives else res[0]


class _CurveWindow:
    """Four consecutive control points of a curve; NaN rows are unused."""

    __slots__ = ("y", "f1", "f2", "_kids")

    def __init__(self, y, f1, f2):
        self.y = y
        self.f1 = f1
        self.f2 = f2
        self._kids = None

    def children(self):
        if self._kids is None:
            y0, y1, y2, y3 = self.y
            a, b, c = CURVE_VERTEX_MASK
            v1 = y1 if self.f1 else a * y0 + b * y1 + c * y2
            v2 = y2 if self.f2 else a * y1 + b * y2 + c * y3
            m01 = 0.5 * (y0 + y1)
            m12 = 0.5 * (y1 + y2)
            m23 = 0.5 * (y2 + y3)
            self._kids = (
                _CurveWindow(np.array([m01, v1, m12, v2]), self.f1, False),
                _CurveWindow(np.array([v1, m12, v2, m23]), False, self.f2),
            )
        return self._kids


def _eval_window(win, t, depth, max_depth, info):
    info.note(depth)
    if not (win.f1 or win.f2):
        return _bspline_weights(t) @ win.y
    out = np.empty((len(t), 3))
    at1 = (t == 0.0) & win.f1
    at2 = (t == 1.0) & win.f2
    out[at1] = win.y[1]
    out[at2] = win.y[2]
    rest = ~(at1 | at2)
    if not rest.any():
        return out
    if depth >= max_depth:
        out[rest] = np.where((t[rest] < 0.5)[:, None], win.y[1], win.y[2])
        info.capped += int(rest.sum())
        return out
    left, right = win.children()
    lsel = rest & (t <= 0.5)
    rsel = rest & (t > 0.5)
    if lsel.any():
        out[lsel] = _eval_window(left, 2.0 * t[lsel], depth + 1, max_depth, info)
    if rsel.any():
        out[rsel] = _eval_window(right, 2.0 * t[rsel] - 1.0, depth + 1, max_depth, info)
    return out


class LimitEvaluator:
    """Parameterization of the limit model over the triangles of a mesh.

    Parameters
    ----------
    surface : SurfaceMesh
        Input (interpolated) mesh.
    model : FeatureModel
    control : ControlMesh, optional
        Precomputed control mesh; solved when omitted.
    max_depth : int
        Cap on local subdivision depth.
    cache : bool
        Keep local subdivision trees between calls.
    """

    def __init__(self, surface: SurfaceMesh, model: FeatureModel, control: ControlMesh | None = None,
                 max_depth: int = MAX_DEPTH, cache: bool = True):
        if control is None:
            control = compute_control_mesh(surface, model)
        self.surface = surface
        self.model = model
        self.control = control
        self.max_depth = int(max_depth)
        self._cache = cache
        X = np.asarray(control.positions)
        self._x = X
        self._roles = vertex_roles(surface, model)
        self._tri_sid = model.triangle_surface(surface.n_triangles)
        self._edge_curve = model.edge_curve()
        self._vertex_limit = limit_operator(surface, model) @ X
        pts = set(model.points.values())
        self._fixed = np.zeros(surface.n_vertices, dtype=bool)
        self._fixed[list(pts)] = True
        self._chains = {}
        self._edge_seg = {}
        for cid in model.curves:
            verts, closed = model.curve_chain(cid)
            self._chains[cid] = (np.array(verts, dtype=np.int64), closed)
            n = len(verts)
            for s in range(n if closed else n - 1):
                a, b = verts[s], verts[(s + 1) % n]
                self._edge_seg[edge_key(a, b)] = (cid, s, a)
        self._patches = {}
        self._windows = {}

    # ------------------------------------------------------------------
    def clear_cache(self):
        self._patches.clear()
        self._windows.clear()

    def _root_patch(self, t):
        p = self._patches.get(t) if self._cache else None
        if p is not None:
            return p
        s = self.surface
        sid = self._tri_sid[t]
        tris = np.unique(np.concatenate([s.ring_triangles[v] for v in s.triangles[t]]))
        tris = tris[self._tri_sid[tris] == sid]
        sub = s.triangles[tris]
        used = np.unique(sub)
        remap = np.full(s.n_vertices, -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        curves = set()
        for a, b in sub[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2).tolist():
            e = edge_key(a, b)
            if e in self._edge_curve:
                curves.add(edge_key(remap[a], remap[b]))
        container = int(np.flatnonzero(tris == t)[0])
        p = _Patch(self._x[used], remap[sub], self._roles[used], curves, container)
        if self._cache:
            self._patches[t] = p
        return p

    def _window(self, cid, seg):
        key = (cid, seg)
        w = self._windows.get(key) if self._cache else None
        if w is not None:
            return w
        verts, closed = self._chains[cid]
        n = len(verts)
        idx = [seg - 1, seg, seg + 1, seg + 2]
        y = np.full((4, 3), np.nan)
        for j, i in enumerate(idx):
            if closed:
                y[j] = self._x[verts[i % n]]
            elif 0 <= i < n:
                y[j] = self._x[verts[i]]
        v1 = verts[seg % n]
        v2 = verts[(seg + 1) % n]
        w = _CurveWindow(y, bool(self._fixed[v1]), bool(self._fixed[v2]))
        if self._cache:
            self._windows[key] = w
        return w

    # ------------------------------------------------------------------
    def vertex_limit(self, v):
        """Limit position of vertex ``v``; input coordinates for feature points."""
        if self._fixed[v]:
            return np.array(self.surface.vertices[v])
        return np.array(self._vertex_limit[v])

    def map_onto_limit_curve(self, curve_id, segment, t, info=None):
        """Limit point of curve ``curve_id`` on ``segment`` at parameter ``t``.

        The parameter runs from chain vertex ``segment`` to ``segment + 1``.
        """
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if ((t_arr < 0) | (t_arr > 1)).any():
            raise ValueError("curve parameter outside [0, 1]")
        win = self._window(curve_id, segment)
        if ((t_arr == 0) & win.f1).any() or ((t_arr == 1) & win.f2).any():
            raise ValueError("parameter on a feature point; use the vertex directly")
        out = _eval_window(win, t_arr, 0, self.max_depth, info or EvalInfo())
        return out if np.ndim(t) else out[0]

    def map_onto_limit_surface(self, surface_id, triangle, xi, derivatives=False, info=None):
        """Limit point of feature surface ``surface_id`` over ``triangle``."""
        if self._tri_sid[triangle] != surface_id:
            raise ValueError(f"triangle {triangle} is not on surface {surface_id}")
        xi = np.asarray(xi, dtype=float)
        single = xi.ndim == 1
        xi2 = _check_xi(xi)
        out, du, dv = _eval_patch(self._root_patch(triangle), xi2, 0, self.max_depth, derivatives,
                                  info or EvalInfo())
        if single:
            out, du, dv = out[0], (du[0] if derivatives else None), (dv[0] if derivatives else None)
        return (out, du, dv) if derivatives else out

    def map_onto_limit(self, triangle, xi, info=None):
        """Limit point of the model at barycentric ``xi`` of ``triangle``.

        Parameters
        ----------
        triangle : int
        xi : array_like, shape (3,) or (n, 3)
        info : EvalInfo, optional
            Receives depth diagnostics.
        """
        xi = np.asarray(xi, dtype=float)
        single = xi.ndim == 1
        xi = _check_xi(xi)
        info = info or EvalInfo()
        tv = self.surface.triangles[triangle]
        out = np.empty((len(xi), 3))
        todo = np.ones(len(xi), dtype=bool)
        for k in range(3):
            at = xi[:, k] == 1.0
            if at.any():
                out[at] = self.vertex_limit(tv[k])
                todo &= ~at
        zero = xi == 0.0
        for k in range(3):
            a, b = int(tv[(k + 1) % 3]), int(tv[(k + 2) % 3])
            seg = self._edge_seg.get(edge_key(a, b))
            if seg is None:
                continue
            on = todo & zero[:, k]
            if not on.any():
                continue
            cid, s, start = seg
            t = xi[on, (k + 2) % 3]
            if start != a:
                t = 1.0 - t
            out[on] = self.map_onto_limit_curve(cid, s, t, info)
            todo &= ~on
        if todo.any():
            r, _, _ = _eval_patch(self._root_patch(triangle), xi[todo], 0, self.max_depth, False, info)
            out[todo] = r
        return out[0] if single else out

    def evaluate(self, triangle, xi, info=None):
        """Alias of :meth:`map_onto_limit` for batches."""
        return self.map_onto_limit(triangle, xi, info)


def _check_xi(xi, tol=1e-12):
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if xi.shape[1] != 3:
        raise ValueError("barycentric coordinates need three components")
    if (xi < -tol).any() or (np.abs(xi.sum(axis=1) - 1.0) > tol).any():
        raise ValueError("invalid barycentric coordinates")
    return np.clip(xi, 0.0, 1.0)
