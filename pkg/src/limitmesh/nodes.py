"""Nodal distributions, Lagrange bases and quadrature on simplices.

Node orderings follow the Gmsh convention for high-order triangles and
tets: vertices, edge nodes edge by edge, face nodes face by face, then
interior nodes, each group ordered recursively.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import roots_jacobi

__all__ = [
    "NodalDistribution",
    "make_distribution",
    "lattice_order",
    "gauss_lobatto",
    "warp_blend_triangle",
    "LagrangeBasis",
    "simplex_lattice",
    "simplex_quadrature",
    "TRI_EDGES",
    "TET_EDGES",
    "TET_FACE_ORDER",
    "WARP_BLEND_ALPHA",
]

TRI_EDGES = ((0, 1), (1, 2), (2, 0))
TET_EDGES = ((0, 1), (1, 2), (2, 0), (3, 0), (3, 2), (3, 1))
# face vertex order used for face-interior nodes of tets
TET_FACE_ORDER = ((0, 2, 1), (0, 1, 3), (0, 3, 2), (3, 1, 2))

# optimized blend parameter per degree 1..15 of the warp & blend family
WARP_BLEND_ALPHA = (0.0000, 0.0000, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999, 1.2832,
                    1.3648, 1.4773, 1.4959, 1.5743, 1.5770, 1.6223, 1.6258)
MAX_WARP_BLEND_DEGREE = len(WARP_BLEND_ALPHA)


def _tri_order(q):
    if q < 0:
        return []
    if q == 0:
        return [(0, 0, 0)]
    out = [(q, 0, 0), (0, q, 0), (0, 0, q)]
    for a, b in TRI_EDGES:
        for j in range(1, q):
            n = [0, 0, 0]
            n[a], n[b] = q - j, j
            out.append(tuple(n))
    for m in _tri_order(q - 3):
        out.append((m[0] + 1, m[1] + 1, m[2] + 1))
    return out


def _tet_order(q):
    if q < 0:
        return []
    if q == 0:
        return [(0, 0, 0, 0)]
    out = []
    for i in range(4):
        n = [0, 0, 0, 0]
        n[i] = q
        out.append(tuple(n))
    for a, b in TET_EDGES:
        for j in range(1, q):
            n = [0, 0, 0, 0]
            n[a], n[b] = q - j, j
            out.append(tuple(n))
    for face in TET_FACE_ORDER:
        for m in _tri_order(q - 3):
            n = [0, 0, 0, 0]
            for f, mm in zip(face, m):
                n[f] = mm + 1
            out.append(tuple(n))
    for m in _tet_order(q - 4):
        out.append(tuple(x + 1 for x in m))
    return out


@lru_cache(maxsize=None)
def lattice_order(q, dim=2):
    """Barycentric lattice indices of degree ``q`` in canonical node order.

    Returns
    -------
    ndarray of int, shape (N, dim + 1)
        Rows sum to ``q``; column ``i`` is the index of vertex ``i``.
    """
    if q < 1:
        raise ValueError("degree must be >= 1")
    if dim == 1:
        out = np.array([(q, 0), (0, q)] + [(q - j, j) for j in range(1, q)])
    elif dim == 2:
        out = np.array(_tri_order(q))
    elif dim == 3:
        out = np.array(_tet_order(q))
    else:
        raise ValueError("dim must be 1, 2 or 3")
    out.setflags(write=False)
    return out


def simplex_lattice(n, dim=2):
    """All barycentric points with denominator ``n`` (unordered lattice)."""
    if dim == 2:
        pts = [(n - i - j, i, j) for j in range(n + 1) for i in range(n + 1 - j)]
    elif dim == 3:
        pts = [(n - i - j - k, i, j, k) for k in range(n + 1) for j in range(n + 1 - k)
               for i in range(n + 1 - j - k)]
    else:
        pts = [(n - i, i) for i in range(n + 1)]
    return np.array(pts, dtype=float) / n


def gauss_lobatto(q):
    """Gauss-Lobatto-Legendre points on ``[-1, 1]`` (``q + 1`` points, ascending)."""
    if q < 1:
        raise ValueError("degree must be >= 1")
    if q == 1:
        return np.array([-1.0, 1.0])
    inner = np.sort(roots_jacobi(q - 1, 1.0, 1.0)[0])
    inner = 0.5 * (inner - inner[::-1])  # exact antisymmetry
    return np.concatenate([[-1.0], inner, [1.0]])


def _warp_factor(q, r):
    """Edge warp function taking equispaced to Gauss-Lobatto points."""
    lgl = gauss_lobatto(q)
    req = np.linspace(-1.0, 1.0, q + 1)
    V = npleg.legvander(req, q)
    P = npleg.legvander(r, q)
    lmat = np.linalg.solve(V.T, P.T)  # equispaced Lagrange basis at r
    warp = lmat.T @ (lgl - req)
    inside = np.abs(r) < 1.0 - 1e-10
    out = np.zeros_like(r)
    out[inside] = warp[inside] / (1.0 - r[inside] ** 2)
    return out


def warp_blend_triangle(q, lam):
    """Map equispaced barycentric points to warp & blend points.

    Parameters
    ----------
    q : int
    lam : array_like, shape (n, 3)
        Equispaced barycentric coordinates.
    """
    if not 1 <= q <= MAX_WARP_BLEND_DEGREE:
        raise ValueError(f"warp & blend parameters are tabulated for 1 <= q <= {MAX_WARP_BLEND_DEGREE}")
    lam = np.asarray(lam, dtype=float)
    alpha = WARP_BLEND_ALPHA[q - 1]
    L1, L2, L3 = lam[:, 0], lam[:, 1], lam[:, 2]
    x = -L2 + L3
    y = (-L2 - L3 + 2.0 * L1) / np.sqrt(3.0)
    blend1, blend2, blend3 = 4.0 * L2 * L3, 4.0 * L1 * L3, 4.0 * L1 * L2
    w1 = blend1 * _warp_factor(q, L3 - L2) * (1.0 + (alpha * L1) ** 2)
    w2 = blend2 * _warp_factor(q, L1 - L3) * (1.0 + (alpha * L2) ** 2)
    w3 = blend3 * _warp_factor(q, L2 - L1) * (1.0 + (alpha * L3) ** 2)
    c2, s2 = np.cos(2 * np.pi / 3), np.sin(2 * np.pi / 3)
    c3, s3 = np.cos(4 * np.pi / 3), np.sin(4 * np.pi / 3)
    x = x + w1 + c2 * w2 + c3 * w3
    y = y + s2 * w2 + s3 * w3
    # back to barycentric coordinates of the equilateral triangle
    b1 = (np.sqrt(3.0) * y + 1.0) / 3.0
    b3 = (x + 1.0 - b1) / 2.0
    b2 = 1.0 - b1 - b3
    out = np.stack([b1, b2, b3], axis=1)
    # snap round-off on edges and vertices
    out[lam == 0.0] = 0.0
    out /= out.sum(axis=1, keepdims=True)
    return out


@dataclass(frozen=True)
class NodalDistribution:
    """Interpolation nodes of degree ``q`` in canonical order.

    Attributes
    ----------
    degree : int
    kind : str
        ``"equispaced"`` or ``"warpblend"``.
    dim : int
        2 for triangles, 3 for tets.
    points : ndarray, shape (N, dim + 1)
        Barycentric coordinates.
    lattice : ndarray of int, shape (N, dim + 1)
        Equispaced lattice index each node derives from.
    """

    degree: int
    kind: str
    dim: int
    points: np.ndarray
    lattice: np.ndarray

    @property
    def size(self):
        return len(self.points)

    def support(self):
        """Number of nonzero barycentric indices per node (1 vertex, 2 edge, ...)."""
        return (self.lattice > 0).sum(axis=1)

    def to_text(self):
        """Plain-text table for auditing."""
        lines = [f"# {self.kind} degree {self.degree} dim {self.dim} nodes {self.size}"]
        for idx, p in zip(self.lattice, self.points):
            lines.append(" ".join(str(int(i)) for i in idx) + "  " + " ".join(f"{x:.17g}" for x in p))
        return "\n".join(lines) + "\n"


KINDS = ("equispaced", "warpblend")


def _canonical_kind(kind):
    k = str(kind).lower().replace("-", "").replace("_", "").replace(" ", "")
    if k in ("equispaced", "equidistant", "eq"):
        return "equispaced"
    if k in ("warpblend", "warpandblend", "wb"):
        return "warpblend"
    raise ValueError(f"unknown distribution kind {kind!r}")


@lru_cache(maxsize=None)
def make_distribution(q, kind="equispaced", dim=2) -> NodalDistribution:
    """Nodal distribution of degree ``q``.

    Parameters
    ----------
    q : int
    kind : {"equispaced", "warpblend"}
    dim : {1, 2, 3}
        Segment, triangle or tet. Warp & blend is available for segments
        (Gauss-Lobatto points) and triangles.
    """
    kind = _canonical_kind(kind)
    if q < 1:
        raise ValueError("degree must be >= 1")
    lat = lattice_order(q, dim)
    pts = lat.astype(float) / q
    if kind == "warpblend":
        if dim == 1:
            r = gauss_lobatto(q)
            t = (r + 1.0) / 2.0
            order = np.concatenate([[0, q], np.arange(1, q)])
            pts = np.stack([1.0 - t[order], t[order]], axis=1)
        elif dim == 2:
            pts = warp_blend_triangle(q, pts)
        else:
            raise ValueError("warp & blend nodes are not available for tets; use equispaced")
    pts.setflags(write=False)
    return NodalDistribution(int(q), kind, int(dim), pts, lat)


def _hjacobi(nmax, alpha, s, t):
    """Homogeneous Jacobi polynomials ``t**n P_n^(alpha, 0)(2 s / t - 1)``.

    Returns values and partial derivatives in ``s`` and ``t`` for degrees
    ``0..nmax``, each of shape (nmax + 1, len(s)). The homogeneous form is
    a polynomial in ``(s, t)`` and stays regular at ``t = 0``.
    """
    s = np.asarray(s, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), s.shape)
    H = np.zeros((nmax + 1,) + s.shape)
    Hs = np.zeros_like(H)
    Ht = np.zeros_like(H)
    H[0] = 1.0
    if nmax >= 1:
        a = alpha
        H[1] = 0.5 * ((a + 2.0) * (2.0 * s - t) + a * t)
        Hs[1] = a + 2.0
        Ht[1] = 0.5 * (-(a + 2.0) + a)
    for n in range(1, nmax):
        a = alpha
        den = 2.0 * (n + 1) * (n + a + 1) * (2 * n + a)
        c1 = (2 * n + a + 1) * (2 * n + a + 2) * (2 * n + a) / den
        c2 = (2 * n + a + 1) * a * a / den
        b = 2.0 * (n + a) * n * (2 * n + a + 2) / den
        lin = c1 * (2.0 * s - t) + c2 * t
        H[n + 1] = lin * H[n] - b * t * t * H[n - 1]
        Hs[n + 1] = 2.0 * c1 * H[n] + lin * Hs[n] - b * t * t * Hs[n - 1]
        Ht[n + 1] = (c2 - c1) * H[n] + lin * Ht[n] - b * (2.0 * t * H[n - 1] + t * t * Ht[n - 1])
    return H, Hs, Ht


def _modal_terms(q, dim):
    if dim == 1:
        return [(i,) for i in range(q + 1)]
    if dim == 2:
        return [(i, j) for i in range(q + 1) for j in range(q + 1 - i)]
    return [(i, j, k) for i in range(q + 1) for j in range(q + 1 - i) for k in range(q + 1 - i - j)]


def _modal_basis(q, dim, lam, derivatives=False):
    """Collapsed-coordinate orthogonal basis (unnormalized) at barycentric points.

    Returns values (n, N) and, optionally, derivatives with respect to the
    Cartesian coordinates ``lambda_1 .. lambda_dim`` as a list of (n, N).
    """
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    terms = _modal_terms(q, dim)
    n = len(lam)
    vals = np.empty((n, len(terms)))
    grads = [np.empty((n, len(terms))) for _ in range(dim)] if derivatives else None
    if dim == 1:
        x = lam[:, 1]
        H, Hs, _ = _hjacobi(q, 0.0, x, 1.0)
        vals[:] = H.T
        if derivatives:
            grads[0][:] = Hs.T
        return vals, grads
    if dim == 2:
        x, y = lam[:, 1], lam[:, 2]
        A, As, At = _hjacobi(q, 0.0, x, 1.0 - y)
        cache = {}
        for m, (i, j) in enumerate(terms):
            if i not in cache:
                cache[i] = _hjacobi(q - i, 2.0 * i + 1.0, y, 1.0)
            B, Bs, _ = cache[i]
            vals[:, m] = A[i] * B[j]
            if derivatives:
                grads[0][:, m] = As[i] * B[j]
                grads[1][:, m] = -At[i] * B[j] + A[i] * Bs[j]
        return vals, grads
    x, y, z = lam[:, 1], lam[:, 2], lam[:, 3]
    A, As, At = _hjacobi(q, 0.0, x, 1.0 - y - z)
    cb, cc = {}, {}
    for m, (i, j, k) in enumerate(terms):
        if i not in cb:
            cb[i] = _hjacobi(q - i, 2.0 * i + 1.0, y, 1.0 - z)
        if i + j not in cc:
            cc[i + j] = _hjacobi(q - i - j, 2.0 * (i + j) + 2.0, z, 1.0)
        B, Bs, Bt = cb[i]
        C, Cs, _ = cc[i + j]
        f1, f2, f3 = A[i], B[j], C[k]
        vals[:, m] = f1 * f2 * f3
        if derivatives:
            grads[0][:, m] = As[i] * f2 * f3
            grads[1][:, m] = (-At[i] * f2 + f1 * Bs[j]) * f3
            grads[2][:, m] = (-At[i] * f2 - f1 * Bt[j]) * f3 + f1 * f2 * Cs[k]
    return vals, grads


class LagrangeBasis:
    """Lagrange basis of total degree ``q`` on a set of simplex nodes.

    The nodal basis is obtained from the Vandermonde matrix of an
    orthonormal collapsed-coordinate modal basis, which keeps the
    conditioning moderate up to degree 10 and beyond.

    Parameters
    ----------
    dist : NodalDistribution
    """

    def __init__(self, dist: NodalDistribution):
        self.dist = dist
        self.q = dist.degree
        self.dim = dist.dim
        qp, qw = simplex_quadrature(2 * self.q, self.dim)
        m, _ = _modal_basis(self.q, self.dim, qp)
        self._scale = 1.0 / np.sqrt((qw[:, None] * m * m).sum(axis=0))
        V = self._modal(dist.points)[0]
        self.cond = float(np.linalg.cond(V))
        self.coef = np.linalg.inv(V)

    def _modal(self, lam, derivatives=False):
        vals, grads = _modal_basis(self.q, self.dim, lam, derivatives)
        vals = vals * self._scale
        if derivatives:
            grads = [g * self._scale for g in grads]
        return vals, grads

    def values(self, lam):
        """Basis values, shape (n, N)."""
        return self._modal(lam)[0] @ self.coef

    def gradients(self, lam):
        """Derivatives with respect to ``lambda_1 .. lambda_dim``, shape (dim, n, N)."""
        _, g = self._modal(lam, derivatives=True)
        return np.stack([gi @ self.coef for gi in g])

    def interpolate(self, nodes, lam):
        """Evaluate the interpolant with nodal values ``nodes`` at ``lam``."""
        return self.values(lam) @ np.asarray(nodes)


@lru_cache(maxsize=None)
def lagrange_basis(q, kind="equispaced", dim=2) -> LagrangeBasis:
    return LagrangeBasis(make_distribution(q, kind, dim))


@lru_cache(maxsize=None)
def simplex_quadrature(degree, dim=2):
    """Collapsed Gauss-Jacobi rule exact for polynomials of ``degree``.

    Returns
    -------
    points : ndarray, shape (n, dim + 1)
        Barycentric coordinates.
    weights : ndarray
        Sum to the reference simplex measure (1/2 or 1/6).
    """
    n = max(1, (degree + 2) // 2)
    if dim == 1:
        x, w = np.polynomial.legendre.leggauss(n)
        t = (x + 1) / 2
        return np.stack([1 - t, t], 1), w / 2
    xg, wg = np.polynomial.legendre.leggauss(n)
    u, wu = (xg + 1) / 2, wg / 2
    if dim == 2:
        xv, wv = roots_jacobi(n, 1.0, 0.0)
        v, wv = (xv + 1) / 2, wv / 4
        U, Vv = np.meshgrid(u, v, indexing="ij")
        W = np.outer(wu, wv)
        x = U * (1 - Vv)
        y = Vv
        pts = np.stack([1 - x - y, x, y], axis=-1).reshape(-1, 3)
        return pts, W.ravel()
    if dim == 3:
        xv, wv = roots_jacobi(n, 1.0, 0.0)
        v, wv = (xv + 1) / 2, wv / 4
        xw, ww = roots_jacobi(n, 2.0, 0.0)
        w_, ww = (xw + 1) / 2, ww / 8
        U, Vv, Wz = np.meshgrid(u, v, w_, indexing="ij")
        W = np.einsum("i,j,k->ijk", wu, wv, ww)
        x = U * (1 - Vv) * (1 - Wz)
        y = Vv * (1 - Wz)
        z = Wz
        pts = np.stack([1 - x - y - z, x, y, z], axis=-1).reshape(-1, 4)
        return pts, W.ravel()
    raise ValueError("dim must be 1, 2 or 3")
