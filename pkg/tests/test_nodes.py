import itertools
import json
from math import factorial
from pathlib import Path

import numpy as np
import pytest

from limitmesh.nodes import (
    MAX_WARP_BLEND_DEGREE,
    gauss_lobatto,
    lagrange_basis,
    lattice_order,
    make_distribution,
    simplex_quadrature,
)

ORDERINGS = json.loads((Path(__file__).parent / "data" / "gmsh_orderings.json").read_text())
GMSH_KIND = {1: "line", 2: "triangle", 3: "tetra"}


def n_nodes(q, dim):
    return {1: q + 1, 2: (q + 1) * (q + 2) // 2, 3: (q + 1) * (q + 2) * (q + 3) // 6}[dim]


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("q", range(1, 11))
def test_lattice_matches_gmsh_ordering(q, dim):
    ref = ORDERINGS[f"{GMSH_KIND[dim]}:{q}"]
    coords = np.array(ref["coords"]).reshape(-1, dim)
    if dim == 1:
        # reference segment [-1, 1] sampled on a 2q lattice
        coords = (coords + q) // 2
    lat = lattice_order(q, dim)
    np.testing.assert_array_equal(lat[:, 1:], coords)
    assert len(lat) == n_nodes(q, dim)


def test_degree_one_and_two():
    for kind in ("equispaced", "warpblend"):
        np.testing.assert_array_equal(make_distribution(1, kind).points, np.eye(3))
    d = make_distribution(2)
    np.testing.assert_array_equal(d.points[3:], [[0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5]])


def test_gauss_lobatto_degree_three():
    # interior roots of P_3'(x) = (15 x^2 - 3) / 2
    np.testing.assert_allclose(gauss_lobatto(3), [-1, -1 / np.sqrt(5), 1 / np.sqrt(5), 1], atol=1e-15)
    x = gauss_lobatto(7)
    np.testing.assert_array_equal(x, -x[::-1])


def test_warp_blend_edge_nodes_are_gauss_lobatto():
    for q in (3, 5, 8):
        d = make_distribution(q, "warpblend")
        t = np.sort(d.points[3:3 + q - 1, 1])
        np.testing.assert_allclose(t, (gauss_lobatto(q)[1:-1] + 1) / 2, atol=1e-14)
    d = make_distribution(3, "warpblend")
    np.testing.assert_allclose(np.sort(d.points[3:5, 0]), [(1 - 5**-0.5) / 2, (1 + 5**-0.5) / 2], atol=1e-15)


@pytest.mark.parametrize("kind,dim,qmax", [("equispaced", 2, 12), ("warpblend", 2, MAX_WARP_BLEND_DEGREE),
                                           ("equispaced", 3, 8), ("warpblend", 1, 10)])
def test_distribution_invariants(kind, dim, qmax):
    for q in range(1, qmax + 1):
        d = make_distribution(q, kind, dim)
        p = d.points
        assert d.size == n_nodes(q, dim)
        np.testing.assert_array_equal(p[: dim + 1], np.eye(dim + 1))
        assert (p >= 0).all() and (p <= 1).all()
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-15)
        # nodes stay on the entity of their lattice index
        np.testing.assert_array_equal(p == 0, d.lattice == 0)
        # closed under permutation of the barycentric indices
        key = {tuple(np.round(r, 12)) for r in p}
        for perm in itertools.permutations(range(dim + 1)):
            assert {tuple(np.round(r[list(perm)], 12)) for r in p} == key


def test_distribution_errors():
    with pytest.raises(ValueError):
        make_distribution(0)
    with pytest.raises(ValueError):
        make_distribution(MAX_WARP_BLEND_DEGREE + 1, "warpblend")
    with pytest.raises(ValueError):
        make_distribution(3, "warpblend", 3)
    with pytest.raises(ValueError):
        make_distribution(3, "chebyshev")


def test_distribution_text_table():
    text = make_distribution(2, "warpblend").to_text()
    lines = text.strip().splitlines()
    assert lines[0].startswith("# warpblend degree 2") and len(lines) == 7


@pytest.mark.parametrize("q,kind,dim", [(1, "equispaced", 2), (4, "warpblend", 2), (10, "warpblend", 2),
                                        (10, "equispaced", 2), (3, "equispaced", 3), (6, "equispaced", 3)])
def test_lagrange_basis_is_nodal_and_exact(q, kind, dim):
    basis = lagrange_basis(q, kind, dim)
    d = basis.dist
    np.testing.assert_allclose(basis.values(d.points), np.eye(d.size), atol=1e-10)
    rng = np.random.default_rng(q)
    lam = rng.dirichlet(np.ones(dim + 1), size=30)
    # reproduces a random polynomial of degree q
    coef = rng.normal(size=dim)

    def f(z):
        return (z[:, 1:] @ coef) ** q + z[:, 1]

    np.testing.assert_allclose(basis.values(lam) @ f(d.points), f(lam), atol=1e-9)
    g = basis.gradients(lam)
    h = 1e-6
    for i in range(dim):
        step = np.zeros(dim + 1)
        step[0], step[i + 1] = -h, h
        fd = (basis.values(lam + step) - basis.values(lam - step)) / (2 * h)
        np.testing.assert_allclose(g[i], fd, atol=1e-5 * max(1, np.abs(fd).max()))
    assert basis.cond < 1e3


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_quadrature_exactness(dim):
    deg = 8
    pts, w = simplex_quadrature(deg, dim)
    for exps in itertools.product(range(deg + 1), repeat=dim):
        if sum(exps) > deg:
            continue
        val = (w * np.prod(pts[:, 1:] ** np.array(exps), axis=1)).sum()
        exact = np.prod([factorial(e) for e in exps]) / factorial(sum(exps) + dim)
        assert val == pytest.approx(exact, rel=1e-12, abs=1e-15)
