import numpy as np
import pytest
from oracles import dyadic_oracle

from limitmesh.limit import (
    REGULAR_STENCIL,
    EvalInfo,
    LimitEvaluator,
    box_spline_basis,
    eval_curve_segment,
    eval_surface_patch,
)
from limitmesh.mesh import FeatureModel, Role, SurfaceMesh, classify_vertex, vertex_roles
from limitmesh.shapes import planar_grid
from limitmesh.subdivision import (
    compute_control_mesh,
    limit_position_curve,
    limit_position_surface,
    subdivide_curve,
)

LATTICE = np.array(REGULAR_STENCIL, dtype=float)
# lattice direction vectors of an equilateral grid
E1, E2 = np.array([1.0, 0.0, 0.0]), np.array([0.5, np.sqrt(3) / 2, 0.0])


def planar_stencil(A=np.eye(3), b=np.zeros(3)):
    pts = LATTICE[:, :1] * E1 + LATTICE[:, 1:] * E2
    return pts @ A.T + b


def dyadic_points(n):
    return [(i, j, n - i - j) for i in range(n + 1) for j in range(n + 1 - i)]


def triangle_with_edge(mesh, a, b):
    """Triangle containing the directed edge and the local indices of ``a`` and ``b``."""
    for t, tri in enumerate(mesh.triangles.tolist()):
        if a in tri and b in tri:
            return t, tri.index(a), tri.index(b)
    raise KeyError((a, b))


def curve_point(evaluator, a, b, t):
    """Evaluate the model at parameter ``t`` from ``a`` to ``b`` along a mesh edge."""
    tri, ia, ib = triangle_with_edge(evaluator.surface, a, b)
    xi = np.zeros(3)
    xi[ia], xi[ib] = 1 - t, t
    return evaluator.map_onto_limit(tri, xi)


# ----------------------------------------------------------------------
# closed-form segments and patches


def test_curve_segment_examples():
    line = np.linspace(0, 3, 4)[:, None] * [1.0, -1.0, 2.0]
    for u in (0.0, 0.25, 0.7, 1.0):
        np.testing.assert_allclose(eval_curve_segment(line, u), (1 + u) * line[1], atol=1e-15)
    x = np.random.default_rng(0).normal(size=(4, 3))
    np.testing.assert_allclose(eval_curve_segment(x, 0.0), limit_position_curve(*x[:3]), atol=1e-15)
    np.testing.assert_allclose(eval_curve_segment(x, 1.0), limit_position_curve(*x[1:]), atol=1e-15)
    p = np.array([0.5, 1.0, -2.0])
    np.testing.assert_allclose(eval_curve_segment(np.tile(p, (4, 1)), np.linspace(0, 1, 7)),
                               np.tile(p, (7, 1)), atol=1e-15)


def test_regular_patch_linear_precision():
    rng = np.random.default_rng(2)
    A, b = rng.normal(size=(3, 3)), rng.normal(size=3)
    S = planar_stencil(A, b)
    xi = rng.dirichlet(np.ones(3), size=20)
    expected = (xi[:, 1:2] * E1 + xi[:, 2:3] * E2) @ A.T + b
    np.testing.assert_allclose(eval_surface_patch(S, xi), expected, atol=1e-13)


def test_regular_patch_corner_is_limit_mask():
    S = np.random.default_rng(3).normal(size=(12, 3))
    # stencil rows 1..6 are the six neighbours of the corner at lattice (0, 0)
    np.testing.assert_allclose(eval_surface_patch(S, [1.0, 0.0, 0.0]), limit_position_surface(S[0], S[1:7]),
                               atol=1e-15)
    np.testing.assert_allclose(eval_surface_patch(S, [1.0, 0.0, 0.0]), 0.5 * S[0] + S[1:7].sum(0) / 12,
                               atol=1e-15)


@pytest.mark.parametrize("k", [3, 4, 5, 7, 8])
def test_patch_partition_of_unity(k):
    p = np.array([1.0, -2.0, 0.5])
    xi = np.array([[0.2, 0.3, 0.5], [0.9, 0.05, 0.05], [1.0, 0.0, 0.0], [0.0, 0.5, 0.5]])
    np.testing.assert_allclose(eval_surface_patch(np.tile(p, (k + 6, 1)), xi), np.tile(p, (4, 1)), atol=1e-14)
    np.testing.assert_allclose(box_spline_basis(xi).sum(axis=1), 1.0, atol=1e-15)


def test_patch_derivatives_match_finite_differences():
    S = np.random.default_rng(4).normal(size=(12, 3))
    xi = np.array([0.3, 0.3, 0.4])
    _, du, dv = eval_surface_patch(S, xi, derivatives=True)
    h = 1e-6
    fu = (eval_surface_patch(S, xi + [-h, h, 0]) - eval_surface_patch(S, xi - [-h, h, 0])) / (2 * h)
    fv = (eval_surface_patch(S, xi + [-h, 0, h]) - eval_surface_patch(S, xi - [-h, 0, h])) / (2 * h)
    np.testing.assert_allclose(du, fu, atol=1e-8)
    np.testing.assert_allclose(dv, fv, atol=1e-8)


def test_irregular_stencil_must_be_long_enough():
    with pytest.raises(ValueError):
        eval_surface_patch(np.zeros((8, 3)), [0.2, 0.3, 0.5])


# ----------------------------------------------------------------------
# evaluator dispatch


def test_feature_point_returns_input(cube):
    s, model = cube
    ev = LimitEvaluator(s, model)
    for v in model.points.values():
        t = int(s.ring_triangles[v][0])
        xi = (s.triangles[t] == v).astype(float)
        np.testing.assert_array_equal(ev.map_onto_limit(t, xi), s.vertices[v])


def _interior_segment(ev, cid):
    verts, closed = ev.model.curve_chain(cid)
    fixed = set(ev.model.points.values())
    n = len(verts)
    for s in range(n if closed else n - 1):
        window = [verts[(s + d) % n] for d in (-1, 0, 1, 2)] if closed else verts[max(s - 1, 0):s + 3]
        if len(window) == 4 and not fixed & set(window[1:3]) and (closed or 0 < s < n - 2):
            return window, s
    raise AssertionError("no interior segment")


def test_curve_midpoint_matches_segment_formula(seamed_cylinder):
    s, model = seamed_cylinder
    ev = LimitEvaluator(s, model)
    for cid in model.curves:
        window, seg = _interior_segment(ev, cid)
        info = EvalInfo()
        direct = ev.map_onto_limit_curve(cid, seg, 0.5, info)
        expected = eval_curve_segment(ev.control.positions[window], 0.5)
        np.testing.assert_allclose(direct, expected, atol=1e-15)
        np.testing.assert_allclose(curve_point(ev, window[1], window[2], 0.5), expected, atol=1e-15)
        assert info.max_depth == 0


def test_curve_segment_next_to_feature_point(seamed_cylinder):
    s, model = seamed_cylinder
    ev = LimitEvaluator(s, model)
    fixed_vertices = set(model.points.values())
    checked = 0
    for cid in model.curves:
        verts, closed = model.curve_chain(cid)
        if verts[0] not in fixed_vertices:
            continue
        y = ev.control.positions[verts]
        fixed = [v in fixed_vertices for v in verts]
        z = subdivide_curve(y, fixed=fixed, closed=closed)
        # t = 0.6 on segment 0 lies in its inner child at 2 * 0.6 - 1 = 0.2
        expected = eval_curve_segment(z[0:4], 0.2)
        info = EvalInfo()
        np.testing.assert_allclose(ev.map_onto_limit_curve(cid, 0, 0.6, info), expected, atol=1e-15)
        assert info.max_depth == 1
        checked += 1
    assert checked


def test_straight_curve_against_global_refinement(flat_grid):
    mesh, model = flat_grid
    ev = LimitEvaluator(mesh, model)
    fixed_vertices = set(model.points.values())
    levels = 8
    for cid in model.curves:
        verts, closed = model.curve_chain(cid)
        z = ev.control.positions[verts]
        fixed = np.array([v in fixed_vertices for v in verts])
        for _ in range(levels):
            z = subdivide_curve(z, fixed=fixed, closed=closed)
            f2 = np.zeros(len(z), dtype=bool)
            f2[0::2] = fixed
            fixed = f2
        lim = z.copy()
        lim[1:-1] = limit_position_curve(z[:-2], z[1:-1], z[2:])
        lim[fixed] = z[fixed]
        step = 2 ** levels
        for seg in range(len(verts) - 1):
            for j in (1, 37, 128, 200, 255):
                got = ev.map_onto_limit_curve(cid, seg, j / step)
                np.testing.assert_allclose(got, lim[seg * step + j], atol=1e-13)
                # straight boundary: limit stays on the segment line
                a, b = mesh.vertices[verts[seg]], mesh.vertices[verts[seg + 1]]
                d = np.cross(b - a, got - a)
                assert np.linalg.norm(d) < 1e-13


def test_planar_limit_is_flat(flat_grid):
    mesh, model = flat_grid
    ev = LimitEvaluator(mesh, model)
    rng = np.random.default_rng(5)
    roles = vertex_roles(mesh, model)
    for t in range(mesh.n_triangles):
        xi = rng.dirichlet(np.ones(3), size=4)
        xi = np.vstack([xi, [1 / 3, 1 / 3, 1 / 3]])
        expected = xi @ mesh.vertices[mesh.triangles[t]]
        np.testing.assert_allclose(ev.map_onto_limit(t, xi), expected, atol=1e-13)
    assert (roles == Role.CURVE).any()


def test_regular_triangle_needs_no_subdivision(regular_torus):
    s, model = regular_torus
    ev = LimitEvaluator(s, model)
    info = EvalInfo()
    ev.map_onto_limit(0, np.random.default_rng(6).dirichlet(np.ones(3), size=10), info)
    assert info.max_depth == 0


def test_two_irregular_corners_one_level(smooth_sphere):
    s, model = smooth_sphere
    ev = LimitEvaluator(s, model)
    found = 0
    for t, tri in enumerate(s.triangles.tolist()):
        irregular = [not classify_vertex(s, model, v).regular for v in tri]
        if sum(irregular) != 2:
            continue
        info = EvalInfo()
        ev.map_onto_limit(t, np.full(3, 1 / 3), info)
        # the central child has edge-point corners, all of valence 6
        assert info.max_depth == 1
        found += 1
        if found == 5:
            break
    assert found


def test_watertight_across_edges(featured_sphere_evaluator):
    ev = featured_sphere_evaluator
    s = ev.surface
    for e, (a, b) in enumerate(s.edges.tolist()):
        t0, t1 = s.edge_triangles[e]
        for t in (0.1, 0.5, 0.77):
            pts = []
            for tri in (t0, t1):
                row = s.triangles[tri].tolist()
                xi = np.zeros(3)
                xi[row.index(a)], xi[row.index(b)] = 1 - t, t
                pts.append(ev.map_onto_limit(tri, xi))
            assert np.abs(pts[0] - pts[1]).max() <= 1e-12


def test_vertex_limit_interpolates_input(featured_sphere_evaluator):
    ev = featured_sphere_evaluator
    s = ev.surface
    for v in range(s.n_vertices):
        t = int(s.ring_triangles[v][0])
        xi = (s.triangles[t] == v).astype(float)
        assert np.abs(ev.map_onto_limit(t, xi) - s.vertices[v]).max() <= 1e-10


@pytest.mark.parametrize("levels", [1, 2])
def test_dyadic_oracle_small(seamed_cylinder, cube, levels):
    for s, model in (seamed_cylinder, cube):
        control = compute_control_mesh(s, model)
        ev = LimitEvaluator(s, model, control)
        table = dyadic_oracle(control.mesh, model, levels)
        n = 2 ** levels
        for t in range(s.n_triangles):
            idx = dyadic_points(n)
            got = ev.map_onto_limit(t, np.array(idx, float) / n)
            want = np.array([table[(t, i)] for i in idx])
            assert np.abs(got - want).max() <= 1e-12


def test_depth_cap_flags_result(smooth_sphere):
    s, model = smooth_sphere
    ev = LimitEvaluator(s, model, max_depth=2)
    t = next(t for t, tri in enumerate(s.triangles.tolist()) if s.valence(tri[0]) != 6)
    info = EvalInfo()
    x = ev.map_onto_limit(t, [1 - 2e-3, 1e-3, 1e-3], info)
    assert info.capped == 1
    np.testing.assert_allclose(x, ev.vertex_limit(s.triangles[t, 0]))


def test_invalid_inputs(cube):
    s, model = cube
    ev = LimitEvaluator(s, model)
    with pytest.raises(ValueError):
        ev.map_onto_limit(0, [0.5, 0.6, 0.1])
    with pytest.raises(ValueError):
        ev.map_onto_limit(0, [0.5, 0.5])
    with pytest.raises(ValueError):
        ev.map_onto_limit_curve(1, 0, 0.0)
    sid = model.triangle_surface(s.n_triangles)
    with pytest.raises(ValueError):
        ev.map_onto_limit_surface(int(sid[0]) + 1, 0, [1 / 3, 1 / 3, 1 / 3])


def test_evaluator_reuses_control_and_cache(cube):
    s, model = cube
    control = compute_control_mesh(s, model)
    a = LimitEvaluator(s, model, control)
    b = LimitEvaluator(s, model, control, cache=False)
    xi = np.random.default_rng(7).dirichlet(np.ones(3), size=5)
    for t in range(0, s.n_triangles, 5):
        np.testing.assert_array_equal(a.map_onto_limit(t, xi), b.map_onto_limit(t, xi))
    a.clear_cache()
    assert a.control is control


def test_single_triangle_flat():
    mesh = SurfaceMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    model = FeatureModel(points={1: 0, 2: 1, 3: 2}, curves={1: [(0, 1)], 2: [(1, 2)], 3: [(2, 0)]},
                         surfaces={1: [0]})
    ev = LimitEvaluator(mesh, model)
    xi = np.array([[0.2, 0.3, 0.5], [0.0, 0.4, 0.6]])
    np.testing.assert_allclose(ev.map_onto_limit(0, xi), xi @ mesh.vertices, atol=1e-15)


def test_planar_grid_fixture_is_valid():
    mesh, model = planar_grid(3, 5)
    assert model.counts[0] == 4 and model.counts[1] == 4
