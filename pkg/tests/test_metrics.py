import csv
import json
import warnings

import numpy as np
import pytest

from limitmesh.interpolation import generate_ho_surface_mesh
from limitmesh.limit import LimitEvaluator
from limitmesh.mesh import FeatureModel, SurfaceMesh, classify_vertex, infer_features, trace_chains
from limitmesh.metrics import (
    best_approx_bounds,
    curve_average_angle,
    detect_smooth_candidates,
    distance_grid,
    edge_normal_angle,
    element_distance,
    lebesgue_constant,
    max_normal_angle,
    model_distance,
    normal_angles,
    point_tangent_angle,
    write_csv,
    write_json,
)
from limitmesh.shapes import icosphere, planar_grid


def wedge(angle_deg, n=3, m=2):
    """Two planar strips sharing the x axis with ``angle_deg`` between them.

    Returns the mesh, the feature model (two surfaces, the crease and the
    boundary curves) and the crease curve id.
    """
    phi = np.radians(angle_deg)
    d1 = np.array([0.0, 1.0, 0.0])
    d2 = np.array([0.0, np.cos(phi), np.sin(phi)])
    pts, index = [], {}
    for i in range(n + 1):
        for j in range(-m, m + 1):
            index[i, j] = len(pts)
            pts.append(i * np.array([1.0, 0, 0]) + (j * d1 if j >= 0 else -j * d2))
    tri, ids = [], []
    for i in range(n):
        for j in range(-m, m):
            a, b, c, d = index[i, j], index[i + 1, j], index[i + 1, j + 1], index[i, j + 1]
            tri += [(a, b, c), (a, c, d)]
            ids += [1 if j >= 0 else 2] * 2
    mesh = SurfaceMesh(pts, tri)
    # outer strip corners have valence 2, so they are pinned as feature points
    corners = [index[i, j] for i in (0, n) for j in (-m, m)]
    model = with_points(infer_features(mesh, ids), corners)
    crease = {tuple(sorted((index[i, 0], index[i + 1, 0]))) for i in range(n)}
    cid = next(c for c, e in model.curves.items() if e == crease)
    return mesh, model, cid


def with_points(model, extra):
    """Copy of ``model`` with extra feature points and the curves split there."""
    points = sorted(set(model.points.values()) | set(extra))
    edges = [e for c in model.curves.values() for e in c]
    curves = {}
    for k, (path, closed) in enumerate(trace_chains(edges, points), start=1):
        curves[k] = list(zip(path[:-1], path[1:]))
    pids = {i + 1: v for i, v in enumerate(points)}
    return FeatureModel(points=pids, curves=curves, surfaces=model.surfaces)


def split_boundary_grid():
    """Planar grid with an extra feature point in the middle of one straight side."""
    mesh, model = planar_grid(4, 4)
    mid = 2 * 5  # vertex (2, 0)
    return mesh, with_points(model, [mid]), mid


# ----------------------------------------------------------------------
# distances


def test_planar_distance_is_zero(flat_grid):
    mesh, model = flat_grid
    ho = generate_ho_surface_mesh(mesh, model, 3, "warpblend")
    rep = model_distance(None, ho)
    assert rep.distance < 1e-14
    assert rep.length == pytest.approx(mesh.bounding_box_diagonal())
    assert rep.elements.shape == (mesh.n_triangles,)
    assert set(rep.surfaces) == set(model.surfaces)


def test_distance_at_own_nodes_is_zero(featured_sphere, featured_sphere_evaluator):
    s, model = featured_sphere
    ho = generate_ho_surface_mesh(s, model, 3, evaluator=featured_sphere_evaluator)
    for e in range(0, s.n_triangles, 17):
        assert element_distance(featured_sphere_evaluator, ho, e, ho.distribution.points) < 1e-14
    assert len(distance_grid(ho.distribution)) == 231 + 10


def test_regular_elements_are_exact_at_degree_four(featured_sphere, featured_sphere_evaluator):
    s, model = featured_sphere
    ev = featured_sphere_evaluator
    ho = generate_ho_surface_mesh(s, model, 4, evaluator=ev)
    rep = model_distance(ev, ho, length=1.0)
    regular = np.array([all(classify_vertex(s, model, v).regular and classify_vertex(s, model, v).role == 0
                            for v in tri) for tri in s.triangles.tolist()])
    assert regular.any() and (~regular).any()
    assert rep.elements[regular].max() <= 1e-12
    assert rep.elements[~regular].max() > 1e-6
    assert rep.distance == pytest.approx(rep.elements.max())


def test_model_distance_needs_evaluator(flat_grid):
    mesh, model = flat_grid
    ho = generate_ho_surface_mesh(mesh, model, 2)
    ho.evaluator = None
    with pytest.raises(ValueError):
        model_distance(None, ho)
    assert model_distance(LimitEvaluator(mesh, model), ho).distance < 1e-14


# ----------------------------------------------------------------------
# Lebesgue constants and bounds


def test_lebesgue_table_values():
    assert lebesgue_constant(1).value == pytest.approx(1.00, abs=1e-12)
    assert lebesgue_constant(5, kind="warpblend").value == pytest.approx(3.12, rel=0.02)
    assert lebesgue_constant(10).value == pytest.approx(70.89, rel=0.02)


def test_lebesgue_report_fields():
    rep = lebesgue_constant(3, resolution=60, kind="warpblend")
    assert (rep.degree, rep.kind, rep.resolution) == (3, "warpblend", 60)
    assert rep.value >= 1.0 and rep.cond > 1.0


def test_lebesgue_warns_for_high_equispaced_degree():
    with pytest.warns(UserWarning, match="condition"):
        lebesgue_constant(11, resolution=30)


def test_best_approx_bounds():
    lower, upper = best_approx_bounds(7.02e-4, 70.89)
    assert lower == pytest.approx(9.76e-6, rel=2e-3) and upper == 7.02e-4
    assert best_approx_bounds(0.3, 0.0) == (0.3, 0.3)
    assert best_approx_bounds(0.0, 5.0) == (0.0, 0.0)


# ----------------------------------------------------------------------
# angles


def test_coplanar_angle_is_zero(flat_grid):
    mesh, model = flat_grid
    ho = generate_ho_surface_mesh(mesh, model, 2)
    ang = normal_angles(ho)
    assert np.nanmax(ang) < 1e-6
    assert np.isnan(ang).sum() == sum(len(e) for e in model.curves.values())
    assert max_normal_angle(ho) < 1e-6


@pytest.mark.parametrize("dihedral,expected", [(90.0, 90.0), (120.0, 60.0), (150.0, 30.0)])
def test_wedge_angles(dihedral, expected):
    mesh, model, cid = wedge(dihedral)
    ho = generate_ho_surface_mesh(mesh, model, 3)
    assert curve_average_angle(ho, cid) == pytest.approx(expected, abs=1e-9)
    a, b = sorted(model.curves[cid])[1]
    assert edge_normal_angle(ho, (a, b)) == pytest.approx(expected, abs=1e-9)


def test_single_sided_edge_has_no_angle():
    mesh, model, _ = wedge(120.0)
    ho = generate_ho_surface_mesh(mesh, model, 2)
    a, b = mesh.edges[mesh.boundary_edges()[0]]
    with pytest.raises(ValueError):
        edge_normal_angle(ho, (int(a), int(b)))


def test_normal_angle_decreases_with_degree():
    s = icosphere(1)
    model = FeatureModel(surfaces={1: range(s.n_triangles)})
    ev = LimitEvaluator(s, model)
    ang = [max_normal_angle(generate_ho_surface_mesh(s, model, q, "warpblend", evaluator=ev))
           for q in (1, 2, 3)]
    assert ang[0] > ang[1] > ang[2]


def test_point_tangent_angles():
    mesh, model, mid = split_boundary_grid()
    ho = generate_ho_surface_mesh(mesh, model, 2)
    pid = next(p for p, v in model.points.items() if v == mid)
    assert point_tangent_angle(ho, pid) == pytest.approx(0.0, abs=1e-6)
    # the grid is a sheared lattice: corners have 60 and 120 degree interior angles,
    # and the reported angle is the turn between the tangents
    turns = {model.points[p]: point_tangent_angle(ho, p) for p in model.points}
    assert turns[0] == pytest.approx(120.0, abs=1e-9)
    assert turns[4] == pytest.approx(60.0, abs=1e-9)


# ----------------------------------------------------------------------
# detection


def test_cube_has_no_suggestions(cube):
    s, model = cube
    ho = generate_ho_surface_mesh(s, model, 3)
    assert detect_smooth_candidates(ho, delta=17) == []
    listed = detect_smooth_candidates(ho, delta=17, include_all=True)
    curves = [c for c in listed if c.kind == "curve"]
    assert len(curves) == 12
    assert all(c.angle == pytest.approx(90.0, abs=1e-9) for c in curves)
    assert all(p.n_curves == 3 and not p.suggested for p in listed if p.kind == "point")


def test_seam_suggested_rims_not(seamed_cylinder):
    s, model = seamed_cylinder
    ho = generate_ho_surface_mesh(s, model, 4)
    out = detect_smooth_candidates(ho, delta=17, include_all=True)
    sid = model.triangle_surface(s.n_triangles)
    seams = set()
    for cid, edges in model.curves.items():
        touching = {int(sid[t]) for a, b in edges for t in s.edge_triangles[s.edge_id(a, b)]}
        if touching == {3, 4}:
            seams.add(cid)
    assert len(seams) == 2
    for sug in out:
        if sug.kind == "curve":
            assert sug.suggested == (sug.feature_id in seams)
            if sug.feature_id not in seams:
                assert sug.angle == pytest.approx(90.0, abs=1e-6)


def test_collinear_point_suggested():
    mesh, model, mid = split_boundary_grid()
    ho = generate_ho_surface_mesh(mesh, model, 2)
    out = detect_smooth_candidates(ho, kinds=("point",))
    assert [s.feature_id for s in out] == [p for p, v in model.points.items() if v == mid]
    assert out[0].n_curves == 2 and out[0].angle < 1e-6


def test_isolated_point_always_suggested():
    s = icosphere(1)
    model = FeatureModel(points={5: 0}, surfaces={1: range(s.n_triangles)})
    ho = generate_ho_surface_mesh(s, model, 2)
    (sug,) = detect_smooth_candidates(ho)
    assert (sug.feature_id, sug.kind, sug.angle, sug.n_curves, sug.suggested) == (5, "point", None, 0, True)


def test_delta_range(cube):
    s, model = cube
    ho = generate_ho_surface_mesh(s, model, 2)
    for bad in (0.0, 180.0, -3.0):
        with pytest.raises(ValueError):
            detect_smooth_candidates(ho, delta=bad)


def test_report_writers(tmp_path, seamed_cylinder):
    s, model = seamed_cylinder
    ho = generate_ho_surface_mesh(s, model, 2)
    sug = detect_smooth_candidates(ho, include_all=True)
    write_json({"suggestions": sug, "x": np.float64(1.5), "nan": float("nan")}, tmp_path / "a.json")
    data = json.loads((tmp_path / "a.json").read_text())
    assert data["x"] == 1.5 and data["nan"] is None
    assert {d["kind"] for d in data["suggestions"]} == {"curve", "point"}
    write_csv([{"a": 1, "b": 2.5}, {"a": 2, "b": None}], tmp_path / "b.csv")
    rows = list(csv.DictReader(open(tmp_path / "b.csv")))
    assert rows[0] == {"a": "1", "b": "2.5"}


def test_degenerate_normals_warn():
    mesh, model, cid = wedge(120.0)
    ho = generate_ho_surface_mesh(mesh, model, 2)
    ho.nodes[:] = 0.0
    a, b = sorted(model.curves[cid])[0]
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        val = edge_normal_angle(ho, (a, b))
    assert np.isnan(val) and rec
