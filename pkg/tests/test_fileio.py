import xml.etree.ElementTree as ET

import numpy as np
import pytest

from limitmesh.fileio import (
    MAX_MSH_DEGREE,
    UnsupportedDegreeError,
    load_ho_mesh,
    load_linear_mesh,
    read_msh,
    sidecar_path,
    write_mesh,
    write_msh,
    write_vtu,
)
from limitmesh.interpolation import HighOrderMesh, build_ho_topology, generate_ho_surface_mesh
from limitmesh.mesh import FeatureModel, MeshError, SurfaceMesh
from limitmesh.nodes import make_distribution
from limitmesh.shapes import box_tets
from limitmesh.volume import generate_ho_volume_mesh


def sorted_rows(a):
    a = np.asarray(a)
    return a[np.lexsort(a.T[::-1])]


def same_elements(a, b):
    np.testing.assert_array_equal(sorted_rows(a), sorted_rows(b))


@pytest.mark.parametrize("version", ["2.2", "4.1"])
@pytest.mark.parametrize("q", [1, 3])
def test_surface_round_trip(tmp_path, seamed_cylinder, version, q):
    s, model = seamed_cylinder
    ho = generate_ho_surface_mesh(s, model, q, "warpblend")
    path = tmp_path / "cyl.msh"
    write_msh(ho, path, version)
    assert read_msh(path).version == version
    back = load_ho_mesh(path, kind="warpblend")
    np.testing.assert_array_equal(back.nodes, ho.nodes)
    same_elements(back.elements, ho.elements)
    assert back.degree == q
    # tags alone rebuild the same feature model
    assert back.model.counts == model.counts
    assert {frozenset(e) for e in back.model.curves.values()} == {frozenset(e) for e in model.curves.values()}
    assert set(back.model.points.values()) == set(model.points.values())


@pytest.mark.parametrize("version", ["2.2", "4.1"])
def test_volume_round_trip(tmp_path, version):
    mesh, model = box_tets(2, 2, 1)
    ho = generate_ho_volume_mesh(mesh, model, 2)
    path = tmp_path / "box.msh"
    write_msh(ho, path, version)
    back = load_ho_mesh(path)
    np.testing.assert_array_equal(back.nodes, ho.nodes)
    np.testing.assert_array_equal(back.elements, ho.elements)
    lin, lmodel = load_linear_mesh(path)
    np.testing.assert_array_equal(lin.tets, mesh.tets)
    np.testing.assert_array_equal(lin.vertices, mesh.vertices)
    assert lmodel.counts == model.counts


def test_linear_mesh_with_sidecar(tmp_path, cube):
    s, model = cube
    path = tmp_path / "cube.msh"
    write_mesh(s, path, model=model, sidecar=True)
    assert sidecar_path(path) == str(tmp_path / "cube.features.json")
    mesh, back = load_linear_mesh(path)
    same_elements(mesh.triangles, s.triangles)
    assert back == model
    with pytest.raises(FileNotFoundError):
        load_linear_mesh(path, features=str(tmp_path / "missing.json"))


def test_untagged_surface_is_one_surface(tmp_path):
    s = SurfaceMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])
    path = tmp_path / "tet.msh"
    write_msh(s, path, "2.2")
    _, model = load_linear_mesh(path)
    assert model.counts == (0, 0, 1)


def test_degree_limit(tmp_path):
    tri = SurfaceMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    model = FeatureModel(points={1: 0, 2: 1, 3: 2}, curves={1: [(0, 1)], 2: [(1, 2)], 3: [(2, 0)]},
                         surfaces={1: [0]})
    for q, ok in ((MAX_MSH_DEGREE, True), (MAX_MSH_DEGREE + 1, False)):
        dist = make_distribution(q)
        topo = build_ho_topology(tri, q, dist)
        nodes = np.empty((topo.n_nodes, 3))
        nodes[topo.elements[0]] = dist.points @ tri.vertices
        ho = HighOrderMesh(q, nodes, topo.elements, dist, model, tri)
        if ok:
            write_msh(ho, tmp_path / "a.msh")
            back = load_ho_mesh(tmp_path / "a.msh")
            np.testing.assert_array_equal(back.nodes, ho.nodes)
        else:
            with pytest.raises(UnsupportedDegreeError):
                write_msh(ho, tmp_path / "b.msh")


def test_bad_files(tmp_path):
    p = tmp_path / "bad.msh"
    p.write_text("$MeshFormat\n4.1 1 8\n$EndMeshFormat\n")
    with pytest.raises(MeshError):
        read_msh(p)
    p.write_text("$MeshFormat\n4.1 0 8\n")
    with pytest.raises(MeshError):
        read_msh(p)
    p.write_text("hello\n")
    with pytest.raises(MeshError):
        read_msh(p)
    with pytest.raises(ValueError):
        write_mesh(SurfaceMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]]), tmp_path / "x.obj")


@pytest.mark.parametrize("q", [1, 2, 4])
def test_vtu_surface_and_volume(tmp_path, cube, q):
    s, model = cube
    ho = generate_ho_surface_mesh(s, model, q)
    path = tmp_path / "s.vtu"
    write_vtu(ho, path, {"cell": np.arange(ho.n_elements), "node": np.zeros(ho.n_nodes)})
    piece = ET.parse(path).getroot().find("UnstructuredGrid/Piece")
    assert int(piece.get("NumberOfPoints")) == ho.n_nodes
    assert int(piece.get("NumberOfCells")) == ho.n_elements
    names = {a.get("Name") for a in piece.iter("DataArray")}
    assert {"Points", "connectivity", "offsets", "types", "cell", "node"} <= names
    pts = np.array(piece.find("Points/DataArray").text.split(), float).reshape(-1, 3)
    np.testing.assert_array_equal(pts, ho.nodes)

    mesh, vmodel = box_tets(1, 1, 1)
    vho = generate_ho_volume_mesh(mesh, vmodel, q)
    write_vtu(vho, tmp_path / "v.vtu", {"quality": np.ones(vho.n_elements)})
    piece = ET.parse(tmp_path / "v.vtu").getroot().find("UnstructuredGrid/Piece")
    cells = int(piece.get("NumberOfCells"))
    assert cells == (q**3 if q > 2 else 1) * vho.n_elements
    vals = next(a for a in piece.iter("DataArray") if a.get("Name") == "quality").text.split()
    assert len(vals) == cells
    with pytest.raises(ValueError):
        write_vtu(vho, tmp_path / "w.vtu", {"bad": np.ones(3)})
