import numpy as np
import pytest

from flowlab.mesh import (
    Mesh2D, MeshError, ScalarField, build_annulus_mesh, build_disk_mesh,
    build_disk_in_square_mesh, build_structured_mesh, boundary_length,
    default_rule, element_geometry, integrate, locate_points,
    read_mesh_text, sample_nodal, shape_functions, write_mesh_text, write_vtk,
)


def test_structured_quad_counts_and_area():
    mesh = build_structured_mesh(8, 5, (0.0, 2.0, -1.0, 1.0), kind="quad")
    assert mesh.nnodes == 9 * 6
    assert mesh.nelems == 8 * 5
    assert mesh.kind == "quad"
    np.testing.assert_allclose(mesh.areas().sum(), 4.0, rtol=1e-14)
    assert mesh.structured == (8, 5, 0.0, -1.0, 0.25, 0.4)


def test_structured_tri_counts_and_area():
    mesh = build_structured_mesh(8, 5, (0.0, 2.0, -1.0, 1.0), kind="tri")
    assert mesh.nelems == 2 * 8 * 5
    np.testing.assert_allclose(mesh.areas().sum(), 4.0, rtol=1e-14)
    assert (mesh.areas() > 0).all()


def test_structured_boundary_tags():
    mesh = build_structured_mesh(4, 3, (0.0, 1.0, 0.0, 1.0), kind="tri")
    for tag, n_edges in (("left", 3), ("right", 3), ("bottom", 4), ("top", 4)):
        assert mesh.boundary_edges[tag].shape == (n_edges, 2)
    left = mesh.boundary_nodes("left")
    assert np.allclose(mesh.nodes[left, 0], 0.0)
    np.testing.assert_allclose(boundary_length(mesh, "bottom"), 1.0)


def test_inverted_element_rejected():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(MeshError):
        Mesh2D(nodes, np.array([[0, 2, 1]]))  # clockwise
    m = Mesh2D(nodes, np.array([[0, 2, 1]]), check=False)
    assert m.areas()[0] < 0


def test_disk_mesh_boundary_on_circle():
    mesh = build_disk_mesh(32, 6, 1.5, center=(0.3, -0.2))
    rim = mesh.boundary_nodes("rim")
    r = np.hypot(mesh.nodes[rim, 0] - 0.3, mesh.nodes[rim, 1] + 0.2)
    np.testing.assert_allclose(r, 1.5, atol=1e-13)
    # inscribed 32-gon area, not pi r^2
    poly_area = 0.5 * 32 * 1.5**2 * np.sin(2 * np.pi / 32)
    np.testing.assert_allclose(mesh.areas().sum(), poly_area, rtol=1e-12)


def test_annulus_mesh_tags_and_grading():
    mesh = build_annulus_mesh(24, 8, 0.5, 2.0, grading=1.5)
    inner = mesh.boundary_nodes("inner")
    outer = mesh.boundary_nodes("outer")
    np.testing.assert_allclose(np.hypot(*mesh.nodes[inner].T), 0.5, atol=1e-13)
    np.testing.assert_allclose(np.hypot(*mesh.nodes[outer].T), 2.0, atol=1e-13)
    radii = np.unique(np.round(np.hypot(*mesh.nodes.T), 12))
    gaps = np.diff(radii)
    assert (gaps[1:] > gaps[:-1]).all()  # graded outward


def test_disk_in_square_ring_is_conforming():
    mesh, ring = build_disk_in_square_mesh(32, 3, 5, 0.5, half_width=1.0)
    assert ring.size == 32
    np.testing.assert_allclose(np.hypot(*mesh.nodes[ring].T), 0.5, atol=1e-13)
    assert (mesh.areas() > 0).all()
    np.testing.assert_allclose(mesh.areas().sum(), 4.0, rtol=1e-12)


def test_shape_functions_partition_of_unity():
    rng = np.random.default_rng(7)
    for kind, pts in (("tri", rng.dirichlet((1, 1, 1), 50)[:, :2]),
                      ("quad", rng.uniform(-1, 1, (50, 2)))):
        N, dN = shape_functions(kind, pts)
        np.testing.assert_allclose(N.sum(axis=1), 1.0, atol=1e-14)
        np.testing.assert_allclose(dN.sum(axis=1), 0.0, atol=1e-14)


def test_element_geometry_linear_exact():
    mesh = build_structured_mesh(3, 3, (0.0, 1.0, 0.0, 1.0), kind="tri")
    rule = default_rule("tri")
    N, grads, detJ, xq = element_geometry(mesh, rule.points)
    # gradients of a linear nodal field are constant and exact
    f = 2.0 * mesh.nodes[:, 0] - 3.0 * mesh.nodes[:, 1]
    g = np.einsum("eqai,ea->eqi", grads, f[mesh.elements])
    np.testing.assert_allclose(g[..., 0], 2.0, atol=1e-13)
    np.testing.assert_allclose(g[..., 1], -3.0, atol=1e-13)
    np.testing.assert_allclose((detJ * rule.weights).sum(), 1.0, rtol=1e-14)


def test_integrate_variants_agree():
    mesh = build_structured_mesh(10, 10, (0.0, 1.0, 0.0, 1.0), kind="tri")
    f_node = mesh.nodes[:, 0]
    exact = 0.5
    np.testing.assert_allclose(integrate(mesh, f_node), exact, rtol=1e-13)
    np.testing.assert_allclose(
        integrate(mesh, ScalarField(mesh, f_node)), exact, rtol=1e-13)
    np.testing.assert_allclose(
        integrate(mesh, lambda x: x[..., 0]), exact, rtol=1e-13)
    cellwise = np.ones(mesh.nelems)
    np.testing.assert_allclose(integrate(mesh, cellwise), 1.0, rtol=1e-13)


def test_locate_and_sample_linear_field():
    mesh = build_structured_mesh(6, 6, (0.0, 1.0, 0.0, 1.0), kind="tri")
    rng = np.random.default_rng(11)
    pts = rng.uniform(0.02, 0.98, (40, 2))
    f = 1.0 + 4.0 * mesh.nodes[:, 0] - 2.5 * mesh.nodes[:, 1]
    vals = sample_nodal(mesh, f, pts)
    np.testing.assert_allclose(vals, 1.0 + 4.0 * pts[:, 0] - 2.5 * pts[:, 1],
                               atol=1e-12)
    elems, ref = locate_points(mesh, pts)
    assert (elems >= 0).all()
    assert (ref >= -1e-12).all() and (ref.sum(axis=1) <= 1 + 1e-12).all()


def test_mesh_text_roundtrip(tmp_path):
    mesh = build_disk_mesh(16, 4, 1.0)
    path = tmp_path / "disk.txt"
    write_mesh_text(path, mesh)
    back = read_mesh_text(path)
    np.testing.assert_allclose(back.nodes, mesh.nodes)
    np.testing.assert_array_equal(back.elements, mesh.elements)
    assert set(back.boundary_edges) == set(mesh.boundary_edges)


def test_vtk_output_is_legacy_ascii(tmp_path):
    mesh = build_structured_mesh(3, 2, kind="quad")
    path = tmp_path / "mesh.vtk"
    write_vtk(path, mesh, point_data={"height": mesh.nodes[:, 1]})
    text = path.read_text()
    assert text.startswith("# vtk DataFile Version")
    assert "DATASET UNSTRUCTURED_GRID" in text
    assert "height" in text
