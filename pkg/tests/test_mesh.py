import numpy as np
import pytest

from poromix.mesh import BoundaryPartition, Mesh, build_structured_mesh, read_mesh, write_mesh


def test_counts_n1():
    m = build_structured_mesh(1)
    assert m.num_cells == 2
    assert m.num_vertices == 4
    assert m.num_edges == 5


def test_counts_n4_euler():
    m = build_structured_mesh(4)
    assert (m.num_vertices, m.num_edges, m.num_cells) == (25, 56, 32)
    assert m.num_vertices - m.num_edges + m.num_cells == 1


def test_counts_n64():
    assert build_structured_mesh(64).num_cells == 8192


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_count_formulas(n):
    m = build_structured_mesh(n)
    assert m.num_cells == 2 * n**2
    assert m.num_vertices == (n + 1) ** 2
    assert m.num_edges == 3 * n**2 + 2 * n


def test_rejects_n0():
    with pytest.raises(ValueError):
        build_structured_mesh(0)


@pytest.mark.parametrize("n", [1, 3, 7])
@pytest.mark.parametrize("diag", ["right", "left"])
def test_areas_and_orientation(n, diag):
    m = build_structured_mesh(n, diag=diag)
    assert np.all(m.cell_areas > 0)
    assert abs(m.cell_areas.sum() - 1.0) < 1e-14


def test_interior_edge_signs_cancel():
    m = build_structured_mesh(4)
    sign_sum = np.zeros(m.num_edges)
    np.add.at(sign_sum, m.cell_edges.ravel(), m.cell_edge_signs.ravel())
    interior = ~m.edge_is_boundary
    assert np.all(sign_sum[interior] == 0)
    # boundary edges are seen once, so their sign sum is +-1
    assert np.all(np.abs(sign_sum[~interior]) == 1)


def test_boundary_iff_one_incident_cell():
    m = build_structured_mesh(3)
    counts = np.bincount(m.cell_edges.ravel(), minlength=m.num_edges)
    assert np.array_equal(np.nonzero(counts == 1)[0], m.boundary_edges)
    assert np.all(counts[counts != 1] == 2)


def test_boundary_side_labels():
    m = build_structured_mesh(4)
    v = m.vertices
    for side, coord, val in [("bottom", 1, 0.0), ("top", 1, 1.0),
                             ("left", 0, 0.0), ("right", 0, 1.0)]:
        edges = m.boundary_side[side]
        assert len(edges) == 4
        assert np.allclose(v[m.edges[edges]][:, :, coord], val)


def test_edge_normals_rotation_convention():
    # tangent (1,0) -> normal (0,-1); tangent (0,1) -> normal (1,0)
    m = build_structured_mesh(2)

    def edge_between(a, b):
        pa = np.where((m.vertices == a).all(axis=1))[0][0]
        pb = np.where((m.vertices == b).all(axis=1))[0][0]
        lo, hi = min(pa, pb), max(pa, pb)
        return np.where((m.edges == (lo, hi)).all(axis=1))[0][0]

    e = edge_between((0.0, 0.0), (0.5, 0.0))
    assert np.allclose(m.edge_normals()[e], (0.0, -1.0))
    e = edge_between((0.0, 0.0), (0.0, 0.5))
    assert np.allclose(m.edge_normals()[e], (1.0, 0.0))


def test_boundary_outward_signs():
    m = build_structured_mesh(3)
    normals = m.edge_normals()[m.boundary_edges] * m.boundary_outward[:, None]
    mids = m.edge_midpoints()[m.boundary_edges]
    # outward-corrected normals point away from the domain center
    assert np.all(np.einsum("ei,ei->e", normals, mids - 0.5) > 0)


def test_locate_points():
    for diag in ("right", "left"):
        m = build_structured_mesh(5, diag=diag)
        rng = np.random.default_rng(7)
        pts = rng.uniform(0.01, 0.99, size=(200, 2))
        cells = m.locate_points(pts[:, 0], pts[:, 1])
        verts = m.vertices[m.cells[cells]]
        d1 = verts[:, 1] - verts[:, 0]
        d2 = verts[:, 2] - verts[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        r = pts - verts[:, 0]
        l1 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
        l2 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
        assert np.all(l1 > -1e-12) and np.all(l2 > -1e-12)
        assert np.all(l1 + l2 < 1 + 1e-12)


def test_partition_resolution_and_invariants():
    m = build_structured_mesh(4)
    part = BoundaryPartition(m, gamma_t=("bottom", "left", "right"),
                             gamma_f=("bottom", "left", "right"))
    all_edges = set(m.boundary_edges.tolist())
    assert part.gamma_d | part.gamma_t == all_edges
    assert not part.gamma_d & part.gamma_t
    assert part.gamma_p | part.gamma_f == all_edges
    assert part.gamma_d == set(m.boundary_side["top"].tolist())
    with pytest.raises(ValueError):
        BoundaryPartition(m, gamma_t=[10**6])


def test_mesh_file_roundtrip(tmp_path):
    m = build_structured_mesh(3, diag="left")
    path = tmp_path / "mesh.txt"
    write_mesh(m, path)
    m2 = read_mesh(path)
    assert np.array_equal(m.cells, m2.cells)
    assert np.allclose(m.vertices, m2.vertices)
    assert np.array_equal(m.edges, m2.edges)


def test_read_mesh_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("3 99 1\n0 0\n1 0\n0 1\n0 1 2\n")
    with pytest.raises(ValueError):
        read_mesh(path)
    path.write_text("4 5\n")
    with pytest.raises(ValueError):
        read_mesh(path)


def test_rejects_clockwise_cells():
    verts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    with pytest.raises(ValueError):
        Mesh(verts, [(0, 2, 1)])
