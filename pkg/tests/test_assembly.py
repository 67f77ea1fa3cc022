import numpy as np
import pytest
import scipy.sparse.linalg as spla

from poromix import assembly
from poromix.assembly import MaterialParams, apply_compliance
from poromix.cases import standard_case
from poromix.mesh import BoundaryPartition, build_structured_mesh
from poromix.quadrature import quadrature
from poromix.timestepping import build_spaces


@pytest.fixture(scope="module")
def setup():
    mesh = build_structured_mesh(2)
    spaces = build_spaces(mesh, 1)
    params = MaterialParams(mu=10.0, lam=10.0, s0=1.0)
    return mesh, spaces, params


def test_params_validation():
    with pytest.raises(ValueError):
        MaterialParams(mu=0.0)
    with pytest.raises(ValueError):
        MaterialParams(s0=-1.0)
    with pytest.raises(ValueError):
        MaterialParams(alpha=1.5)
    MaterialParams(alpha=0.0)  # degenerate coupling is allowed for testing


def test_compliance_zero():
    p = MaterialParams(mu=10.0, lam=10.0)
    assert np.allclose(apply_compliance(p, np.zeros((2, 2))), 0.0)


def test_compliance_identity():
    p = MaterialParams(mu=10.0, lam=10.0)
    out = apply_compliance(p, np.eye(2))
    assert np.allclose(out, np.eye(2) / 40.0)


def test_compliance_skew_extension():
    p = MaterialParams(mu=10.0, lam=10.0)
    S = np.array([[0.0, 1.0], [-1.0, 0.0]])
    out = apply_compliance(p, S)
    assert np.allclose(out, S / 20.0)
    # (A S, S) over the unit square: Frobenius product times area 1
    assert abs(np.sum(out * S) - 0.1) < 1e-14


def test_mpp_is_cell_areas_when_decoupled(setup):
    mesh, spaces, _ = setup
    params = MaterialParams(mu=10.0, lam=10.0, s0=1.0, alpha=0.0)
    M = assembly.assemble_block("M_PP", spaces, params)
    dense = M.toarray()
    assert np.allclose(dense, np.diag(mesh.cell_areas))


def test_bsu_annihilates_constant_identity(setup):
    mesh, spaces, params = setup
    stress = spaces["stress"]
    c = stress.interpolate(lambda x, y: np.eye(2) * np.ones(np.shape(x) + (2, 2))).values
    B = assembly.assemble_block("B_SU", spaces, params)
    assert np.abs(B.T @ c).max() < 1e-12


def test_ass_quadratic_form_identity(setup):
    mesh, spaces, params = setup
    stress = spaces["stress"]
    c = stress.interpolate(lambda x, y: np.eye(2) * np.ones(np.shape(x) + (2, 2))).values
    A = assembly.assemble_block("A_SS", spaces, params)
    assert abs(c @ (A @ c) - 0.05) < 1e-13


def test_zero_body_force_load(setup):
    mesh, spaces, params = setup
    f = lambda t, x, y: np.zeros(np.shape(x) + (2,))
    g = lambda t, x, y: np.ones_like(x)
    rhs_v, rhs_q = assembly.assemble_loads(f, g, 0.5, params, spaces)
    assert np.abs(rhs_v).max() == 0.0
    assert np.allclose(rhs_q, mesh.cell_areas)


def composite_quadrature_load(space, fn, splits=2):
    """Independent oracle: degree-6 rule on each cell split into congruent
    children."""
    mesh = space.mesh
    rule = quadrature(6)
    verts = mesh.vertices[mesh.cells]
    out = np.zeros(space.ndof)
    # children vertex triples from barycentric corner weights
    for corners in _subtriangles(splits):
        child_verts = np.einsum("kb,tbi->tki", corners, verts)
        pts = rule.physical_points(child_verts)
        d1 = child_verts[:, 1] - child_verts[:, 0]
        d2 = child_verts[:, 2] - child_verts[:, 0]
        area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        wdet = rule.weights[None, :] * 2 * area[:, None]
        vals = np.asarray(fn(pts[..., 0], pts[..., 1]))
        bv = space.basis.values(pts) if space.kind != "DG0" else None
        if space.kind == "DG0":
            loc = np.einsum("tqc,tq->tc", vals, wdet)
        else:
            loc = np.einsum("tiqa,tqa,tq->ti", bv, vals, wdet)
        np.add.at(out, space.cell_dofs.ravel(), loc.ravel())
    return out


def _subtriangles(splits):
    # uniform 4-way split in barycentric coordinates, applied recursively
    tris = [np.eye(3)]
    for _ in range(splits):
        new = []
        for T in tris:
            a, b, c = T
            ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
            new += [np.array(x) for x in ((a, ab, ca), (ab, b, bc),
                                          (ca, bc, c), (ab, bc, ca))]
        tris = new
    return tris


def test_manufactured_load_against_composite_oracle():
    mesh = build_structured_mesh(4)
    spaces = build_spaces(mesh, 1)
    params = MaterialParams(mu=10.0, lam=10.0, s0=1.0)
    case = standard_case()
    rhs_v, _ = assembly.assemble_loads(case.f, case.g, 1.0, params, spaces)
    oracle = composite_quadrature_load(
        spaces["displacement"], lambda x, y: case.f(1.0, x, y), splits=2
    )
    rel = np.abs(-rhs_v - oracle).max() / np.abs(oracle).max()
    assert rel < 1e-8


def test_boundary_zero_displacement(setup):
    mesh, spaces, params = setup
    part = BoundaryPartition(mesh)
    r = assembly.boundary_stress_load(
        spaces["stress"], part.sorted("gamma_d"),
        lambda x, y: np.zeros(np.shape(x) + (2,)),
    )
    assert np.abs(r).max() == 0.0


def test_boundary_unit_pressure_rt_lo(setup):
    mesh, spaces, params = setup
    part = BoundaryPartition(mesh)
    r = assembly.boundary_flux_load(
        spaces["flux"], part.sorted("gamma_p"), lambda x, y: np.ones_like(x)
    )
    flux = spaces["flux"]
    bdofs = flux.edge_dofs(mesh.boundary_edges)
    # outward unit-pressure moments are the dof orientation signs
    assert np.allclose(np.abs(r[bdofs]), 1.0)
    signs = {e: s for e, s in zip(mesh.boundary_edges, mesh.boundary_outward)}
    for e in mesh.boundary_edges:
        assert abs(r[flux.edge_dofs([e])[0]] - signs[e]) < 1e-13
    interior = np.setdiff1d(np.arange(flux.ndof), bdofs)
    assert np.abs(r[interior]).max() < 1e-12


def test_boundary_constant_displacement_interior_dofs_vanish(setup):
    mesh, spaces, params = setup
    part = BoundaryPartition(mesh)
    r = assembly.boundary_stress_load(
        spaces["stress"], part.sorted("gamma_d"),
        lambda x, y: np.stack([np.ones_like(x), np.zeros_like(x)], axis=-1),
    )
    stress = spaces["stress"]
    bdofs = stress.edge_dofs(mesh.boundary_edges)
    interior = np.setdiff1d(np.arange(stress.ndof), bdofs)
    assert np.abs(r[interior]).max() < 1e-12
    assert np.abs(r[bdofs]).max() > 0.1


@pytest.mark.parametrize("element", [1, 2])
def test_transpose_pairings(element):
    mesh = build_structured_mesh(2)
    spaces = build_spaces(mesh, element)
    params = MaterialParams(mu=10.0, lam=10.0, s0=1.0)
    blocks = assembly.assemble_system(spaces, params)
    assert abs(blocks.T_PS - blocks.A_SP.T).max() < 1e-14
    assert abs(blocks.D_ZQ - blocks.B_ZP.T).max() < 1e-14


def test_ass_positive_definite_submatrix(setup):
    mesh, spaces, params = setup
    A = assembly.assemble_block("A_SS", spaces, params).toarray()
    rng = np.random.default_rng(0)
    idx = rng.choice(A.shape[0], size=50, replace=False)
    sub = A[np.ix_(idx, idx)]
    assert np.linalg.eigvalsh(sub).min() > 0


def test_bsu_against_dense_oracle():
    # 2-cell mesh, manual quadrature of (u, div tau)
    mesh = build_structured_mesh(1)
    spaces = build_spaces(mesh, 1)
    params = MaterialParams()
    B = assembly.assemble_block("B_SU", spaces, params).toarray()
    stress, disp = spaces["stress"], spaces["displacement"]
    rule = quadrature(3)
    pts = rule.physical_points(mesh.vertices[mesh.cells])
    wdet = rule.weights[None, :] * 2 * mesh.cell_areas[:, None]
    div = stress.row.basis.divergences(pts)
    dense = np.zeros_like(B)
    for t in range(mesh.num_cells):
        for r in range(2):
            for i in range(6):
                gi = stress.row.cell_dofs[t, i] + r * stress.row.ndof
                for c in range(2):
                    if r != c:
                        continue
                    gj = disp.cell_dofs[t, c]
                    dense[gi, gj] += np.sum(div[t, i] * wdet[t])
    assert np.abs(B - dense).max() < 1e-12


def test_lambda_degeneracy_keeps_entries_finite(setup):
    mesh, spaces, _ = setup
    params = MaterialParams(mu=10.0, lam=1e10, s0=1.0)
    A = assembly.assemble_block("A_SS", spaces, params)
    assert np.all(np.isfinite(A.data))
    # the trace coefficient saturates at 1/2 instead of blowing up
    assert params.trace_coeff < 0.5


def test_essential_dofs_fixed_load_pattern():
    mesh = build_structured_mesh(4)
    spaces = build_spaces(mesh, 1)
    part = BoundaryPartition(mesh, gamma_t=("bottom", "left", "right"),
                             gamma_f=("bottom", "left", "right"))
    edges = part.sorted("gamma_t")
    assert len(edges) == 12
    dofs, vals = assembly.essential_stress_dofs(spaces["stress"], edges)
    assert len(dofs) == 12 * 2 * 2  # two moments x two rows per edge
    assert np.abs(vals).max() == 0.0
    fdofs, fvals = assembly.essential_flux_dofs(spaces["flux"], part.sorted("gamma_f"))
    assert len(fdofs) == 12
    assert np.abs(fvals).max() == 0.0


def test_essential_values_recover_traction_moments():
    mesh = build_structured_mesh(2)
    spaces = build_spaces(mesh, 1)
    stress = spaces["stress"]
    edges = mesh.boundary_side["top"]
    traction = lambda x, y: np.stack([x, 1 - x], axis=-1)
    dofs, vals = assembly.essential_stress_dofs(stress, edges, traction)
    # interpolate a matrix field whose traction on the top edge matches:
    # sigma = [[0, x], [0, 1 - x]] has sigma . (0,1) = (x, 1-x)
    mat = lambda x, y: np.stack(
        [np.stack([np.zeros_like(x), x], axis=-1),
         np.stack([np.zeros_like(x), 1 - x], axis=-1)], axis=-2)
    coeffs = stress.interpolate(mat).values
    assert np.abs(coeffs[dofs] - vals).max() < 1e-12


def test_apply_essential_bc_empty_partition_is_identity():
    from poromix.linsys import compose_monolithic

    mesh = build_structured_mesh(2)
    spaces = build_spaces(mesh, 1)
    params = MaterialParams(mu=10.0, lam=10.0, s0=1.0)
    blocks = assembly.assemble_system(spaces, params)
    sys = compose_monolithic(blocks, 0.1)
    before = sys.matrix.toarray()
    part = BoundaryPartition(mesh)  # gamma_t = gamma_f = empty
    sys, values = assembly.apply_essential_bc(sys, part, spaces)
    assert len(values) == 0
    assert np.array_equal(sys.matrix.toarray(), before)


def test_apply_essential_bc_constrains_and_solves():
    from poromix.linsys import compose_monolithic

    mesh = build_structured_mesh(2)
    spaces = build_spaces(mesh, 1)
    params = MaterialParams(mu=10.0, lam=10.0, s0=1.0)
    blocks = assembly.assemble_system(spaces, params)
    sys = compose_monolithic(blocks, 0.1)
    part = BoundaryPartition(mesh, gamma_t=("bottom", "left", "right"),
                             gamma_f=("bottom", "left", "right"))
    traction = lambda x, y: np.stack([y, x + 1], axis=-1)
    sys, values = assembly.apply_essential_bc(sys, part, spaces,
                                              sigma_n=traction)
    rng = np.random.default_rng(3)
    rhs = sys.correct_rhs(rng.normal(size=sys.ndof), values)
    x = sys.solve(rhs)
    assert np.abs(x[sys.constrained] - values).max() < 1e-12
    # flux dofs on the constrained edges are exactly zero
    zslice = sys.slice_of("z")
    zvals = x[zslice][spaces["flux"].edge_dofs(part.sorted("gamma_f"))]
    assert np.abs(zvals).max() < 1e-14


def test_mesh_mismatch_rejected():
    m1 = build_structured_mesh(1)
    m2 = build_structured_mesh(2)
    s1 = build_spaces(m1, 1)
    s2 = build_spaces(m2, 1)
    mixed = dict(s1, pressure=s2["pressure"])
    with pytest.raises(ValueError):
        assembly.assemble_block("M_PP", mixed, MaterialParams())


def test_unknown_block_rejected(setup):
    _, spaces, params = setup
    with pytest.raises(ValueError):
        assembly.assemble_block("Q_XX", spaces, params)
