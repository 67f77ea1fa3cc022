"""Bilinear-form blocks and load/boundary vectors of the five-field system.

Block names follow the unknown ordering (sigma, u, gamma, z, p):

  A_SS  (A sigma, tau)           M_Z   (kappa^-1 z, w)
  B_SU  (u, div tau)             B_ZP  (p, div w)
  B_SG  (gamma, tau)             D_ZQ  (div z, q)
  A_SP  alpha (A(p I), tau)      M_PP  (s0 p, q) + alpha^2 (A(p I), q I)
  T_PS  alpha (A sigma, q I)

The compliance A inverts the isotropic stiffness on symmetric matrices and
acts as 1/(2 mu) times the identity on skew matrices, which combines into
A tau = (tau - lam/(2 mu + 2 lam) tr(tau) I) / (2 mu) for every 2x2 tau.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .quadrature import edge_rule, quadrature

BLOCK_DEGREE = 4
LOAD_DEGREE = 6


@dataclass
class MaterialParams:
    """Isotropic, homogeneous material data."""

    mu: float = 10.0
    lam: float = 10.0
    s0: float = 1.0
    kappa: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.mu <= 0 or self.kappa <= 0 or self.lam <= 0:
            raise ValueError("mu, lam, kappa must be positive")
        if self.s0 < 0:
            raise ValueError("s0 must be nonnegative")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must be in [0, 1]")

    @property
    def compliance_identity(self):
        """A applied to the identity matrix is this multiple of the identity."""
        return 1.0 / (2.0 * self.mu + 2.0 * self.lam)

    @property
    def trace_coeff(self):
        return self.lam / (2.0 * self.mu + 2.0 * self.lam)


def apply_compliance(params, tau):
    """A tau for 2x2 matrix values tau of shape (..., 2, 2)."""
    tau = np.asarray(tau, dtype=float)
    tr = tau[..., 0, 0] + tau[..., 1, 1]
    out = tau - params.trace_coeff * tr[..., None, None] * np.eye(2)
    return out / (2.0 * params.mu)


@dataclass
class BlockSystem:
    """Assembled sparse blocks of the variational system."""

    A_SS: sp.csr_matrix
    B_SU: sp.csr_matrix
    B_SG: sp.csr_matrix
    A_SP: sp.csr_matrix
    M_Z: sp.csr_matrix
    B_ZP: sp.csr_matrix
    D_ZQ: sp.csr_matrix
    M_PP: sp.csr_matrix
    T_PS: sp.csr_matrix


def _check_same_mesh(spaces):
    meshes = {id(s.mesh) for s in spaces.values()}
    if len(meshes) > 1:
        raise ValueError("spaces are not built on the same mesh")


def _wdet(mesh, rule):
    return rule.weights[None, :] * (2.0 * mesh.cell_areas[:, None])


def _scatter(local, row_dofs, col_dofs, shape):
    T, nI, nJ = local.shape
    rows = np.broadcast_to(row_dofs[:, :, None], (T, nI, nJ))
    cols = np.broadcast_to(col_dofs[:, None, :], (T, nI, nJ))
    return sp.coo_matrix(
        (local.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    ).tocsr()


def _stress_row_tab(stress, degree):
    return stress.row.tabulation(degree)


def assemble_block(kind, spaces, params=None, degree=BLOCK_DEGREE):
    """One sparse block by exact quadrature (default degree 4)."""
    _check_same_mesh(spaces)
    mesh = next(iter(spaces.values())).mesh
    rule = quadrature(degree)
    wdet = _wdet(mesh, rule)

    if kind in ("A_SS", "M_SS"):
        stress = spaces["stress"]
        tab = _stress_row_tab(stress, degree)
        val = tab["val"]  # (T, 6, Q, 2)
        T = mesh.num_cells
        nr = stress.row.nloc
        Mvv = np.einsum("tiqa,tjqa,tq->tij", val, val, wdet)
        local = np.zeros((T, 2 * nr, 2 * nr))
        if kind == "M_SS":
            local[:, :nr, :nr] = Mvv
            local[:, nr:, nr:] = Mvv
        else:
            c = params.trace_coeff
            for ra in range(2):
                for rb in range(2):
                    N = np.einsum(
                        "tiq,tjq,tq->tij", val[..., ra], val[..., rb], wdet
                    )
                    blk = (ra == rb) * Mvv - c * N
                    local[:, ra * nr : (ra + 1) * nr, rb * nr : (rb + 1) * nr] = blk
            local /= 2.0 * params.mu
        return _scatter(
            local, stress.cell_dofs, stress.cell_dofs, (stress.ndof, stress.ndof)
        )

    if kind == "B_SU":
        stress, disp = spaces["stress"], spaces["displacement"]
        tab = _stress_row_tab(stress, degree)
        divint = np.einsum("tiq,tq->ti", tab["div"], wdet)  # (T, 6)
        T = mesh.num_cells
        nr = stress.row.nloc
        local = np.zeros((T, 2 * nr, 2))
        local[:, :nr, 0] = divint
        local[:, nr:, 1] = divint
        return _scatter(
            local, stress.cell_dofs, disp.cell_dofs, (stress.ndof, disp.ndof)
        )

    if kind == "B_SG":
        stress, rot = spaces["stress"], spaces["rotation"]
        tab = _stress_row_tab(stress, degree)
        val = tab["val"]
        gval = rot.tabulation(degree)["val"]  # (nloc_g, Q)
        T = mesh.num_cells
        nr = stress.row.nloc
        # (gamma, tau) with gamma = g [[0, 1], [-1, 0]] is g (tau_01 - tau_10)
        top = np.einsum("tiq,gq,tq->tig", val[..., 1], gval, wdet)
        bot = -np.einsum("tiq,gq,tq->tig", val[..., 0], gval, wdet)
        local = np.concatenate([top, bot], axis=1)
        return _scatter(
            local, stress.cell_dofs, rot.cell_dofs, (stress.ndof, rot.ndof)
        )

    if kind == "A_SP":
        stress, pres = spaces["stress"], spaces["pressure"]
        tab = _stress_row_tab(stress, degree)
        val = tab["val"]
        pval = pres.tabulation(degree)["val"]
        coef = params.alpha * params.compliance_identity
        top = coef * np.einsum("tiq,pq,tq->tip", val[..., 0], pval, wdet)
        bot = coef * np.einsum("tiq,pq,tq->tip", val[..., 1], pval, wdet)
        local = np.concatenate([top, bot], axis=1)
        return _scatter(
            local, stress.cell_dofs, pres.cell_dofs, (stress.ndof, pres.ndof)
        )

    if kind == "T_PS":
        stress, pres = spaces["stress"], spaces["pressure"]
        tab = _stress_row_tab(stress, degree)
        val = tab["val"]
        pval = pres.tabulation(degree)["val"]
        coef = params.alpha * params.compliance_identity
        left = coef * np.einsum("pq,tjq,tq->tpj", pval, val[..., 0], wdet)
        right = coef * np.einsum("pq,tjq,tq->tpj", pval, val[..., 1], wdet)
        local = np.concatenate([left, right], axis=2)
        return _scatter(
            local, pres.cell_dofs, stress.cell_dofs, (pres.ndof, stress.ndof)
        )

    if kind == "M_Z":
        flux = spaces["flux"]
        tab = flux.tabulation(degree)
        local = np.einsum("tiqa,tjqa,tq->tij", tab["val"], tab["val"], wdet)
        local /= params.kappa
        return _scatter(local, flux.cell_dofs, flux.cell_dofs, (flux.ndof, flux.ndof))

    if kind == "B_ZP":
        flux, pres = spaces["flux"], spaces["pressure"]
        divw = flux.tabulation(degree)["div"]
        pval = pres.tabulation(degree)["val"]
        local = np.einsum("tiq,pq,tq->tip", divw, pval, wdet)
        return _scatter(local, flux.cell_dofs, pres.cell_dofs, (flux.ndof, pres.ndof))

    if kind == "D_ZQ":
        flux, pres = spaces["flux"], spaces["pressure"]
        divw = flux.tabulation(degree)["div"]
        pval = pres.tabulation(degree)["val"]
        local = np.einsum("pq,tjq,tq->tpj", pval, divw, wdet)
        return _scatter(local, pres.cell_dofs, flux.cell_dofs, (pres.ndof, flux.ndof))

    if kind == "M_PP":
        pres = spaces["pressure"]
        pval = pres.tabulation(degree)["val"]
        coef = params.s0 + 2.0 * params.alpha**2 * params.compliance_identity
        local = coef * np.einsum("pq,rq,tq->tpr", pval, pval, wdet)
        return _scatter(local, pres.cell_dofs, pres.cell_dofs, (pres.ndof, pres.ndof))

    raise ValueError(f"unknown block kind {kind!r}")


def assemble_system(spaces, params, degree=BLOCK_DEGREE):
    """All blocks of the variational form."""
    names = ("A_SS", "B_SU", "B_SG", "A_SP", "M_Z", "B_ZP", "D_ZQ", "M_PP", "T_PS")
    return BlockSystem(
        **{k: assemble_block(k, spaces, params, degree) for k in names}
    )


# ------------------------------------------------------------------- loads
def vector_load(space, fn, degree=LOAD_DEGREE):
    """(fn, v) for a vector-valued test space; fn(x, y) -> (..., 2)."""
    mesh = space.mesh
    rule = quadrature(degree)
    pts = rule.physical_points(mesh.vertices[mesh.cells])
    wdet = _wdet(mesh, rule)
    vals = np.asarray(fn(pts[..., 0], pts[..., 1]))
    out = np.zeros(space.ndof)
    if space.kind == "DG0":
        loc = np.einsum("tqc,tq->tc", vals, wdet)
    else:
        tab = space.tabulation(degree)
        loc = np.einsum("tiqa,tqa,tq->ti", tab["val"], vals, wdet)
    np.add.at(out, space.cell_dofs.ravel(), loc.ravel())
    return out


def scalar_load(space, fn, degree=LOAD_DEGREE):
    """(fn, q) for a scalar test space; fn(x, y) -> scalar array."""
    mesh = space.mesh
    rule = quadrature(degree)
    pts = rule.physical_points(mesh.vertices[mesh.cells])
    wdet = _wdet(mesh, rule)
    vals = np.asarray(fn(pts[..., 0], pts[..., 1])) * np.ones(wdet.shape)
    qval = space.tabulation(degree)["val"]
    loc = np.einsum("iq,tq,tq->ti", qval, vals, wdet)
    out = np.zeros(space.ndof)
    np.add.at(out, space.cell_dofs.ravel(), loc.ravel())
    return out


def stress_load(stress, mat_fn, degree=LOAD_DEGREE):
    """(mat, tau) against the stress space; mat_fn(x, y) -> (..., 2, 2)."""
    mesh = stress.mesh
    rule = quadrature(degree)
    pts = rule.physical_points(mesh.vertices[mesh.cells])
    wdet = _wdet(mesh, rule)
    mat = np.asarray(mat_fn(pts[..., 0], pts[..., 1]))
    val = stress.row.tabulation(degree)["val"]
    out = np.zeros(stress.ndof)
    loc = np.concatenate(
        [
            np.einsum("tiqa,tqa,tq->ti", val, mat[..., r, :], wdet)
            for r in range(2)
        ],
        axis=1,
    )
    np.add.at(out, stress.cell_dofs.ravel(), loc.ravel())
    return out


def skew_moment_load(rot, mat_fn, degree=LOAD_DEGREE):
    """(mat, eta) against the rotation space: integral of g (mat01 - mat10)."""
    mesh = rot.mesh
    rule = quadrature(degree)
    pts = rule.physical_points(mesh.vertices[mesh.cells])
    wdet = _wdet(mesh, rule)
    mat = np.asarray(mat_fn(pts[..., 0], pts[..., 1]))
    gval = rot.tabulation(degree)["val"]
    loc = np.einsum(
        "gq,tq,tq->tg", gval, mat[..., 0, 1] - mat[..., 1, 0], wdet
    )
    out = np.zeros(rot.ndof)
    np.add.at(out, rot.cell_dofs.ravel(), loc.ravel())
    return out


def assemble_loads(f, g, t, params, spaces, degree=LOAD_DEGREE):
    """Row-2 and row-4 load vectors: -(f, v) and (g, q) at time t."""
    rhs_v = -vector_load(spaces["displacement"], lambda x, y: f(t, x, y), degree)
    rhs_q = scalar_load(spaces["pressure"], lambda x, y: g(t, x, y), degree)
    return rhs_v, rhs_q


# --------------------------------------------------------------- boundary
def _boundary_geometry(mesh, edges):
    edges = np.asarray(sorted(edges), dtype=np.int64)
    pos = np.searchsorted(mesh.boundary_edges, edges)
    if np.any(mesh.boundary_edges[pos] != edges):
        raise ValueError("edge set contains non-boundary edges")
    cells = mesh.boundary_cell[pos]
    sign = mesh.boundary_outward[pos]
    return edges, cells, sign


def _edge_quad(mesh, edges, npts):
    s, w = edge_rule(npts)
    p = mesh.vertices[mesh.edges[edges, 0]]
    q = mesh.vertices[mesh.edges[edges, 1]]
    mid = 0.5 * (p + q)
    half = 0.5 * (q - p)
    pts = mid[:, None, :] + s[None, :, None] * half[:, None, :]
    jac = np.linalg.norm(half, axis=1)  # ds = |e|/2 dw
    return s, w, pts, jac


def boundary_stress_load(stress, edges, fn, npts=6):
    """<fn, tau n> over the given boundary edges, outward normal.

    fn(x, y) -> (..., 2) displacement data.
    """
    mesh = stress.mesh
    out = np.zeros(stress.ndof)
    if len(edges) == 0:
        return out
    edges, cells, sign = _boundary_geometry(mesh, edges)
    s, w, pts, jac = _edge_quad(mesh, edges, npts)
    n_out = mesh.edge_normals()[edges] * sign[:, None]
    vals = np.asarray(fn(pts[..., 0], pts[..., 1]))  # (B, Q, 2)
    bv = stress.row.basis.values(pts, cells=cells)  # (B, 6, Q, 2)
    vn = np.einsum("biqa,ba->biq", bv, n_out)
    # dof (r, i) gets integral of fn_r (v_i . n)
    loc = np.concatenate(
        [np.einsum("biq,bq,q,b->bi", vn, vals[..., r], w, jac) for r in range(2)],
        axis=1,
    )
    dofs = np.concatenate(
        [stress.row.cell_dofs[cells], stress.row.cell_dofs[cells] + stress.row.ndof],
        axis=1,
    )
    np.add.at(out, dofs.ravel(), loc.ravel())
    return out


def boundary_flux_load(flux, edges, fn, npts=6):
    """<fn, w . n> over the given boundary edges, outward normal.

    fn(x, y) -> scalar pressure data.
    """
    mesh = flux.mesh
    out = np.zeros(flux.ndof)
    if len(edges) == 0:
        return out
    edges, cells, sign = _boundary_geometry(mesh, edges)
    s, w, pts, jac = _edge_quad(mesh, edges, npts)
    n_out = mesh.edge_normals()[edges] * sign[:, None]
    vals = np.asarray(fn(pts[..., 0], pts[..., 1])) * np.ones(pts.shape[:2])
    bv = flux.basis.values(pts, cells=cells)
    vn = np.einsum("biqa,ba->biq", bv, n_out)
    loc = np.einsum("biq,bq,q,b->bi", vn, vals, w, jac)
    np.add.at(out, flux.cell_dofs[cells].ravel(), loc.ravel())
    return out


def assemble_boundary_terms(u0, p0, t, partition, spaces, npts=6):
    """Natural boundary vectors <u0(t), tau n> on Gamma_d and
    <p0(t), w . n> on Gamma_p."""
    r_sigma = boundary_stress_load(
        spaces["stress"], partition.sorted("gamma_d"), lambda x, y: u0(t, x, y), npts
    )
    r_flux = boundary_flux_load(
        spaces["flux"], partition.sorted("gamma_p"), lambda x, y: p0(t, x, y), npts
    )
    return r_sigma, r_flux


# --------------------------------------------------------- essential data
def apply_essential_bc(system, partition, spaces, sigma_n=None, z_n=None):
    """Constrain the stress dofs on the traction part and the flux dofs on
    the no-flow part of the composed system, symmetrically.

    sigma_n(x, y) -> (..., 2) and z_n(x, y) -> scalar are the prescribed
    traction and normal flux (None means homogeneous).  Returns the modified
    system and the constraint values, ordered like system.constrained, to be
    fed to system.correct_rhs.
    """
    dofs_s, vals_s = essential_stress_dofs(
        spaces["stress"], partition.sorted("gamma_t"), sigma_n
    )
    dofs_f, vals_f = essential_flux_dofs(
        spaces["flux"], partition.sorted("gamma_f"), z_n
    )
    z_off = system.offsets["z"]
    dofs = np.concatenate([dofs_s, z_off + dofs_f])
    values = np.concatenate([vals_s, vals_f])
    order = np.argsort(dofs)
    system.constrain(dofs[order])
    return system, values[order]


def essential_stress_dofs(stress, edges, traction_fn=None, npts=6):
    """Stress dofs on the given edges and their moment values.

    traction_fn(x, y) -> (..., 2) is sigma n with the outward normal; the
    stored moments are taken against the global edge normal, so values are
    sign-corrected.  None means homogeneous data.
    """
    mesh = stress.mesh
    edges = np.asarray(sorted(edges), dtype=np.int64)
    dofs = stress.edge_dofs(edges)
    if traction_fn is None or len(edges) == 0:
        return dofs, np.zeros(len(dofs))
    edges, cells, sign = _boundary_geometry(mesh, edges)
    s, w, pts, jac = _edge_quad(mesh, edges, npts)
    vals = np.asarray(traction_fn(pts[..., 0], pts[..., 1]))  # (B, Q, 2)
    m0 = np.einsum("bqr,q,b,b->br", vals, w, jac, sign.astype(float))
    m1 = np.einsum("bqr,q,q,b,b->br", vals, w, s, jac, sign.astype(float))
    per_edge = np.stack([m0, m1], axis=1)  # (B, moment, r)
    values = np.concatenate(
        [per_edge[:, :, 0].ravel(), per_edge[:, :, 1].ravel()]
    )
    return dofs, values


def essential_flux_dofs(flux, edges, normal_flux_fn=None, npts=6):
    """Flux dofs on the given edges and their moment values.

    normal_flux_fn(x, y) -> scalar is z . n with the outward normal.
    """
    mesh = flux.mesh
    edges = np.asarray(sorted(edges), dtype=np.int64)
    dofs = flux.edge_dofs(edges)
    if normal_flux_fn is None or len(edges) == 0:
        return dofs, np.zeros(len(dofs))
    edges, cells, sign = _boundary_geometry(mesh, edges)
    s, w, pts, jac = _edge_quad(mesh, edges, npts)
    vals = np.asarray(normal_flux_fn(pts[..., 0], pts[..., 1])) * np.ones(pts.shape[:2])
    m0 = np.einsum("bq,q,b,b->b", vals, w, jac, sign.astype(float))
    if flux.kind == "RT_lo":
        return dofs, m0
    m1 = np.einsum("bq,q,q,b,b->b", vals, w, s, jac, sign.astype(float))
    return dofs, np.stack([m0, m1], axis=1).ravel()
