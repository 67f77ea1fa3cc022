"""Global finite element spaces: dof numbering, interpolation, projections.

Five roles are used by the solver: displacement (componentwise DG0),
rotation (the independent entry of a skew matrix, DG0 or CG1), flux (RT),
pressure (DG0 or DG1), and stress (two H(div) rows of BDM1, row r holding
components (sigma_r0, sigma_r1)).
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .elements import HdivCellBasis, ReferenceElement, SCALAR_KINDS, VECTOR_KINDS
from .quadrature import quadrature


class FieldVector:
    """Coefficient vector attached to its space."""

    def __init__(self, space, values=None):
        self.space = space
        if values is None:
            values = np.zeros(space.ndof)
        values = np.asarray(values, dtype=float)
        if values.shape != (space.ndof,):
            raise ValueError("coefficient length does not match space dimension")
        self.values = values

    def copy(self):
        return FieldVector(self.space, self.values.copy())


class FunctionSpace:
    """Scalar, componentwise-scalar, or H(div) vector space on a mesh."""

    def __init__(self, mesh, kind, role, components=1):
        self.mesh = mesh
        self.elem = ReferenceElement(kind)
        self.kind = kind
        self.role = role
        if components not in (1, 2) or (
            components == 2 and kind not in ("DG0", "DG1")
        ):
            raise ValueError("only DG0/DG1 support a components > 1 layout")
        self.components = components
        self._tab_cache = {}
        self._basis = None
        self._number_dofs()

    def _number_dofs(self):
        mesh = self.mesh
        T = mesh.num_cells
        if self.kind in VECTOR_KINDS:
            per_edge = 1 if self.kind == "RT_lo" else 2
            E = mesh.num_edges
            edge_dofs = per_edge * mesh.cell_edges  # (T, 3)
            if per_edge == 2:
                cd = np.stack([edge_dofs, edge_dofs + 1], axis=2).reshape(T, 6)
            else:
                cd = edge_dofs
            self.ndof = per_edge * E
            if self.kind == "RT_hi":
                interior = self.ndof + 2 * np.arange(T)[:, None] + np.arange(2)
                cd = np.concatenate([cd, interior], axis=1)
                self.ndof += 2 * T
            self.cell_dofs = cd
        elif self.kind == "DG0":
            c = self.components
            self.ndof = c * T
            self.cell_dofs = c * np.arange(T)[:, None] + np.arange(c)
        elif self.kind == "DG1":
            c = self.components
            self.ndof = 3 * c * T
            self.cell_dofs = 3 * c * np.arange(T)[:, None] + np.arange(3 * c)
        elif self.kind == "CG1":
            self.ndof = mesh.num_vertices
            self.cell_dofs = mesh.cells.copy()
        self.nloc = self.cell_dofs.shape[1]

    @property
    def basis(self):
        """Per-cell H(div) nodal basis (vector kinds only)."""
        if self._basis is None:
            if self.kind not in VECTOR_KINDS:
                raise ValueError(f"{self.kind} has no H(div) cell basis")
            mesh = self.mesh
            ep = mesh.edges[mesh.cell_edges]  # (T, 3, 2) endpoint vertex ids
            self._basis = HdivCellBasis(
                self.kind,
                mesh.vertices[mesh.cells],
                mesh.vertices[ep[:, :, 0]],
                mesh.vertices[ep[:, :, 1]],
            )
        return self._basis

    # ---------------------------------------------------------------- tabulation
    def tabulation(self, degree):
        """Basis data at the degree-`degree` rule.

        Vector kinds: dict with 'val' (T, nloc, Q, 2) and 'div' (T, nloc, Q).
        Scalar kinds: dict with 'val' (nloc, Q), cell independent.
        """
        if degree in self._tab_cache:
            return self._tab_cache[degree]
        rule = quadrature(degree)
        if self.kind in VECTOR_KINDS:
            pts = rule.physical_points(self.mesh.vertices[self.mesh.cells])
            tab = {
                "val": self.basis.values(pts),
                "div": self.basis.divergences(pts),
            }
        elif self.kind == "DG0":
            tab = {"val": np.ones((1, len(rule.weights)))}
        else:
            tab = {"val": rule.bary.T.copy()}  # barycentric hat functions
        self._tab_cache[degree] = tab
        return tab

    # ------------------------------------------------------------- interpolation
    def interpolate(self, fn):
        """Canonical interpolation: dof functionals applied to fn.

        Scalar fn: fn(x, y) -> array; componentwise DG0 and vector kinds:
        fn(x, y) -> (..., 2).
        """
        mesh = self.mesh
        out = np.zeros(self.ndof)
        if self.kind in VECTOR_KINDS:
            local = self.basis.interpolation_dofs(fn)
            out[self.cell_dofs] = local
        elif self.kind == "DG0":
            c = mesh.cell_centroids()
            vals = np.asarray(fn(c[:, 0], c[:, 1]))
            out[self.cell_dofs] = vals.reshape(mesh.num_cells, self.components)
        elif self.kind == "DG1":
            v = mesh.vertices[mesh.cells]
            vals = np.asarray(fn(v[..., 0], v[..., 1]))
            out[self.cell_dofs] = vals.reshape(mesh.num_cells, self.nloc)
        else:
            v = mesh.vertices
            out = np.asarray(fn(v[:, 0], v[:, 1]), dtype=float)
        return FieldVector(self, out)

    def project(self, fn, degree=6):
        """L2 projection, solving the mass system cellwise or globally."""
        mesh = self.mesh
        rule = quadrature(degree)
        pts = rule.physical_points(mesh.vertices[mesh.cells])
        wdet = rule.weights[None, :] * (2.0 * mesh.cell_areas[:, None])
        if self.kind == "DG0":
            vals = np.asarray(fn(pts[..., 0], pts[..., 1]))
            vals = vals.reshape(mesh.num_cells, len(rule.weights), self.components)
            means = np.einsum("tqc,tq->tc", vals, wdet) / mesh.cell_areas[:, None]
            out = np.zeros(self.ndof)
            out[self.cell_dofs] = means
            return FieldVector(self, out)
        if self.kind == "DG1":
            lam = rule.bary.T  # (3, Q)
            vals = np.asarray(fn(pts[..., 0], pts[..., 1]))
            vals = vals.reshape(mesh.num_cells, len(rule.weights), self.components)
            M = np.einsum("iq,jq,tq->tij", lam, lam, wdet)
            b = np.einsum("iq,tqc,tq->tic", lam, vals, wdet)
            sol = np.linalg.solve(M, b)  # batched, one rhs per component
            out = np.zeros(self.ndof)
            out[self.cell_dofs] = sol.reshape(mesh.num_cells, self.nloc)
            return FieldVector(self, out)
        if self.kind == "CG1":
            lam = rule.bary.T
            Mloc = np.einsum("iq,jq,tq->tij", lam, lam, wdet)
            rows = np.repeat(self.cell_dofs, self.nloc, axis=1).ravel()
            cols = np.tile(self.cell_dofs, (1, self.nloc)).ravel()
            M = sp.coo_matrix(
                (Mloc.ravel(), (rows, cols)), shape=(self.ndof, self.ndof)
            ).tocsc()
            vals = np.asarray(fn(pts[..., 0], pts[..., 1]))
            bloc = np.einsum("iq,tq,tq->ti", lam, vals, wdet)
            b = np.zeros(self.ndof)
            np.add.at(b, self.cell_dofs.ravel(), bloc.ravel())
            return FieldVector(self, spla.spsolve(M, b))
        # H(div) kinds: global (block-diagonal by cell coupling through edges)
        tab = self.tabulation(degree)
        Mloc = np.einsum("tiqa,tjqa,tq->tij", tab["val"], tab["val"], wdet)
        rows = np.repeat(self.cell_dofs, self.nloc, axis=1).ravel()
        cols = np.tile(self.cell_dofs, (1, self.nloc)).ravel()
        M = sp.coo_matrix(
            (Mloc.ravel(), (rows, cols)), shape=(self.ndof, self.ndof)
        ).tocsc()
        vals = np.asarray(fn(pts[..., 0], pts[..., 1]))
        bloc = np.einsum("tiqa,tqa,tq->ti", tab["val"], vals, wdet)
        b = np.zeros(self.ndof)
        np.add.at(b, self.cell_dofs.ravel(), bloc.ravel())
        return FieldVector(self, spla.spsolve(M, b))

    # ---------------------------------------------------------------- evaluation
    def eval_at(self, coeffs, x, y, cells=None):
        """Discrete field values at physical points (structured meshes).

        Returns (..., ) for scalars, (..., 2) for vector kinds and
        componentwise DG0.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if cells is None:
            cells = self.mesh.locate_points(x, y)
        flat_c = cells.ravel()
        pts = np.stack([x.ravel(), y.ravel()], axis=-1)[:, None, :]
        coeffs = np.asarray(coeffs)
        local = coeffs[self.cell_dofs[flat_c]]  # (P, nloc)
        if self.kind in VECTOR_KINDS:
            bv = self.basis.values(pts, cells=flat_c)[:, :, 0, :]  # (P, nloc, 2)
            out = np.einsum("pk,pki->pi", local, bv)
            return out.reshape(x.shape + (2,))
        if self.kind == "DG0":
            out = local.reshape(x.shape + (self.components,))
            return out[..., 0] if self.components == 1 else out
        lam = self._barycentric(flat_c, pts[:, 0, :])
        if self.components == 2:
            out = np.einsum("pvc,pv->pc", local.reshape(-1, 3, 2), lam)
            return out.reshape(x.shape + (2,))
        out = np.einsum("pk,pk->p", local, lam)
        return out.reshape(x.shape)

    def _barycentric(self, cells, pts):
        v = self.mesh.vertices[self.mesh.cells[cells]]  # (P, 3, 2)
        d1 = v[:, 1] - v[:, 0]
        d2 = v[:, 2] - v[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        r = pts - v[:, 0]
        l1 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
        l2 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
        return np.stack([1.0 - l1 - l2, l1, l2], axis=1)

    def edge_dofs(self, edge_ids):
        """Global dofs attached to the given edges (H(div) kinds)."""
        if self.kind not in VECTOR_KINDS:
            raise ValueError("edge dofs are only defined for H(div) kinds")
        edge_ids = np.asarray(edge_ids, dtype=np.int64)
        if self.kind == "RT_lo":
            return edge_ids.copy()
        return np.stack([2 * edge_ids, 2 * edge_ids + 1], axis=1).ravel()


class StressSpace:
    """Matrix-valued H(div) space: two BDM1 rows, row r = (sigma_r0, sigma_r1)."""

    def __init__(self, mesh, row_kind="BDM1"):
        self.mesh = mesh
        self.row = FunctionSpace(mesh, row_kind, "sigma_row")
        self.kind = row_kind
        self.role = "stress"
        self.ndof = 2 * self.row.ndof
        self.nloc = 2 * self.row.nloc
        self.cell_dofs = np.concatenate(
            [self.row.cell_dofs, self.row.cell_dofs + self.row.ndof], axis=1
        )

    def row_slices(self):
        n = self.row.ndof
        return slice(0, n), slice(n, 2 * n)

    def interpolate(self, mat_fn):
        """Canonical interpolation of a matrix field fn(x, y) -> (..., 2, 2)."""
        out = np.zeros(self.ndof)
        for r, sl in enumerate(self.row_slices()):
            row_fn = lambda x, y, r=r: np.asarray(mat_fn(x, y))[..., r, :]
            out[sl] = self.row.interpolate(row_fn).values
        return FieldVector(self, out)

    def eval_at(self, coeffs, x, y, cells=None):
        """Matrix values (..., 2, 2) at physical points."""
        coeffs = np.asarray(coeffs)
        rows = [
            self.row.eval_at(coeffs[sl], x, y, cells=cells)
            for sl in self.row_slices()
        ]
        return np.stack(rows, axis=-2)

    def edge_dofs(self, edge_ids):
        """Dofs of both rows on the given edges."""
        base = self.row.edge_dofs(edge_ids)
        return np.concatenate([base, base + self.row.ndof])


def build_space(mesh, kind, role):
    """Space factory for the five solver roles."""
    if role == "stress":
        return StressSpace(mesh, kind)
    if role == "displacement":
        return FunctionSpace(mesh, kind, role, components=2)
    if role in ("rotation", "pressure", "flux", "sigma_row"):
        return FunctionSpace(mesh, kind, role)
    raise ValueError(f"unknown role {role!r}")


def elliptic_projection_sigma(sigma_space, v_space, gamma_space, sigma_fn,
                              div_sigma_fn):
    """Weakly symmetric elliptic projection of a matrix field into the
    stress space.

    Solves the auxiliary mixed elasticity system: find (s, u, g) with
    (s, tau) + (u, div tau) + (g, tau) = (sigma, tau), (div s, v) =
    (div sigma, v), and (s, eta) = (sigma, eta); returns s.

    sigma_fn(x, y) -> (..., 2, 2); div_sigma_fn(x, y) -> (..., 2) is the
    row-wise divergence.
    """
    from . import assembly

    M = assembly.assemble_block("M_SS", {"stress": sigma_space})
    B = assembly.assemble_block(
        "B_SU", {"stress": sigma_space, "displacement": v_space}
    )
    C = assembly.assemble_block(
        "B_SG", {"stress": sigma_space, "rotation": gamma_space}
    )
    K = sp.bmat(
        [[M, B, C], [B.T, None, None], [C.T, None, None]], format="csc"
    )
    r1 = assembly.stress_load(sigma_space, sigma_fn)
    r2 = assembly.vector_load(v_space, div_sigma_fn)
    r3 = assembly.skew_moment_load(gamma_space, sigma_fn)
    rhs = np.concatenate([r1, r2, r3])
    sol = spla.spsolve(K, rhs)
    return FieldVector(sigma_space, sol[: sigma_space.ndof])
