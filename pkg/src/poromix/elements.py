"""Reference-triangle elements and nodal bases on batches of physical cells.

H(div) bases (RT and BDM families) are constructed directly on each physical
triangle as the dual basis of globally-defined moment functionals: normal
moments on each edge taken against {1, s} with the edge directed from its
lower-indexed vertex to its higher-indexed one, plus interior moments for the
richer RT space.  Both cells sharing an edge therefore see the identical
functional, so normal traces match across the edge with no orientation signs.

Scalar bases (DG0, DG1, CG1) are barycentric.  The contravariant Piola map is
provided for mapping reference vector fields to physical cells; it preserves
edge normal fluxes and is the reason the moment functionals above are
well defined on the mapped spaces.
"""

import numpy as np

from .quadrature import edge_rule, quadrature

VECTOR_KINDS = ("BDM1", "RT_lo", "RT_hi")
SCALAR_KINDS = ("DG0", "DG1", "CG1")

_LOCAL_DIM = {"BDM1": 6, "RT_lo": 3, "RT_hi": 8, "DG0": 1, "DG1": 3, "CG1": 3}
_EDGE_DOFS = {"BDM1": 2, "RT_lo": 1, "RT_hi": 2}

# local edge k of a triangle sits opposite local vertex k
LOCAL_EDGES = ((1, 2), (0, 2), (0, 1))

REF_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


class ReferenceElement:
    """Element descriptor: kind, value shape, and dof functionals.

    dof_functionals is a list of descriptors:
      ("edge_moment", edge, order)  normal moment against 1 (order 0) or the
                                    directed edge parameter s (order 1)
      ("interior_moment", comp)     integral of component comp over the cell
      ("point_eval", vertex)        value at a vertex
      ("cell_eval",)                value at the centroid
    """

    def __init__(self, kind):
        if kind not in _LOCAL_DIM:
            raise ValueError(f"unknown element kind {kind!r}")
        self.kind = kind
        self.local_dim = _LOCAL_DIM[kind]
        self.value_shape = (2,) if kind in VECTOR_KINDS else ()
        self.dof_functionals = self._functionals(kind)

    @staticmethod
    def _functionals(kind):
        if kind in VECTOR_KINDS:
            dofs = []
            for k in range(3):
                for m in range(_EDGE_DOFS[kind]):
                    dofs.append(("edge_moment", k, m))
            if kind == "RT_hi":
                dofs.append(("interior_moment", 0))
                dofs.append(("interior_moment", 1))
            return dofs
        if kind == "DG0":
            return [("cell_eval",)]
        return [("point_eval", k) for k in range(3)]

    def __repr__(self):
        return f"ReferenceElement({self.kind!r})"


# ---------------------------------------------------------------------------
# polynomial frames for the H(div) spaces, in shifted/scaled coordinates
# xi = (x - shift) / scale


def _frame_dim(kind):
    return {"RT_lo": 3, "BDM1": 6, "RT_hi": 8}[kind]


def _frame_values(kind, xi):
    """Frame values at xi (..., 2) -> (..., nframe, 2)."""
    x, y = xi[..., 0], xi[..., 1]
    one = np.ones_like(x)
    zero = np.zeros_like(x)
    if kind == "RT_lo":
        comps = [(one, zero), (zero, one), (x, y)]
    else:
        comps = [(one, zero), (zero, one), (x, zero), (y, zero), (zero, x), (zero, y)]
        if kind == "RT_hi":
            comps += [(x * x, x * y), (x * y, y * y)]
    return np.stack([np.stack(c, axis=-1) for c in comps], axis=-2)


def _frame_divs(kind, xi):
    """Frame divergences in xi units (divide by scale for physical)."""
    x, y = xi[..., 0], xi[..., 1]
    one = np.ones_like(x)
    zero = np.zeros_like(x)
    if kind == "RT_lo":
        cols = [zero, zero, 2 * one]
    else:
        cols = [zero, zero, one, zero, zero, one]
        if kind == "RT_hi":
            cols += [3 * x, 3 * y]
    return np.stack(cols, axis=-1)


class HdivCellBasis:
    """Nodal basis of one H(div) element kind on a batch of triangles.

    Parameters
    ----------
    kind : "BDM1" | "RT_lo" | "RT_hi"
    verts : (T, 3, 2) cell vertex coordinates, counterclockwise
    edge_starts, edge_ends : (T, 3, 2) endpoints of local edge k in the
        global low->high direction
    """

    def __init__(self, kind, verts, edge_starts, edge_ends):
        self.kind = kind
        self.nloc = _LOCAL_DIM[kind]
        self.verts = np.asarray(verts, dtype=float)
        self.edge_starts = np.asarray(edge_starts, dtype=float)
        self.edge_ends = np.asarray(edge_ends, dtype=float)
        d1 = self.verts[:, 1] - self.verts[:, 0]
        d2 = self.verts[:, 2] - self.verts[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        if np.any(det <= 0):
            raise ValueError("degenerate or misoriented cell")
        self.areas = 0.5 * det
        self.shift = self.verts.mean(axis=1)
        self.scale = np.maximum(
            np.linalg.norm(d1, axis=1),
            np.maximum(
                np.linalg.norm(d2, axis=1), np.linalg.norm(d1 - d2, axis=1)
            ),
        )
        self.coeffs = self._build_coeffs()

    # edge geometry in the global direction
    def _edge_data(self):
        tang = self.edge_ends - self.edge_starts  # (T, 3, 2)
        length = np.linalg.norm(tang, axis=2)
        tang = tang / length[..., None]
        normal = np.stack([tang[..., 1], -tang[..., 0]], axis=-1)
        return length, normal

    def _apply_dofs(self, fn, nq_edge=3, tri_degree=2):
        """Moments of a vector function: (T, pts, 2)-valued fn -> (T, nloc)."""
        length, normal = self._edge_data()
        s, w = edge_rule(nq_edge)
        mid = 0.5 * (self.edge_starts + self.edge_ends)
        half = 0.5 * (self.edge_ends - self.edge_starts)
        # (T, 3, Q, 2) points on each local edge
        pts = mid[:, :, None, :] + s[None, None, :, None] * half[:, :, None, :]
        vals = fn(pts)
        vn = np.einsum("tkqi,tki->tkq", vals, normal)
        jac = 0.5 * length  # ds = |e|/2 dw on [-1, 1]
        m0 = np.einsum("tkq,q,tk->tk", vn, w, jac)
        dofs = [m0]
        if _EDGE_DOFS[self.kind] == 2:
            m1 = np.einsum("tkq,q,q,tk->tk", vn, w, s, jac)
            dofs = [np.stack([m0, m1], axis=2).reshape(len(self.verts), 6)]
        if self.kind == "RT_hi":
            rule = quadrature(tri_degree)
            xq = rule.physical_points(self.verts)
            vq = fn(xq)
            cell_scale = 2.0 * self.areas  # reference weights sum to 1/2
            ints = np.einsum("tqi,q,t->ti", vq, rule.weights, cell_scale)
            dofs.append(ints)
        return np.concatenate(dofs, axis=1)

    def _build_coeffs(self):
        def frame_fn(pts):
            xi = (pts - self.shift[:, None, None, :]) / self.scale[:, None, None, None]
            return _frame_values(self.kind, xi)

        # dof matrix V[t, i, j] = functional_i(frame_j)
        length, normal = self._edge_data()
        s, w = edge_rule(3)
        mid = 0.5 * (self.edge_starts + self.edge_ends)
        half = 0.5 * (self.edge_ends - self.edge_starts)
        pts = mid[:, :, None, :] + s[None, None, :, None] * half[:, :, None, :]
        xi = (pts - self.shift[:, None, None, :]) / self.scale[:, None, None, None]
        fvals = _frame_values(self.kind, xi)  # (T, 3, Q, nframe, 2)
        vn = np.einsum("tkqji,tki->tkqj", fvals, normal)
        jac = 0.5 * length
        rows = [np.einsum("tkqj,q,tk->tkj", vn, w, jac)]
        if _EDGE_DOFS[self.kind] == 2:
            m1 = np.einsum("tkqj,q,q,tk->tkj", vn, w, s, jac)
            rows = [
                np.stack([rows[0], m1], axis=2).reshape(
                    len(self.verts), 6, _frame_dim(self.kind)
                )
            ]
        else:
            rows = [rows[0]]
        if self.kind == "RT_hi":
            rule = quadrature(2)
            xq = rule.physical_points(self.verts)
            xiq = (xq - self.shift[:, None, :]) / self.scale[:, None, None]
            fq = _frame_values(self.kind, xiq)  # (T, Q, nframe, 2)
            ints = np.einsum(
                "tqji,q,t->tij", fq, rule.weights, 2.0 * self.areas
            )
            rows.append(ints)
        V = np.concatenate(rows, axis=1)
        # nodal coefficients: basis_k = sum_j C[k, j] frame_j with V C^T = I
        return np.linalg.inv(V).transpose(0, 2, 1)

    def values(self, pts, cells=None):
        """Basis values at physical points (T, Q, 2) -> (T, nloc, Q, 2).

        An index array `cells` restricts the batch to those cells, with pts
        of shape (len(cells), Q, 2).
        """
        shift, scale, coeffs = self._slice(cells)
        xi = (pts - shift[:, None, :]) / scale[:, None, None]
        fvals = _frame_values(self.kind, xi)  # (T, Q, nframe, 2)
        return np.einsum("tkj,tqji->tkqi", coeffs, fvals)

    def divergences(self, pts, cells=None):
        """Basis divergences at physical points (T, Q, 2) -> (T, nloc, Q)."""
        shift, scale, coeffs = self._slice(cells)
        xi = (pts - shift[:, None, :]) / scale[:, None, None]
        fdivs = _frame_divs(self.kind, xi) / scale[:, None, None]
        return np.einsum("tkj,tqj->tkq", coeffs, fdivs)

    def _slice(self, cells):
        if cells is None:
            return self.shift, self.scale, self.coeffs
        return self.shift[cells], self.scale[cells], self.coeffs[cells]

    def interpolation_dofs(self, fn, nq_edge=6, tri_degree=6):
        """Local dof values of a smooth vector function.

        fn maps (x, y) arrays to (..., 2) values.
        """
        def wrapped(pts):
            return np.asarray(fn(pts[..., 0], pts[..., 1]))

        return self._apply_dofs(wrapped, nq_edge=nq_edge, tri_degree=tri_degree)


def reference_cell_basis(kind):
    """The element's nodal basis on the reference triangle."""
    starts = np.array([REF_VERTS[a] for a, _ in LOCAL_EDGES])[None]
    ends = np.array([REF_VERTS[b] for _, b in LOCAL_EDGES])[None]
    return HdivCellBasis(kind, REF_VERTS[None], starts, ends)


def _check_inside(pts, tol=1e-12):
    x, y = pts[..., 0], pts[..., 1]
    if np.any(x < -tol) or np.any(y < -tol) or np.any(x + y > 1 + tol):
        raise ValueError("point outside the reference triangle")


def eval_basis(elem, pts):
    """Nodal basis of `elem` at reference points (..., 2).

    Returns (..., local_dim) for scalar kinds and (..., local_dim, 2) for
    vector kinds.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    _check_inside(pts)
    if elem.kind in VECTOR_KINDS:
        basis = reference_cell_basis(elem.kind)
        flat = pts.reshape(1, -1, 2)
        vals = basis.values(flat)[0]  # (nloc, N, 2)
        return np.moveaxis(vals, 0, -2).reshape(pts.shape[:-1] + (elem.local_dim, 2))
    x, y = pts[..., 0], pts[..., 1]
    if elem.kind == "DG0":
        return np.ones(pts.shape[:-1] + (1,))
    lam = np.stack([1.0 - x - y, x, y], axis=-1)
    return lam


def piola_map(J, vhat, det=None):
    """Contravariant Piola transform v = J vhat / det J.

    J is (..., 2, 2); vhat is (..., 2).  Preserves edge normal fluxes, and
    divergences map as div v = (div vhat) / det J.
    """
    J = np.asarray(J, dtype=float)
    if det is None:
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if np.any(np.isclose(det, 0.0)):
        raise ValueError("degenerate cell: det J = 0")
    return np.einsum("...ij,...j->...i", J, vhat) / det[..., None]


def piola_divergence(J, divhat, det=None):
    """Divergence transform matching piola_map."""
    J = np.asarray(J, dtype=float)
    if det is None:
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if np.any(np.isclose(det, 0.0)):
        raise ValueError("degenerate cell: det J = 0")
    return divhat / det
