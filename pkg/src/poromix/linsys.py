"""Monolithic composition of the time-step system and its direct solution.

The backward-Euler step couples the five fields through a symmetric
indefinite saddle-point matrix.  Scaling the pressure equation by the time
step and the flux equation by minus the time step makes the composed matrix
exactly symmetric, so one LU factorization (SuperLU, partial pivoting; plain
Cholesky would be invalid here) is reused for every step.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

FIELDS = ("sigma", "u", "gamma", "z", "p")


class SingularSystemError(RuntimeError):
    """Factorization failure; usually an unstable element combination or a
    boundary-condition setup that removed an inf-sup partner."""


class MonolithicSystem:
    """Composed sparse matrix over the unknown ordering (sigma, u, gamma, z, p).

    Attributes
    ----------
    matrix : csc matrix
    rhs : current right-hand side (owned by the caller, starts at zero)
    offsets : dict field name -> start index
    dims : dict field name -> block dimension
    dt : time-step scaling baked into the matrix
    """

    def __init__(self, matrix, offsets, dims, dt):
        self.matrix = matrix
        self.offsets = offsets
        self.dims = dims
        self.dt = dt
        self.rhs = np.zeros(matrix.shape[0])
        self._lu = None
        self.constrained = np.array([], dtype=np.int64)
        self._coupling = None

    @property
    def ndof(self):
        return self.matrix.shape[0]

    def slice_of(self, field):
        start = self.offsets[field]
        return slice(start, start + self.dims[field])

    def split(self, x):
        return {f: x[self.slice_of(f)] for f in FIELDS}

    def pack(self, fields):
        x = np.zeros(self.ndof)
        for f in FIELDS:
            x[self.slice_of(f)] = fields[f]
        return x

    # ------------------------------------------------------------ constraints
    def constrain(self, dofs):
        """Symmetric elimination of the given dofs (values enter via
        correct_rhs).  Must be called before factorizing."""
        if self._lu is not None:
            raise RuntimeError("matrix already factorized")
        dofs = np.unique(np.asarray(dofs, dtype=np.int64))
        if len(dofs) == 0:
            return
        self.constrained = dofs
        self._coupling = self.matrix.tocsc()[:, dofs].copy()
        keep = np.ones(self.ndof, dtype=bool)
        keep[dofs] = False
        diag = np.zeros(self.ndof)
        diag[dofs] = 1.0
        P = sp.diags(keep.astype(float))
        self.matrix = (P @ self.matrix @ P + sp.diags(diag)).tocsc()

    def correct_rhs(self, rhs, values=None):
        """Apply constraint values to a raw right-hand side."""
        if len(self.constrained) == 0:
            return rhs
        out = rhs.copy()
        if values is None:
            out[self.constrained] = 0.0
            return out
        out -= self._coupling @ values
        out[self.constrained] = values
        return out

    # ------------------------------------------------------------- factoring
    def factorize(self):
        if self._lu is None:
            try:
                self._lu = spla.splu(self.matrix.tocsc())
            except RuntimeError as exc:
                raise SingularSystemError(
                    f"LU factorization failed on {self.ndof} dofs: {exc}"
                ) from exc
        return self._lu

    def solve(self, rhs):
        return self.factorize().solve(rhs)


def compose_monolithic(blocks, dt, params=None):
    """Backward-Euler step matrix from assembled blocks.

    Row scaling: the flux row is multiplied by -dt and the pressure row by
    dt (which turns the backward difference quotient into plain values), so
    the block layout is

        [ A_SS   B_SU  B_SG  0          A_SP ]
        [ B_SU'  0     0     0          0    ]
        [ B_SG'  0     0     0          0    ]
        [ 0      0     0     -dt M_Z    -dt B_ZP ]
        [ T_PS   0     0     -dt D_ZQ   M_PP ]

    and the matrix is symmetric.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    b = blocks
    dims = {
        "sigma": b.A_SS.shape[0],
        "u": b.B_SU.shape[1],
        "gamma": b.B_SG.shape[1],
        "z": b.M_Z.shape[0],
        "p": b.M_PP.shape[0],
    }
    if b.B_ZP.shape != (dims["z"], dims["p"]) or b.T_PS.shape != (
        dims["p"],
        dims["sigma"],
    ):
        raise ValueError("block dimensions are inconsistent")
    matrix = sp.bmat(
        [
            [b.A_SS, b.B_SU, b.B_SG, None, b.A_SP],
            [b.B_SU.T, None, None, None, None],
            [b.B_SG.T, None, None, None, None],
            [None, None, None, -dt * b.M_Z, -dt * b.B_ZP],
            [b.T_PS, None, None, -dt * b.D_ZQ, b.M_PP],
        ],
        format="csc",
    )
    offsets = {}
    start = 0
    for f in FIELDS:
        offsets[f] = start
        start += dims[f]
    return MonolithicSystem(matrix, offsets, dims, dt)


def solve_direct(system, rhs=None):
    """Direct sparse solve; the factorization is cached on the system."""
    if rhs is None:
        rhs = system.rhs
    if isinstance(system, MonolithicSystem):
        return system.solve(rhs)
    try:
        lu = spla.splu(sp.csc_matrix(system))
    except RuntimeError as exc:
        raise SingularSystemError(str(exc)) from exc
    return lu.solve(np.asarray(rhs, dtype=float))


def export_matrix_market(system, path):
    """Debug dump of the composed matrix."""
    from scipy.io import mmwrite

    mmwrite(path, system.matrix.tocoo())
