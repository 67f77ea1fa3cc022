"""Error norms, convergence tables, displacement post-processing, and the
three experiment drivers (convergence, vanishing storage, incompressibility
sweep).

Errors are L2 norms over the domain at the final time (matrix fields in the
Frobenius sense; the rotation error is reported as the norm of the full skew
matrix, sqrt(2) times the scalar entry's norm).  Rates are log2 ratios under
mesh halving.
"""

import io
import math

import numpy as np

from . import assembly
from .cases import fixed_load_case, standard_case
from .mesh import build_structured_mesh
from .quadrature import quadrature
from .spaces import FieldVector, FunctionSpace
from .timestepping import BiotSolver, TimeGrid

FIELD_ORDER = ("sigma", "u", "ustar", "gamma", "z", "p")

CSV_HEADER = (
    "one_over_h,err_sigma,rate_sigma,err_u,rate_u,err_ustar,rate_ustar,"
    "err_gamma,rate_gamma,err_z,rate_z,err_p,rate_p"
)


def _cell_quad(mesh, degree):
    rule = quadrature(degree)
    pts = rule.physical_points(mesh.vertices[mesh.cells])
    wdet = rule.weights[None, :] * (2.0 * mesh.cell_areas[:, None])
    return rule, pts, wdet


def _field_values(space, coeffs, rule, pts, degree):
    """Discrete values at the cellwise quadrature points."""
    if space.role == "stress":
        val = space.row.tabulation(degree)["val"]
        r0, r1 = space.row_slices()
        rows = [
            np.einsum("tk,tkqa->tqa", coeffs[sl][space.row.cell_dofs], val)
            for sl in (r0, r1)
        ]
        return np.stack(rows, axis=-2)  # (T, Q, 2, 2)
    local = coeffs[space.cell_dofs]
    if space.kind in ("RT_lo", "RT_hi"):
        val = space.tabulation(degree)["val"]
        return np.einsum("tk,tkqa->tqa", local, val)
    if space.kind == "DG0":
        out = local[:, None, :] * np.ones((1, len(rule.weights), 1))
        return out[..., 0] if space.components == 1 else out
    lam = rule.bary.T  # (3, Q)
    if space.components == 2:
        return np.einsum("tvc,vq->tqc", local.reshape(-1, 3, 2), lam)
    return np.einsum("tv,vq->tq", local, lam)


def l2_error(space, field, exact, t=None, degree=6):
    """L2 distance between a discrete field and a function of (x, y) or
    (t, x, y)."""
    coeffs = field.values if isinstance(field, FieldVector) else np.asarray(field)
    mesh = space.mesh
    rule, pts, wdet = _cell_quad(mesh, degree)
    vals = _field_values(space, coeffs, rule, pts, degree)
    x, y = pts[..., 0], pts[..., 1]
    ex = exact(x, y) if t is None else exact(t, x, y)
    diff = vals - np.asarray(ex)
    # sum over all value axes beyond (cell, point)
    sq = diff**2
    while sq.ndim > 2:
        sq = sq.sum(axis=-1)
    return float(np.sqrt(np.einsum("tq,tq->", sq, wdet)))


def l2_norm(space, field, degree=6):
    """L2 norm of a discrete field."""
    coeffs = field.values if isinstance(field, FieldVector) else np.asarray(field)
    mesh = space.mesh
    rule, pts, wdet = _cell_quad(mesh, degree)
    vals = _field_values(space, coeffs, rule, pts, degree)
    sq = vals**2
    while sq.ndim > 2:
        sq = sq.sum(axis=-1)
    return float(np.sqrt(np.einsum("tq,tq->", sq, wdet)))


def convergence_rate(errors):
    """log2(e_k / e_{k+1}) for consecutive mesh halvings."""
    errors = list(errors)
    if any(e <= 0 for e in errors):
        raise ValueError("errors must be positive")
    return [math.log2(errors[k] / errors[k + 1]) for k in range(len(errors) - 1)]


# ----------------------------------------------------------- post-processing
def postprocess_displacement(state, spaces, params, degree=4):
    """Cellwise-linear displacement recovery.

    On each cell the gradient of u* is the cell mean of
    A(sigma_h + alpha p_h I) + gamma_h and the cell mean of u* matches u_h;
    this solves the local gradient-matching system exactly.
    """
    mesh = spaces["stress"].mesh
    rule, pts, wdet = _cell_quad(mesh, degree)
    sig = _field_values(spaces["stress"], state.sigma.values, rule, pts, degree)
    p = _field_values(spaces["pressure"], state.p.values, rule, pts, degree)
    g = _field_values(spaces["rotation"], state.gamma.values, rule, pts, degree)
    mat = sig + params.alpha * p[..., None, None] * np.eye(2)
    mat = assembly.apply_compliance(params, mat)
    mat[..., 0, 1] += g
    mat[..., 1, 0] -= g
    G = np.einsum("tqab,tq->tab", mat, wdet) / mesh.cell_areas[:, None, None]
    a = state.u.values[spaces["displacement"].cell_dofs]  # (T, 2) cell values
    verts = mesh.vertices[mesh.cells]  # (T, 3, 2)
    rel = verts - mesh.cell_centroids()[:, None, :]
    vert_vals = a[:, None, :] + np.einsum("tab,tvb->tva", G, rel)
    space = FunctionSpace(mesh, "DG1", "postprocessed", components=2)
    out = np.zeros(space.ndof)
    out[space.cell_dofs] = vert_vals.reshape(mesh.num_cells, 6)
    return FieldVector(space, out)


# ------------------------------------------------------------- rate tables
class RateTable:
    """Per-refinement errors and log2 rates for the six reported fields."""

    def __init__(self, one_over_h, errors):
        self.one_over_h = list(one_over_h)
        self.errors = {f: list(errors[f]) for f in FIELD_ORDER}
        self.rates = {f: convergence_rate(self.errors[f]) for f in FIELD_ORDER}

    def row(self, k):
        cells = [self.one_over_h[k]]
        for f in FIELD_ORDER:
            cells.append(self.errors[f][k])
            cells.append(self.rates[f][k - 1] if k > 0 else None)
        return cells

    def to_csv(self):
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for k in range(len(self.one_over_h)):
            cells = self.row(k)
            text = [str(cells[0])]
            for v in cells[1:]:
                text.append("" if v is None else repr(float(v)))
            buf.write(",".join(text) + "\n")
        return buf.getvalue()

    def to_markdown(self):
        head = ["1/h"]
        for f in FIELD_ORDER:
            head += [f"err_{f}", "rate"]
        lines = ["| " + " | ".join(head) + " |",
                 "|" + "---|" * len(head)]
        for k in range(len(self.one_over_h)):
            cells = self.row(k)
            text = [str(cells[0])]
            for v in cells[1:]:
                text.append("--" if v is None else f"{v:.3g}")
            lines.append("| " + " | ".join(text) + " |")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_csv(text):
        lines = [l for l in text.strip().splitlines() if l.strip()]
        if lines[0] != CSV_HEADER:
            raise ValueError("unexpected CSV header")
        ns, errors = [], {f: [] for f in FIELD_ORDER}
        for line in lines[1:]:
            parts = line.split(",")
            ns.append(int(parts[0]))
            for i, f in enumerate(FIELD_ORDER):
                errors[f].append(float(parts[1 + 2 * i]))
        return RateTable(ns, errors)


def _dt_from_rule(dt_rule, n):
    if dt_rule == "h2":
        return 1.0 / n**2
    if dt_rule == "h3":
        return 1.0 / n**3
    return float(dt_rule)


def case_errors(solver, state, case, with_ustar=True):
    """Final-time errors of all reported fields for a manufactured case."""
    t = state.t
    sp = solver.spaces
    errs = {
        "sigma": l2_error(sp["stress"], state.sigma, case.sigma, t),
        "u": l2_error(sp["displacement"], state.u, case.u, t),
        "gamma": math.sqrt(2.0)
        * l2_error(sp["rotation"], state.gamma, case.gamma12, t),
        "z": l2_error(sp["flux"], state.z, case.z, t),
        "p": l2_error(sp["pressure"], state.p, case.p, t),
    }
    if with_ustar:
        ustar = postprocess_displacement(state, sp, solver.params)
        errs["ustar"] = l2_error(ustar.space, ustar, case.u, t)
    return errs


def run_convergence_experiment(element, refinements, dt_rule, mu=10.0,
                               lam=10.0, s0=1.0, kappa=1.0, alpha=1.0,
                               t_final=1.0, diag="right",
                               sup_over_steps=False):
    """Errors and rates of the manufactured solution over a refinement sweep."""
    case = standard_case(mu=mu, lam=lam, s0=s0, kappa=kappa, alpha=alpha)
    errors = {f: [] for f in FIELD_ORDER}
    for n in refinements:
        dt = _dt_from_rule(dt_rule, n)
        nsteps = int(round(t_final / dt))
        mesh = build_structured_mesh(n, diag=diag)
        solver = BiotSolver(mesh, element, case, t_final / nsteps)
        sup = {f: 0.0 for f in FIELD_ORDER}

        record = None
        if sup_over_steps:
            def record(st):
                if st.t == 0.0:
                    return
                e = case_errors(solver, st, case)
                for f in FIELD_ORDER:
                    sup[f] = max(sup[f], e[f])

        state = solver.run(TimeGrid(t_final, nsteps), record=record)
        errs = sup if sup_over_steps else case_errors(solver, state, case)
        for f in FIELD_ORDER:
            errors[f].append(errs[f])
    return RateTable(refinements, errors)


# ------------------------------------------------------- incompressibility
LOCKING_FIELDS = ("sigma", "u", "z")

LOCKING_CSV_HEADER = (
    "lambda,one_over_h,relerr_sigma,rate_sigma,relerr_u,rate_u,relerr_z,rate_z"
)


class LockingTable:
    """Relative errors against a fine-mesh reference, per lambda and mesh."""

    def __init__(self, lambdas, one_over_h, relerrs):
        self.lambdas = list(lambdas)
        self.one_over_h = list(one_over_h)
        self.relerrs = relerrs  # dict lam -> dict field -> list

    def to_csv(self):
        buf = io.StringIO()
        buf.write(LOCKING_CSV_HEADER + "\n")
        for lam in self.lambdas:
            errs = self.relerrs[lam]
            rates = {f: convergence_rate(errs[f]) for f in LOCKING_FIELDS}
            for k, n in enumerate(self.one_over_h):
                cells = [repr(float(lam)), str(n)]
                for f in LOCKING_FIELDS:
                    cells.append(repr(float(errs[f][k])))
                    cells.append("" if k == 0 else repr(float(rates[f][k - 1])))
                buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def to_markdown(self):
        head = ["lambda", "1/h"]
        for f in LOCKING_FIELDS:
            head += [f"relerr_{f}", "rate"]
        lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
        for lam in self.lambdas:
            errs = self.relerrs[lam]
            rates = {f: convergence_rate(errs[f]) for f in LOCKING_FIELDS}
            for k, n in enumerate(self.one_over_h):
                cells = [f"{lam:.0e}", str(n)]
                for f in LOCKING_FIELDS:
                    cells.append(f"{errs[f][k]:.3g}")
                    cells.append("--" if k == 0 else f"{rates[f][k - 1]:.3g}")
                lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def relative_reference_errors(coarse_solver, coarse_state, ref_solver,
                              ref_state, degree=4):
    """Relative L2 distances of (sigma, u, z) between a coarse run and a
    same-case run on a finer structured mesh, integrated on the fine mesh."""
    fine = ref_solver.mesh
    rule, pts, wdet = _cell_quad(fine, degree)
    x, y = pts[..., 0], pts[..., 1]
    out = {}
    pairs = {
        "sigma": ("stress", "sigma"),
        "u": ("displacement", "u"),
        "z": ("flux", "z"),
    }
    for name, (role, attr) in pairs.items():
        ref_vals = _field_values(
            ref_solver.spaces[role], getattr(ref_state, attr).values, rule, pts,
            degree,
        )
        coarse_vals = coarse_solver.spaces[role].eval_at(
            getattr(coarse_state, attr).values, x, y
        )
        dsq = (coarse_vals - ref_vals) ** 2
        rsq = ref_vals**2
        while dsq.ndim > 2:
            dsq = dsq.sum(axis=-1)
            rsq = rsq.sum(axis=-1)
        num = np.sqrt(np.einsum("tq,tq->", dsq, wdet))
        den = np.sqrt(np.einsum("tq,tq->", rsq, wdet))
        out[name] = float(num / den)
    return out


def run_locking_experiment(lambdas, refinements, reference_n, mu=10.0,
                           kappa=1.0, s0=1e-3, alpha=1.0, dt_rule="h2",
                           t_final=1.0, diag="right"):
    """Fixed-load runs for growing lambda, measured against a fine-mesh
    reference solution of the same problem."""
    if reference_n < max(refinements):
        raise ValueError("reference mesh must be at least as fine as the tests")
    relerrs = {}
    for lam in lambdas:
        case = fixed_load_case(lam, mu=mu, kappa=kappa, s0=s0, alpha=alpha)
        dt_ref = _dt_from_rule(dt_rule, reference_n)
        ref_mesh = build_structured_mesh(reference_n, diag=diag)
        ref_solver = BiotSolver(ref_mesh, 1, case, dt_ref)
        ref_state = ref_solver.run(TimeGrid(t_final, int(round(t_final / dt_ref))))
        per_field = {f: [] for f in LOCKING_FIELDS}
        for n in refinements:
            dt = _dt_from_rule(dt_rule, n)
            mesh = build_structured_mesh(n, diag=diag)
            solver = BiotSolver(mesh, 1, case, dt)
            state = solver.run(TimeGrid(t_final, int(round(t_final / dt))))
            rel = relative_reference_errors(solver, state, ref_solver, ref_state)
            for f in LOCKING_FIELDS:
                per_field[f].append(rel[f])
        relerrs[lam] = per_field
    return LockingTable(lambdas, refinements, relerrs)


# ------------------------------------------------------------ temporal order
def run_temporal_order_experiment(element=1, n=16, dts=(0.125, 0.0625),
                                  ref_factor=8, s0=1.0, t_final=1.0):
    """Temporal error under dt halving at a fixed mesh, each run measured
    against a same-mesh reference with dt/ref_factor."""
    case = standard_case(s0=s0)
    mesh = build_structured_mesh(n)
    errors = []
    for dt in dts:
        solver = BiotSolver(mesh, element, case, dt)
        state = solver.run(TimeGrid(t_final, int(round(t_final / dt))))
        dt_ref = dt / ref_factor
        ref = BiotSolver(mesh, element, case, dt_ref)
        ref_state = ref.run(TimeGrid(t_final, int(round(t_final / dt_ref))))
        sp = solver.spaces
        parts = [
            l2_norm(sp["stress"], state.sigma.values - ref_state.sigma.values),
            l2_norm(sp["displacement"], state.u.values - ref_state.u.values),
            math.sqrt(2.0)
            * l2_norm(sp["rotation"], state.gamma.values - ref_state.gamma.values),
            l2_norm(sp["flux"], state.z.values - ref_state.z.values),
            l2_norm(sp["pressure"], state.p.values - ref_state.p.values),
        ]
        errors.append(math.sqrt(sum(e**2 for e in parts)))
    return {"dts": list(dts), "errors": errors, "rates": convergence_rate(errors)}
