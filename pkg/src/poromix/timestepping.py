"""Backward-Euler (and optional Crank-Nicolson) integration of the
five-field consolidation system.

The step matrix is time independent, so it is factorized once and reused;
loads and boundary data are recombined per step from precomputed spatial
vectors (see cases.py) or assembled on the fly for general data.
"""

from dataclasses import dataclass

import numpy as np

from . import assembly
from .linsys import compose_monolithic
from .spaces import FieldVector, build_space

ELEMENT_PAIRS = {
    1: {
        "stress": "BDM1",
        "displacement": "DG0",
        "rotation": "DG0",
        "flux": "RT_lo",
        "pressure": "DG0",
    },
    2: {
        "stress": "BDM1",
        "displacement": "DG0",
        "rotation": "CG1",
        "flux": "RT_hi",
        "pressure": "DG1",
    },
}


def build_spaces(mesh, element):
    """The five spaces of one of the two element pairs."""
    kinds = ELEMENT_PAIRS[element]
    return {role: build_space(mesh, kind, role) for role, kind in kinds.items()}


@dataclass
class TimeGrid:
    """Uniform partition of [0, T] into N steps."""

    t_final: float
    nsteps: int

    def __post_init__(self):
        if self.nsteps < 1:
            raise ValueError("need at least one step")

    @property
    def dt(self):
        return self.t_final / self.nsteps

    def times(self):
        return np.linspace(0.0, self.t_final, self.nsteps + 1)


@dataclass
class DiscreteState:
    """Coefficients of the five fields at one time level."""

    t: float
    sigma: FieldVector
    u: FieldVector
    gamma: FieldVector
    z: FieldVector
    p: FieldVector

    def as_dict(self):
        return {
            "sigma": self.sigma.values,
            "u": self.u.values,
            "gamma": self.gamma.values,
            "z": self.z.values,
            "p": self.p.values,
        }


class BiotSolver:
    """Assembles, constrains, factorizes, and advances one configuration."""

    def __init__(self, mesh, element, case, dt, scheme="backward-euler"):
        if scheme not in ("backward-euler", "crank-nicolson"):
            raise ValueError(f"unknown scheme {scheme!r}")
        self.mesh = mesh
        self.element = element
        self.case = case
        self.params = case.params
        self.dt = dt
        self.scheme = scheme
        self.spaces = build_spaces(mesh, element)
        self.partition = case.partition(mesh)
        self.blocks = assembly.assemble_system(self.spaces, self.params)
        theta = 0.5 if scheme == "crank-nicolson" else 1.0
        self.system = compose_monolithic(self.blocks, theta * dt)
        self._bootstrap = None
        if scheme == "crank-nicolson":
            self._bootstrap = compose_monolithic(self.blocks, dt * dt)
        self._setup_constraints()
        self._setup_load_terms()

    # ------------------------------------------------------------ constraints
    def _setup_constraints(self):
        for sys in filter(None, (self.system, self._bootstrap)):
            assembly.apply_essential_bc(sys, self.partition, self.spaces)
        self._time_dependent_bc = (
            self.case.traction is not None or self.case.normal_flux is not None
        )

    def _essential_values(self, t):
        """Constrained dof values at time t, or None for homogeneous data."""
        if not self._time_dependent_bc:
            return None
        traction = self.case.traction
        nflux = self.case.normal_flux
        ds, vs = assembly.essential_stress_dofs(
            self.spaces["stress"], self.partition.sorted("gamma_t"),
            None if traction is None else (lambda x, y: traction(t, x, y)),
        )
        df, vf = assembly.essential_flux_dofs(
            self.spaces["flux"], self.partition.sorted("gamma_f"),
            None if nflux is None else (lambda x, y: nflux(t, x, y)),
        )
        # align with the ascending constrained-dof order used by the system
        return np.concatenate([vs[np.argsort(ds)], vf[np.argsort(df)]])

    # ------------------------------------------------------------- load terms
    def _setup_load_terms(self):
        case = self.case
        disp, pres = self.spaces["displacement"], self.spaces["pressure"]
        stress, flux = self.spaces["stress"], self.spaces["flux"]
        gd = self.partition.sorted("gamma_d")
        gp = self.partition.sorted("gamma_p")
        self._f_vecs = [
            (c, -assembly.vector_load(disp, fn)) for c, fn in case.f_terms
        ]
        self._g_vecs = [
            (c, assembly.scalar_load(pres, fn)) for c, fn in case.g_terms
        ]
        self._u0_vecs = [
            (c, assembly.boundary_stress_load(stress, gd, fn))
            for c, fn in case.u0_terms
        ]
        self._p0_vecs = [
            (c, assembly.boundary_flux_load(flux, gp, fn))
            for c, fn in case.p0_terms
        ]

    @staticmethod
    def _combine(terms, t, out):
        for coef, vec in terms:
            out += coef(t) * vec

    def _raw_rhs(self, system, t, prev, g_prev_time=None, z_prev=None):
        raw = np.zeros(system.ndof)
        sl = system.slice_of
        self._combine(self._u0_vecs, t, raw[sl("sigma")])
        self._combine(self._f_vecs, t, raw[sl("u")])
        p0 = np.zeros(system.dims["z"])
        self._combine(self._p0_vecs, t, p0)
        raw[sl("z")] = -system.dt * p0
        g_load = np.zeros(system.dims["p"])
        self._combine(self._g_vecs, t, g_load)
        if g_prev_time is not None:  # trapezoidal source average
            self._combine(self._g_vecs, g_prev_time, g_load)
        rp = system.dt * g_load
        rp += self.blocks.T_PS @ prev["sigma"] + self.blocks.M_PP @ prev["p"]
        if z_prev is not None:
            rp += system.dt * (self.blocks.D_ZQ @ z_prev)
        raw[sl("p")] = rp
        return raw

    # --------------------------------------------------------------- stepping
    def initial_state(self):
        """Interpolated/projected exact initial data, or zero fields."""
        spaces = self.spaces
        if self.case.has_exact:
            c = self.case
            sigma = spaces["stress"].interpolate(lambda x, y: c.sigma(0.0, x, y))
            z = spaces["flux"].interpolate(lambda x, y: c.z(0.0, x, y))
            u = spaces["displacement"].interpolate(lambda x, y: c.u(0.0, x, y))
            p = spaces["pressure"].project(lambda x, y: c.p(0.0, x, y))
            gamma = spaces["rotation"].project(lambda x, y: c.gamma12(0.0, x, y))
        else:
            sigma = FieldVector(spaces["stress"])
            z = FieldVector(spaces["flux"])
            u = FieldVector(spaces["displacement"])
            p = FieldVector(spaces["pressure"])
            gamma = FieldVector(spaces["rotation"])
        return DiscreteState(0.0, sigma, u, gamma, z, p)

    def _unpack(self, system, x, t):
        parts = system.split(x)
        sp = self.spaces
        return DiscreteState(
            t,
            FieldVector(sp["stress"], parts["sigma"]),
            FieldVector(sp["displacement"], parts["u"]),
            FieldVector(sp["rotation"], parts["gamma"]),
            FieldVector(sp["flux"], parts["z"]),
            FieldVector(sp["pressure"], parts["p"]),
        )

    def step(self, state, dt=None, system=None, trapezoidal=False):
        """Advance one step of length dt (default: the configured step)."""
        dt = self.dt if dt is None else dt
        system = self.system if system is None else system
        t_new = state.t + dt
        prev = state.as_dict()
        raw = self._raw_rhs(
            system,
            t_new,
            prev,
            g_prev_time=state.t if trapezoidal else None,
            z_prev=prev["z"] if trapezoidal else None,
        )
        rhs = system.correct_rhs(raw, self._essential_values(t_new))
        x = system.solve(rhs)
        return self._unpack(system, x, t_new)

    def run(self, grid, record=None):
        """March the full grid; returns the final state."""
        state = self.initial_state()
        if record is not None:
            record(state)
        if self.scheme == "crank-nicolson":
            return self._run_cn(grid, state, record)
        for i in range(1, grid.nsteps + 1):
            state = self.step(state)
            state.t = i * grid.dt  # avoid accumulation drift
            if record is not None:
                record(state)
        return state

    def _run_cn(self, grid, state, record):
        dt = grid.dt
        # bootstrap: one backward-Euler step of length dt^2 keeps the
        # algebraic rows consistent without solving a separate init system
        state = self.step(state, dt=dt * dt, system=self._bootstrap)
        for i in range(1, grid.nsteps + 1):
            target = i * dt
            step_len = target - state.t
            if abs(step_len - dt) < 1e-12 * max(1.0, dt):
                state = self.step(state, dt=dt, system=self.system, trapezoidal=True)
            else:
                # shortened catch-up step after the bootstrap offset
                sys_i = compose_monolithic(self.blocks, 0.5 * step_len)
                sys_i.constrain(self.system.constrained)
                state = self.step(
                    state, dt=step_len, system=sys_i, trapezoidal=True
                )
            state.t = target
            if record is not None:
                record(state)
        return state

    # -------------------------------------------------------------- utilities
    def energy(self, state):
        """Discrete energy: A-norm of sigma + alpha p I plus the s0-weighted
        pressure norm, both squared."""
        s, p = state.sigma.values, state.p.values
        return float(
            s @ (self.blocks.A_SS @ s)
            + 2.0 * s @ (self.blocks.A_SP @ p)
            + p @ (self.blocks.M_PP @ p)
        )

    def step_residual(self, prev_state, new_state):
        """Relative residual of the stepped equations at new_state."""
        system = self.system
        prev = prev_state.as_dict()
        raw = self._raw_rhs(system, new_state.t, prev)
        rhs = system.correct_rhs(raw, self._essential_values(new_state.t))
        x = system.pack(new_state.as_dict())
        r = system.matrix @ x - rhs
        scale = max(np.linalg.norm(rhs), np.linalg.norm(x), 1e-30)
        return float(np.linalg.norm(r) / scale)


def run(case, element, n, dt, t_final=1.0, diag="right", scheme="backward-euler",
        record=None):
    """Build a solver on a fresh structured mesh and march to t_final."""
    from .mesh import build_structured_mesh

    nsteps = int(round(t_final / dt))
    if not np.isclose(nsteps * dt, t_final, rtol=1e-9):
        raise ValueError("t_final must be an integer multiple of dt")
    mesh = build_structured_mesh(n, diag=diag)
    solver = BiotSolver(mesh, element, case, t_final / nsteps, scheme=scheme)
    grid = TimeGrid(t_final, nsteps)
    return solver, solver.run(grid, record=record)
