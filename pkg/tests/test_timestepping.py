import math

import numpy as np
import pytest

from poromix.assembly import MaterialParams
from poromix.cases import ManufacturedCase, fixed_load_case, standard_case
from poromix.mesh import build_structured_mesh
from poromix.timestepping import BiotSolver, TimeGrid, build_spaces, run
from poromix.verification import case_errors, l2_error

# first validated run of the smooth case, element pair 1, n = 8, dt = 1/64
GOLDEN_N8 = {
    "sigma": 1.2193105897869763,
    "u": 0.04163111780520226,
    "ustar": 0.002207471826429984,
    "gamma": 0.08551740166074423,
    "z": 0.03871829904608344,
    "p": 0.015037091182666622,
}


def zero_case(s0, gamma_t=(), gamma_f=()):
    params = MaterialParams(mu=10.0, lam=10.0, s0=s0)
    return ManufacturedCase(params, gamma_t=gamma_t, gamma_f=gamma_f)


def test_time_grid():
    grid = TimeGrid(1.0, 16)
    assert grid.dt == 1 / 16
    assert np.allclose(grid.times(), np.linspace(0, 1, 17))
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)


@pytest.mark.parametrize("element", [1, 2])
@pytest.mark.parametrize("s0", [0.0, 1e-3, 1.0])
def test_zero_data_gives_zero_solution(element, s0):
    mesh = build_structured_mesh(2)
    solver = BiotSolver(mesh, element, zero_case(s0), dt=0.125)
    states = []
    solver.run(TimeGrid(1.0, 8), record=states.append)
    for st in states:
        assert max(np.abs(v).max() for v in st.as_dict().values()) == 0.0


@pytest.mark.parametrize("s0", [0.0, 1.0])
def test_energy_monotone_under_zero_loads(s0):
    # nonzero initial data, no forcing: the discrete energy decays
    base = standard_case(s0=s0)
    case = ManufacturedCase(
        base.params, u=base.u, p=base.p, sigma=base.sigma, z=base.z,
        gamma12=base.gamma12,
    )
    mesh = build_structured_mesh(4)
    solver = BiotSolver(mesh, 1, case, dt=0.05)
    state = solver.initial_state()
    energies = [solver.energy(state)]
    for _ in range(12):
        state = solver.step(state)
        energies.append(solver.energy(state))
    diffs = np.diff(energies)
    assert np.all(diffs <= 1e-12 * max(energies))


def test_step_residual_smooth_case():
    case = standard_case()
    mesh = build_structured_mesh(4)
    solver = BiotSolver(mesh, 1, case, dt=1 / 16)
    s0 = solver.initial_state()
    s1 = solver.step(s0)
    assert solver.step_residual(s0, s1) <= 1e-9


def test_single_step_equals_run_with_one_step():
    case = standard_case()
    mesh = build_structured_mesh(2)
    solver = BiotSolver(mesh, 1, case, dt=1.0)
    by_run = solver.run(TimeGrid(1.0, 1))
    by_step = solver.step(solver.initial_state())
    for a, b in zip(by_run.as_dict().values(), by_step.as_dict().values()):
        assert np.array_equal(a, b)


def test_initialize_zero_case_is_zero():
    mesh = build_structured_mesh(2)
    solver = BiotSolver(mesh, 1, zero_case(1.0), dt=0.5)
    st = solver.initial_state()
    assert max(np.abs(v).max() for v in st.as_dict().values()) == 0.0


def test_initialize_pressure_is_cell_mean():
    case = standard_case()
    mesh = build_structured_mesh(2)
    solver = BiotSolver(mesh, 1, case, dt=0.5)
    st = solver.initial_state()
    # p(0) = x^2 y; DG0 projection takes cell means
    from poromix.quadrature import quadrature

    rule = quadrature(6)
    pts = rule.physical_points(mesh.vertices[mesh.cells])
    wdet = rule.weights[None, :] * 2 * mesh.cell_areas[:, None]
    means = np.einsum("tq,tq->t", pts[..., 0] ** 2 * pts[..., 1], wdet)
    means /= mesh.cell_areas
    assert np.abs(st.p.values - means).max() < 1e-13


def test_initial_stress_interpolation_rate():
    case = standard_case()
    errs = []
    for n in (4, 8, 16):
        mesh = build_structured_mesh(n)
        solver = BiotSolver(mesh, 1, case, dt=0.5)
        st = solver.initial_state()
        errs.append(
            l2_error(solver.spaces["stress"], st.sigma,
                     lambda x, y: case.sigma(0.0, x, y))
        )
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates >= 1.0)


def test_golden_regression_n8():
    case = standard_case()
    solver, state = run(case, element=1, n=8, dt=1 / 64)
    errs = case_errors(solver, state, case)
    for field, want in GOLDEN_N8.items():
        assert abs(errs[field] - want) < 1e-10, field


def test_run_rejects_non_multiple_dt():
    with pytest.raises(ValueError):
        run(standard_case(), element=1, n=2, dt=0.3)


def test_temporal_first_order():
    # fixed mesh, dt halving against a dt/8 reference: rate 1 +- 0.2
    from poromix.verification import run_temporal_order_experiment

    res = run_temporal_order_experiment(element=1, n=8, dts=(1 / 4, 1 / 8))
    assert abs(res["rates"][0] - 1.0) <= 0.2


def test_essential_data_enters_solution():
    # prescribe the exact traction on the top edge; the constrained stress
    # moments must match it exactly after every step
    base = standard_case()
    case = ManufacturedCase(
        base.params, u=base.u, p=base.p, sigma=base.sigma, z=base.z,
        gamma12=base.gamma12, f=base.f, g=base.g, f_terms=base.f_terms,
        g_terms=base.g_terms, u0_terms=base.u0_terms, p0_terms=base.p0_terms,
        gamma_t=("top",),
        traction=lambda t, x, y: np.stack(
            [base.sigma(t, x, y)[..., 0, 1], base.sigma(t, x, y)[..., 1, 1]],
            axis=-1,
        ),
    )
    mesh = build_structured_mesh(4)
    solver = BiotSolver(mesh, 1, case, dt=1 / 16)
    state = solver.run(TimeGrid(1.0, 16))
    from poromix import assembly

    dofs, want = assembly.essential_stress_dofs(
        solver.spaces["stress"], solver.partition.sorted("gamma_t"),
        lambda x, y: case.traction(1.0, x, y),
    )
    assert np.abs(state.sigma.values[dofs] - want).max() < 1e-12
    # and the solve still converges to the exact solution
    errs = case_errors(solver, state, case, with_ustar=False)
    assert errs["sigma"] < 5.0


def test_fixed_load_constrained_dofs_vanish():
    case = fixed_load_case(1e4)
    mesh = build_structured_mesh(4)
    solver = BiotSolver(mesh, 1, case, dt=1 / 16)
    state = solver.run(TimeGrid(1.0, 16))
    x = solver.system.pack(state.as_dict())
    assert np.abs(x[solver.system.constrained]).max() == 0.0
    assert np.abs(state.p.values).max() > 0.0


# ------------------------------------------------------------ crank-nicolson
def test_cn_zero_data_zero_trajectory():
    mesh = build_structured_mesh(2)
    solver = BiotSolver(mesh, 1, zero_case(1.0), dt=0.25,
                        scheme="crank-nicolson")
    states = []
    solver.run(TimeGrid(1.0, 4), record=states.append)
    for st in states:
        assert max(np.abs(v).max() for v in st.as_dict().values()) == 0.0


def algebraic_residual(solver, state):
    b = solver.blocks
    t = state.t
    r1 = (
        b.A_SS @ state.sigma.values
        + b.B_SU @ state.u.values
        + b.B_SG @ state.gamma.values
        + b.A_SP @ state.p.values
    )
    for coef, vec in solver._u0_vecs:
        r1 -= coef(t) * vec[: len(r1)]
    r2 = b.B_SU.T @ state.sigma.values
    for coef, vec in solver._f_vecs:
        r2 -= coef(t) * vec
    r2g = b.B_SG.T @ state.sigma.values
    r3 = b.M_Z @ state.z.values + b.B_ZP @ state.p.values
    for coef, vec in solver._p0_vecs:
        r3 -= coef(t) * vec
    scale = max(1.0, np.linalg.norm(state.sigma.values))
    return max(np.linalg.norm(r) for r in (r1, r2, r2g, r3)) / scale


def test_cn_algebraic_rows_satisfied():
    case = standard_case()
    mesh = build_structured_mesh(4)
    solver = BiotSolver(mesh, 1, case, dt=1 / 8, scheme="crank-nicolson")
    states = []
    solver.run(TimeGrid(1.0, 8), record=states.append)
    assert algebraic_residual(solver, states[1]) <= 1e-9
    assert algebraic_residual(solver, states[-1]) <= 1e-9


def test_cn_second_order_in_time():
    # Richardson against a tiny-step backward-Euler reference.  Loads ramp
    # smoothly from zero data, so the discrete solution has no initial
    # layer (trapezoidal stepping barely damps layer modes and would ring).
    from poromix.verification import l2_norm

    params = MaterialParams(mu=10.0, lam=10.0, s0=1.0)
    f_terms = [
        (lambda t: np.sin(t),
         lambda x, y: np.stack([x * y, np.sin(np.pi * x)], axis=-1)),
        (lambda t: 1 - np.cos(2 * t),
         lambda x, y: np.stack([np.ones_like(x), x - y], axis=-1)),
    ]
    g_terms = [(lambda t: np.sin(3 * t), lambda x, y: x + np.cos(np.pi * y))]
    case = ManufacturedCase(params, f_terms=f_terms, g_terms=g_terms)
    mesh = build_structured_mesh(2)
    ref = BiotSolver(mesh, 1, case, dt=1 / 16384)
    ref_state = ref.run(TimeGrid(1.0, 16384))
    errs = []
    for nsteps in (8, 16):
        solver = BiotSolver(mesh, 1, case, dt=1 / nsteps,
                            scheme="crank-nicolson")
        state = solver.run(TimeGrid(1.0, nsteps))
        sp = solver.spaces
        e = math.sqrt(
            l2_norm(sp["stress"], state.sigma.values - ref_state.sigma.values) ** 2
            + l2_norm(sp["pressure"], state.p.values - ref_state.p.values) ** 2
        )
        errs.append(e)
    rate = math.log2(errs[0] / errs[1])
    assert 1.7 <= rate <= 2.3
