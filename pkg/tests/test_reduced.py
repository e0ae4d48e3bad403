import numpy as np
import pytest

from asympwave import model as md
from asympwave import reduced as rd
from asympwave.model import Direction, builtin_system, sphere_directions

OM = Direction([0.0, 0.0, 1.0])
OMS = sphere_directions(3)


def test_rhs_zero_state():
    sysq = builtin_system("quasilinear_grad")
    q = np.linspace(-2, 2, 11)
    ang = md.angular_coefficients(sysq, OM)
    dmu, dP = rd.reduced_rhs(np.full(11, -2.0), np.zeros((4, 11)), OM, ang, q)
    assert not np.any(dmu) and not np.any(dP)


def test_rhs_semilinear_constant():
    ang = md.angular_coefficients(builtin_system("semilinear_ut2"), OM)
    q = np.linspace(0, 1, 9)
    c = 0.7
    dmu, dP = rd.reduced_rhs(np.full(9, -2.0), np.full((1, 9), c), OM, ang, q)
    assert np.allclose(dP, -c * c / 4) and np.allclose(dmu, 0)


def test_rhs_quasilinear_matches_closed_form_derivative():
    G, A = 1.0, -0.6
    ang = md.angular_coefficients(builtin_system("quasilinear_grad"), OM)
    q = np.linspace(0, 1, 9)
    mu0 = 4 / (G * A * 0 - 2)
    P = np.zeros((4, 9))
    P[0] = 4 * A / (G * A * 0 - 2)
    dmu, _ = rd.reduced_rhs(np.full(9, mu0), P, OM, ang, q)
    assert np.allclose(dmu, -4 * G * A / (G * A * 0 - 2) ** 2)


def test_rhs_validation():
    ang = md.angular_coefficients(builtin_system("semilinear_ut2"), OM)
    with pytest.raises(ValueError):
        rd.reduced_rhs(np.zeros(5), np.zeros((1, 4)), OM, ang, np.arange(5.0))


def test_closed_form_point_values():
    semi = rd.closed_form_semilinear(rd.gaussian_data(-1.0))
    assert np.isclose(semi.U_q(2.0, np.array([0.0]), OM)[0, 0], -0.5)
    assert np.allclose(semi.mu(1.3, np.linspace(-3, 3, 7), OM), -2.0)
    qg = rd.closed_form_quasilinear_grad(rd.gaussian_data(-1.0))
    assert np.isclose(qg.mu(2.0, np.array([0.0]), OM)[0], -1.0)
    eu = rd.closed_form_euler(rd.gaussian_data(1.0), cs1=0.0)
    assert np.isclose(eu.mu(1.0, np.array([0.0]), OM)[0], -1.0)
    flat = rd.closed_form_euler(rd.gaussian_data(0.8), cs1=-1.0)
    assert np.allclose(flat.mu(3.0, np.linspace(-4, 4, 9), OM), -2.0)


def test_gaussian_total_mass():
    semi = rd.closed_form_semilinear(rd.gaussian_data(-1.0))
    assert abs(semi.U(0.0, np.array([60.0]), OM)[0, 0] + np.sqrt(np.pi)) < 1e-8


@pytest.mark.parametrize("builder", [rd.closed_form_semilinear, rd.closed_form_quasilinear_grad,
                                     lambda d: rd.closed_form_euler(d, 0.2)])
def test_zero_data_is_trivial(builder):
    sol = builder(rd.zero_data())
    q = np.linspace(-5, 5, 11)
    for s in (0.0, 1.0, 4.0):
        assert np.allclose(sol.mu(s, q, OM), -2.0)
        assert not np.any(sol.U(s, q, OM))


def test_sign_conditions_enforced():
    with pytest.raises(ValueError):
        rd.closed_form_semilinear(rd.gaussian_data(1.0))
    with pytest.raises(ValueError):
        rd.closed_form_euler(rd.gaussian_data(-1.0), 0.0)


def test_jet_derivatives_against_differences():
    sol = rd.closed_form_quasilinear_grad(rd.gaussian_data(-1.0))
    q = np.linspace(-2, 2, 5)
    h = 1e-4
    d_s = sol.derivative("mu", 1.0, q, OM, ds=1)
    fd_s = (sol.mu(1 + h, q, OM) - sol.mu(1 - h, q, OM)) / (2 * h)
    assert np.allclose(d_s, fd_s, atol=1e-7)
    d_q = sol.derivative("U", 1.0, q, OM, dq=1)
    assert np.allclose(d_q, sol.U_q(1.0, q, OM), atol=1e-12)


def test_integrate_matches_semilinear_closed_form():
    sol = rd.closed_form_semilinear(rd.gaussian_data(-1.0))
    q = np.linspace(-8, 8, 257)
    init = rd.sample_grid(sol, [0.0], q, OMS)
    num = rd.integrate_reduced(sol.system, init, (0.0, 1.0), steps=64)
    exact = rd.sample_grid(sol, [1.0], q, OMS)
    assert np.max(np.abs(num.muU_q[-1] - exact.muU_q[0])) < 1e-8
    assert np.max(np.abs(num.mu[-1] - exact.mu[0])) < 1e-12


def test_integrate_trivial_is_constant():
    sol = rd.closed_form_semilinear(rd.zero_data())
    init = rd.sample_grid(sol, [0.0], np.linspace(-3, 3, 33), OMS)
    num = rd.integrate_reduced(sol.system, init, (0.0, 2.0), steps=16)
    assert np.all(num.mu == -2.0) and not np.any(num.muU_q)


def test_integrate_flags_riccati_blowup():
    q = np.linspace(-4, 4, 161)
    A = np.exp(-q * q)  # F A > 0: the sign condition is violated
    mu = np.full((1, 1, q.size), -2.0)
    P = (-2 * A)[None, None, None, :]
    grid = rd.ReducedGrid([0.0], q, [OM], mu, P, np.zeros_like(P))
    num = rd.integrate_reduced(builtin_system("semilinear_ut2"), grid, (0.0, 4.0), steps=4000,
                               blowup_threshold=1e3)
    assert num.info["blowup"]
    assert abs(num.info["s_blowup"] - 2.0) < 0.05 * 2.0


def test_integrate_validation():
    sol = rd.closed_form_semilinear(rd.gaussian_data(-1.0))
    init = rd.sample_grid(sol, [0.0], np.linspace(-3, 3, 33), OMS)
    with pytest.raises(ValueError):
        rd.integrate_reduced(sol.system, init, (0, 1), steps=4)


def test_numeric_solution_interpolates():
    sol = rd.closed_form_semilinear(rd.gaussian_data(-1.0))
    q = np.linspace(-6, 6, 241)
    init = rd.sample_grid(sol, [0.0], q, [OM])
    num = rd.integrate_reduced(sol.system, init, (0.0, 1.0), steps=32)
    ns = rd.NumericSolution(num, sol.system)
    qq = np.array([-0.37, 0.11, 1.9])
    assert np.allclose(ns.U_q(0.55, qq, OM), sol.U_q(0.55, qq, OM), atol=1e-5)
    with pytest.raises(ValueError):
        ns.U(0.5, qq, Direction([1.0, 0.0, 0.0]))


def crossing_oracle(V0, q, s_grid):
    """First s at which the characteristic map q + V0(q) s / 2 stops being monotone."""
    v = V0(q)
    for s in s_grid:
        if np.any(np.diff(q + v * s / 2) <= 0):
            return s
    return np.inf


def test_shock_times():
    assert rd.hormander_shock_time(np.tanh, dV0=lambda q: 1 / np.cosh(q) ** 2) == np.inf
    s_star = rd.hormander_shock_time(lambda q: -np.sin(q), dV0=lambda q: -np.cos(q))
    oracle = crossing_oracle(lambda q: -np.sin(q), np.linspace(-10, 10, 200001), np.linspace(1.9, 2.2, 3001))
    assert abs(s_star - oracle) <= 0.02 * oracle
    assert abs(s_star - 2.0) <= 0.04
    # finite differences when no derivative is supplied
    assert abs(rd.hormander_shock_time(lambda q: -np.sin(q)) - 2.0) < 0.04
    assert rd.hormander_shock_time(lambda q: -np.exp(-q * q), "riccati", 1.0) == np.inf
    assert np.isclose(rd.hormander_shock_time(lambda q: np.exp(-q * q), "riccati", 1.0, nodes=4001), 2.0)
    with pytest.raises(ValueError):
        rd.hormander_shock_time(np.sin, "kdv")


@pytest.mark.parametrize("sol", [rd.closed_form_quasilinear_grad(rd.gaussian_data(-1.0)),
                                 rd.closed_form_euler(rd.gaussian_data(1.0), 0.0)])
def test_constraints(sol):
    q = np.linspace(-10, 10, 201)
    closed = rd.constraint_residual(sol, rd.sample_grid(sol, np.linspace(0, 2, 5), q, OMS))
    assert max(closed.values()) < 1e-12
    init = rd.sample_grid(sol, [0.0], q, OMS)
    num = rd.integrate_reduced(sol.system, init, (0.0, 2.0), steps=64)
    num.info["system"] = sol.kind
    assert max(rd.constraint_residual(None, num).values()) < 1e-6


def test_constraints_rejected_for_semilinear():
    sol = rd.closed_form_semilinear(rd.gaussian_data(-1.0))
    with pytest.raises(ValueError):
        rd.constraint_residual(sol, rd.sample_grid(sol, [0.0], np.linspace(-1, 1, 5), OMS))


def test_scattering_data_validation():
    with pytest.raises(ValueError):
        rd.gaussian_data(gamma_plus=1.0)
    with pytest.raises(ValueError):
        rd.polynomial_data(power=1.0)
    d = rd.polynomial_data(-1.0, 2.5)
    q = np.array([-3.0, 0.0, 2.0])
    # tail is the exact antiderivative of A
    h = 1e-5
    assert np.allclose((d.tail(q + h) - d.tail(q - h)) / (2 * h), d.A(q), atol=1e-8)
    t = rd.table_data(np.linspace(-2, 2, 41), np.exp(-np.linspace(-2, 2, 41) ** 2))
    assert t.A(np.array([3.0]))[0] == 0.0
