import numpy as np
import pytest
from scipy.integrate import quad

from asympwave import optical as op
from asympwave import profile as pf
from asympwave import reduced as rd
from asympwave.model import Direction

OM = Direction([0.0, 0.0, 1.0])
EPS = 0.02


@pytest.mark.parametrize("c", [0.05, 0.1, 0.2])
def test_cutoff_values(c):
    spec = pf.CutoffSpec(c)
    assert pf.cutoff_psi(1.0, spec) == 1.0
    for order in (0, 1, 2):
        assert pf.cutoff_psi(1 + c, spec, order) == 0.0
        assert pf.cutoff_psi(1 - c, spec, order) == 0.0
    mid = pf.cutoff_psi(1 + 0.75 * c, spec)
    assert 0 < mid < 1
    assert np.isclose(pf.cutoff_psi(1 - 0.75 * c, spec), mid, rtol=0, atol=1e-12)


def test_cutoff_derivatives_match_differences():
    spec = pf.CutoffSpec(0.1)
    x = np.linspace(0.91, 1.09, 37)
    h = 1e-6
    d1 = (pf.cutoff_psi(x + h, spec) - pf.cutoff_psi(x - h, spec)) / (2 * h)
    assert np.allclose(pf.cutoff_psi(x, spec, 1), d1, atol=1e-5)
    d2 = (pf.cutoff_psi(x + 1e-5, spec, 1) - pf.cutoff_psi(x - 1e-5, spec, 1)) / 2e-5
    assert np.allclose(pf.cutoff_psi(x, spec, 2), d2, rtol=1e-4, atol=1e-2)


def test_cutoff_validation():
    with pytest.raises(ValueError):
        pf.CutoffSpec(0.3)
    with pytest.raises(ValueError):
        pf.cutoff_psi(1.0, order=3)


def test_u_app_trivial_and_support(trivial, semi_field, semilinear):
    P = op.OpticalParams.for_solution(trivial, EPS)
    t = np.full(5, 300.0)
    r = np.array([200.0, 280.0, 300.0, 320.0, 400.0])
    assert not np.any(pf.u_app_eval(t, r, OM, trivial, P))
    u = semi_field(t, np.array([250.0, 270.0, 300.0, 330.0, 360.0]))
    assert u[0, 0] == 0 and u[0, 1] == 0 and u[0, 3] == 0 and u[0, 4] == 0 and u[0, 2] != 0
    # on the plateau u_app = eps U / r
    U = semilinear.U(P.s(300.0), np.array([2.0]), OM)[0, 0]
    assert np.isclose(semi_field(300.0, 302.0)[0], EPS * U / 302.0)


def test_residual_trivial(trivial):
    F = pf.ProfileField(trivial, op.OpticalParams.for_solution(trivial, EPS))
    w = pf.wave_residual(500.0, 501.0, F)
    assert np.all(w["residual"] == 0)
    assert pf.hessian_structure_check(500.0, 501.0, F)["deviation"] == 0


def test_residual_pieces_match_leading_term(semi_field, semilinear):
    P = semi_field.params
    for t, q in ((1000.0, 0.0), (3000.0, -1.0)):
        r = t + q
        w = pf.wave_residual(t, r, semi_field)
        # both pieces equal -eps^2 r^-2 d_s(mu U_q) = eps^2 U_q^2 / r^2 at leading order
        Uq = semilinear.U_q(P.s(t), np.array([q]), OM)[0, 0]
        lead = EPS**2 * Uq**2 / r**2
        assert np.isclose(w["metric_piece"][0], lead, rtol=0.05)
        assert np.isclose(w["source_piece"][0], lead, rtol=0.05)
        assert abs(w["residual"][0]) < 0.2 * lead
        assert w["convergence"] < 1e-3


def test_residual_domain(semi_field):
    with pytest.raises(ValueError):
        pf.wave_residual(100.0, 0.0, semi_field)
    with pytest.raises(ValueError):
        semi_field(1e-12, 1e-12)


def test_hessian_lead_term(semi_field):
    small = pf.hessian_structure_check(4000.0, 3999.0, semi_field)
    big = pf.hessian_structure_check(400.0, 399.0, semi_field)
    assert small["deviation"] < 0.05 * small["lead_norm"]
    assert small["deviation"] / small["lead_norm"] < big["deviation"] / big["lead_norm"]
    assert small["singular_ratio"] < big["singular_ratio"] < 0.5


def test_fit_examples():
    f = pf.fit_decay_exponent([(1, 1), (10, 1e-3), (100, 1e-6)], min_samples=3)
    assert np.isclose(f.exponent, -3.0, atol=1e-12)
    f = pf.fit_decay_exponent([(1, 2), (10, 2), (100, 2)], min_samples=3)
    assert abs(f.exponent) < 1e-12
    t = np.geomspace(1, 1e4, 40)
    f = pf.fit_decay_exponent(list(zip(t, t**-2 * (1 + 0.01 * np.sin(np.log(t))))))
    assert abs(f.exponent + 2) < 0.01
    assert f.t_window == (1.0, 1e4) and f.n_samples == 40


def test_fit_validation():
    with pytest.raises(ValueError):
        pf.fit_decay_exponent([(1, 1), (10, 1e-3), (100, 1e-6)])
    with pytest.raises(ValueError):
        pf.fit_decay_exponent([(t, 1.0) for t in (1, 1.5, 2, 2.5, 3)])
    with pytest.raises(ValueError):
        pf.fit_decay_exponent([(t, -1.0 if t == 2 else 1.0) for t in (1, 2, 4, 8, 16)])


@pytest.fixture(scope="module")
def qg():
    return rd.closed_form_quasilinear_grad(rd.gaussian_data(-1.0))


def test_w_zero_data():
    sol = rd.closed_form_quasilinear_grad(rd.zero_data())
    assert not np.any(pf.w_antiderivative(sol, 1.0, np.linspace(-3, 3, 7), OM)["W"])


def test_w_family_check(semilinear):
    with pytest.raises(ValueError):
        pf.w_antiderivative(semilinear, 0.0, [0.0], OM)


def test_w_nested_quadrature(qg):
    q = np.array([-1.0, 0.0, 2.0])
    W = pf.w_antiderivative(qg, 0.0, q, OM)
    # at s = 0, mu = -2 and U_(0) = int A, so W = -int int A
    A = lambda p: -np.exp(-p * p)
    inner = lambda p: quad(A, -np.inf, p, epsabs=1e-13)[0]
    oracle = np.array([-quad(inner, -40, x, epsabs=1e-13, limit=200)[0] for x in q])
    assert np.allclose(W["W"], oracle, rtol=0, atol=1e-8)
    assert np.isfinite(W["tail_bound"]) and W["tail_bound"] > 0


def test_w_derivative(qg):
    h = 1e-3
    q = np.array([-0.5, 0.3, 1.7])
    W = lambda x: pf.w_antiderivative(qg, 0.7, x, OM)["W"]
    fd = (W(q + h) - W(q - h)) / (2 * h)
    exact = 2 * qg.U(0.7, q, OM)[0] / qg.mu(0.7, q, OM)
    assert np.allclose(fd, exact, rtol=0, atol=1e-6)


def test_w_closed_form_at_zero(qg):
    # int_{-inf}^0 (sqrt(pi)/2) erfc(-p) dp = 1/2 in closed form
    W = pf.w_antiderivative(qg, 0.0, [0.0], OM)["W"][0]
    assert np.isclose(W, 0.5, atol=1e-10)
