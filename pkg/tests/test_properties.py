import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from asympwave import _numerics as nm
from asympwave import backward_solver as bs
from asympwave import energy as en
from asympwave import profile as pf
from asympwave import reduced as rd
from asympwave.model import Direction, angular_coefficients, builtin_system

finite = dict(allow_nan=False, allow_infinity=False)
directions = st.tuples(st.floats(0.0, np.pi), st.floats(0.0, 2 * np.pi)).map(lambda a: Direction.from_angles(*a))


@given(st.floats(-1.0, 1.0, **finite), st.floats(0.05, 0.24))
def test_cutoff_bounded_and_symmetric(d, c):
    spec = pf.CutoffSpec(c)
    a = pf.cutoff_psi(1 + d * c * 1.2, spec)
    b = pf.cutoff_psi(1 - d * c * 1.2, spec)
    assert 0.0 <= a <= 1.0
    assert abs(a - b) < 1e-9


@given(st.floats(-1e4, 1e4, **finite), st.floats(50.0, 1e5))
def test_weights_positive_and_ordered(q, t):
    W = en.WeightParams()
    m = en.weight_eval(t, q, W, "m")
    sig = en.weight_eval(t, q, W, "sigma")
    assert m >= 1 and 0 < sig < 2
    assert en.weight_eval(t, q, W, "w") >= m
    assert en.weight_eval(t, q, W, "w0") >= 1
    assert en.weight_eval(t, q - 1.0, W, "m") >= m


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5, **finite), st.integers(0, 10_000))
def test_energy_quadratic_scaling(lam, seed):
    snap = en.random_snapshots(300.0, 1, seed=seed, r_nodes=np.linspace(200, 400, 801))[0]
    base = en.energy_Eu(snap)
    assert np.isclose(en.energy_Eu(snap.scaled(lam)), lam * lam * base, rtol=1e-12, atol=1e-300)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10, **finite), st.integers(0, 10_000))
def test_poincare_ratio_scale_invariant(lam, seed):
    snap = en.random_snapshots(200.0, 1, seed=seed, r_nodes=np.linspace(110, 290, 1201))[0]
    a = en.poincare_ratio(snap, 1.2, variant="lp1st")
    assert np.isclose(en.poincare_ratio(snap.scaled(lam), 1.2, variant="lp1st"), a, rtol=1e-10)


@given(st.lists(st.floats(-3, 3, **finite), min_size=4, max_size=4),
       st.lists(st.floats(-3, 3, **finite), min_size=4, max_size=4))
def test_jet_algebra(f, g):
    f = np.array(f)[:, None]
    g = np.array(g)[:, None]
    assert np.allclose(nm.jet_mul(f, g), nm.jet_mul(g, f))
    g = g.copy()
    g[0] = 1.0 + abs(g[0])
    assert np.allclose(nm.jet_recip(nm.jet_recip(g)), g, atol=1e-8 * np.max(np.abs(g)) ** 4)


@given(st.lists(st.floats(-1, 1, **finite), min_size=5, max_size=5, unique=True).map(sorted),
       st.integers(1, 3))
def test_fornberg_annihilates_constants(xs, m):
    xs = np.array(xs)
    if np.min(np.diff(xs)) < 1e-2:
        return
    w = nm.fornberg(0.0, xs, m)
    assert abs(w.sum()) < 1e-8 * np.max(np.abs(w))


@given(st.floats(-3.0, 3.0, **finite), st.floats(-2.0, 2.0, **finite))
def test_fit_recovers_power_laws(p, logc):
    t = np.geomspace(10, 1e4, 8)
    f = pf.fit_decay_exponent(list(zip(t, np.exp(logc) * t**p)))
    assert abs(f.exponent - p) < 1e-9 and f.rms_residual < 1e-9


@settings(deadline=None)
@given(st.floats(0.01, 3.0), st.floats(0.0, 6.0), st.floats(-8, 8, **finite))
def test_semilinear_closed_form_regular(amp, s, q):
    sol = rd.closed_form_semilinear(rd.gaussian_data(-amp))
    om = Direction([0.0, 0.0, 1.0])
    x = np.array([q])
    assert sol.mu(s, x, om)[0] == -2.0
    assert abs(sol.U_q(s, x, om)[0, 0]) <= abs(sol.data.A(x)[0]) + 1e-15


@settings(deadline=None)
@given(st.floats(0.01, 3.0), st.floats(0.0, 6.0), st.floats(-8, 8, **finite), directions)
def test_quasilinear_and_euler_mu_negative(amp, s, q, om):
    x = np.array([q])
    qg = rd.closed_form_quasilinear_grad(rd.gaussian_data(-amp))
    eu = rd.closed_form_euler(rd.gaussian_data(amp), 0.3)
    assert qg.mu(s, x, om)[0] < 0 and eu.mu(s, x, om)[0] < 0
    cq = rd.constraint_values("quasilinear_grad", qg.U_q(s, x, om), om)
    ce = rd.constraint_values("euler", eu.U_q(s, x, om), om)
    assert max(cq.values()) < 1e-12 and max(ce.values()) < 1e-12


@given(st.floats(-3, 3, **finite), directions)
def test_rhs_quadratic_homogeneity(lam, om):
    ang = angular_coefficients(builtin_system("euler", {"cs1": 0.2}), om)
    q = np.linspace(-1, 1, 7)
    mu = -2 + 0.1 * q
    P = np.vstack([np.cos(q), np.sin(q), q, q * q])
    dmu1, dP1 = rd.reduced_rhs(mu, P, om, ang, q)
    dmu2, dP2 = rd.reduced_rhs(mu, lam * P, om, ang, q)
    assert np.allclose(dP2, lam * lam * dP1) and np.allclose(dmu2, lam * dmu1)


@given(st.floats(0.2, 5.0))
def test_burgers_shock_time_scaling(lam):
    base = rd.hormander_shock_time(lambda q: -np.sin(q), dV0=lambda q: -np.cos(q))
    scaled = rd.hormander_shock_time(lambda q: -lam * np.sin(q), dV0=lambda q: -lam * np.cos(q))
    assert np.isclose(scaled, base / lam)


@given(st.floats(-10, 10, **finite))
def test_chi_even_and_bounded(s):
    v = bs.chi_cutoff(s)
    assert 0 <= v <= 1 and v == bs.chi_cutoff(-s)
