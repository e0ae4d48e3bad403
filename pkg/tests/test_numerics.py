import numpy as np
import pytest
from scipy.special import erfc

from asympwave import _numerics as nm


def test_bracket():
    assert nm.bracket(0.0) == 1.0
    assert np.isclose(nm.bracket(3.0), np.sqrt(10.0))


def test_fornberg_matches_central_weights():
    w = nm.fornberg(0.0, np.arange(-2, 3, dtype=float), 1)
    assert np.allclose(w, [1 / 12, -2 / 3, 0, 2 / 3, -1 / 12])
    w2 = nm.fornberg(0.0, np.arange(-2, 3, dtype=float), 2)
    assert np.allclose(w2, [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12])


def test_fornberg_exact_on_quartics_nonuniform(rng):
    xs = np.sort(rng.uniform(-1, 1, 5))
    x0 = 0.1
    coef = rng.normal(size=5)
    p = np.polynomial.Polynomial(coef)
    for m in (1, 2, 3):
        approx = nm.fornberg(x0, xs, m) @ p(xs)
        assert np.isclose(approx, p.deriv(m)(x0), atol=1e-9)


def test_stencil_fourth_order():
    errs = []
    for n in (101, 201):
        x = np.linspace(0, 2, n) ** 1.2
        d = nm.Stencil(x)(np.sin(x))
        errs.append(np.max(np.abs(d - np.cos(x))))
    assert errs[0] / errs[1] > 12


def test_jets_against_hand_derivatives():
    x = np.linspace(-1, 1, 7)
    s, c = np.sin(x), np.cos(x)
    g = np.stack([s, c, -s, -c])
    e = np.exp(s)
    exact = np.stack([e, c * e, (c * c - s) * e, (c**3 - 3 * s * c - c) * e])
    assert np.allclose(nm.jet_exp(g), exact)
    h = np.stack([2 + s, c, -s, -c])
    r = 1 / (2 + s)
    exact_r = np.stack([r, -c * r**2, s * r**2 + 2 * c * c * r**3])
    got = nm.jet_recip(h)
    assert np.allclose(got[:3], exact_r[:3])
    # third derivative by finite differences of the second
    hstep = 1e-4
    d2 = lambda y: np.sin(y) / (2 + np.sin(y)) ** 2 + 2 * np.cos(y) ** 2 / (2 + np.sin(y)) ** 3
    assert np.allclose(got[3], (d2(x + hstep) - d2(x - hstep)) / (2 * hstep), atol=1e-6)
    assert np.allclose(nm.jet_powr(h, -1.0), got)
    assert np.allclose(nm.jet_mul(h, got)[0], 1.0) and np.allclose(nm.jet_mul(h, got)[1:], 0.0)
    assert np.allclose(nm.jet_pow(h, 2), nm.jet_mul(h, h))


def test_cumulative_quad_gaussian():
    q = np.array([-3.0, 0.0, 0.7, 5.0])
    val = nm.cumulative_quad(lambda p: np.exp(-p * p), q, -1e6)
    assert np.allclose(val, np.sqrt(np.pi) / 2 * erfc(-q), rtol=0, atol=1e-12)


def test_simpson_exact_for_quadratics(rng):
    x = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, 9)]))
    w = nm.simpson_weights(x)
    assert np.isclose(w @ (3 * x**2 - x), 1 - 0.5)
    u = np.linspace(0, 1, 11)
    assert np.isclose(nm.simpson_weights(u) @ u**3, 0.25)
    with pytest.raises(ValueError):
        nm.simpson_weights(np.arange(4.0))


def test_smoothstep_and_bump():
    assert nm.smoothstep(-1.0) == 0 and nm.smoothstep(2.0) == 1
    assert np.isclose(nm.smoothstep(0.5), 0.5)
    b = nm.bump(np.array([-5, -3.5, 0, 3.5, 5]), -4, -3, 3, 4)
    assert b[0] == 0 and b[2] == 1 and b[4] == 0 and np.isclose(b[1], b[3])


def test_loglog_fit_exact():
    t = np.array([1.0, 10, 100])
    slope, icpt, se, resid = nm.loglog_fit(t, 5 * t**-1.5)
    assert np.isclose(slope, -1.5) and np.isclose(icpt, np.log(5)) and resid < 1e-12
