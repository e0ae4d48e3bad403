import numpy as np
import pytest

from asympwave import _numerics as nm
from asympwave import energy as en

W = en.WeightParams()


def test_weight_params_validation():
    with pytest.raises(ValueError):
        en.WeightParams(gamma1=5.0)
    with pytest.raises(ValueError):
        en.WeightParams(gamma2=0.6)
    with pytest.raises(ValueError):
        en.WeightParams(c0=1.0)
    with pytest.raises(ValueError):
        en.WeightParams(gamma_minus=1.5)


def test_weights_at_zero_and_minus_one():
    t = 50.0
    assert en.weight_eval(t, 0.0, W, "m") == 1 and en.weight_eval(t, 0.0, W, "sigma") == 1
    assert en.weight_eval(t, 0.0, W, "w0") == 1
    assert np.isclose(en.weight_eval(t, 0.0, W, "w"), t ** (W.c0 * W.epsilon))
    assert np.isclose(en.weight_eval(t, -1.0, W, "m"), 2**2.4)
    assert np.isclose(en.weight_eval(t, -1.0, W, "w0"), 2 ** (2.4 / 2))


def test_weight_limits():
    t = 1000.0
    q = np.array([1e3, 1e6])
    sig = en.weight_eval(t, q, W, "sigma")
    assert np.allclose(sig, (1 + q) ** -W.gamma2)
    assert sig[1] < sig[0]
    w = en.weight_eval(t, q, W, "w")
    assert abs(w[1] - 1) < abs(w[0] - 1)
    qm = -q
    sigm = en.weight_eval(t, qm, W, "sigma")
    assert np.allclose(sigm, 2 - (1 - qm) ** -W.gamma2)
    assert abs(sigm[1] - 2) < abs(sigm[0] - 2)
    ratio = en.weight_eval(t, qm, W, "w") / (en.weight_eval(t, qm, W, "m") * t ** (2 * W.c0 * W.epsilon))
    assert abs(ratio[1] - 1) < abs(ratio[0] - 1) < 1


def test_weight_errors():
    with pytest.raises(ValueError):
        en.weight_eval(10.0, 0.0, W, "w")
    with pytest.raises(ValueError):
        en.weight_eval(100.0, 0.0, W, "v")


def _grid(n=30001, hi=3.0):
    return np.linspace(0.0, hi, n)


def test_energy_of_zero_field():
    r = _grid(101)
    snap = en.FieldSnapshot(60.0, r, 0.0, 0.0, 0.0)
    assert en.energy_Eu(snap) == 0
    chart = en.ChartSlice.flat(60.0, r)
    assert en.energy_Eq(snap, chart) == 0
    assert en.poincare_ratio(snap, variant="lp1st") == 0.0


def test_energy_indicator_shell():
    r = _grid()
    d = 0.01
    # the density phi_r^2 is the smoothed indicator, symmetric about r = 1 and r = 2
    phi_r = np.sqrt(nm.smoothstep((r - (1 - d / 2)) / d) * nm.smoothstep(((2 + d / 2) - r) / d))
    snap = en.FieldSnapshot(60.0, r, 0.0, 0.0, phi_r)
    val = en.energy_Eu(snap, weight=1.0)
    assert np.isclose(val, 28 * np.pi / 3, rtol=1e-4)


def test_energy_coercivity_flag():
    r = _grid(101)
    snap = en.FieldSnapshot(60.0, r, 0.0, np.ones(101), np.ones(101))
    degenerate = np.diag([0.0, 0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        en.energy_Eu(snap, metric=degenerate, weight=1.0)


def test_Eq_vanishes_for_outgoing_waves():
    t = 300.0
    r = np.linspace(250, 350, 2001)
    f = np.exp(-((r - t) ** 2))
    fp = -2 * (r - t) * f
    snap = en.FieldSnapshot(t, r, f, -fp, fp)
    chart = en.ChartSlice.flat(t, r)
    assert en.energy_Eq(snap, chart) == 0
    incoming = en.FieldSnapshot(t, r, f, fp, fp)
    assert en.energy_Eq(incoming, chart) > 0
    with pytest.raises(ValueError):
        en.energy_Eq(snap, en.ChartSlice(chart.q, -chart.q_t, chart.q_r))


def test_snapshot_validation():
    with pytest.raises(ValueError):
        en.FieldSnapshot(1.0, [0.0, 2.0, 1.0], 0.0, 0.0, 0.0)
    s = en.FieldSnapshot.from_function(1.0, np.linspace(0, 1, 101), np.linspace(0, 1, 101) ** 2)
    assert np.allclose(s.phi_r, 2 * s.r_nodes, atol=1e-10)


def _gauss_snapshot(t, n):
    r = np.linspace(t - 20, t + 20, n)
    phi = np.exp(-((r - t) ** 2)) * nm.bump(r - t, -10, -8, 8, 10)
    return en.FieldSnapshot.from_function(t, r, phi)


def test_lp1_gaussian_stable():
    ratios = [en.poincare_ratio(_gauss_snapshot(400.0, n), 1.2, variant="lp1") for n in (2001, 4001)]
    assert np.all(np.isfinite(ratios))
    assert abs(ratios[0] - ratios[1]) <= 0.1 * max(ratios)


def test_lp_thresholds():
    assert np.isclose(en.lp1_threshold(1.2), 100 * 2.2**2 / 1.44)
    snap = _gauss_snapshot(200.0, 2001)
    with pytest.raises(ValueError):
        en.poincare_ratio(snap, 1.2, variant="lp1")
    assert np.isfinite(en.poincare_ratio(snap, 1.2, variant="lp1st"))
    with pytest.raises(ValueError):
        en.poincare_ratio(snap, 1.2, variant="lp2")
    with pytest.raises(ValueError):
        en.poincare_ratio(snap, 1.2, variant="lp9")


def test_random_family_bounded():
    snaps = en.random_snapshots(2000.0, 20, seed=3)
    assert len(snaps) == 20 and all(s.compact for s in snaps)
    ratios = [en.poincare_ratio(s, 1.2, variant="lp1") for s in snaps]
    assert np.all(np.isfinite(ratios)) and max(ratios) < 10
    chart = en.ChartSlice.flat(2000.0, snaps[0].r_nodes)
    lp2 = [en.poincare_ratio(s, 1.2, variant="lp2", chart=chart, params=W) for s in snaps]
    assert np.all(np.isfinite(lp2))
