"""Short walk through the pipeline: reduced solve, optics, profile residual, shock time.

Run with ``python3 demos/quick_tour.py``; takes well under a minute.
"""
import numpy as np

from asympwave import optical as op
from asympwave import profile as pf
from asympwave import reduced as rd
from asympwave.model import Direction, sphere_directions

EPS = 0.02
OM = Direction([0.0, 0.0, 1.0])


def reduced_vs_closed():
    print("reduced system: RK4 integration against closed forms (s = 2)")
    q = np.linspace(-10, 10, 256)
    oms = sphere_directions(4)
    for name, sol in [("semilinear", rd.closed_form_semilinear(rd.gaussian_data(-1.0))),
                      ("quasilinear", rd.closed_form_quasilinear_grad(rd.gaussian_data(-1.0))),
                      ("euler", rd.closed_form_euler(rd.gaussian_data(1.0), cs1=0.0))]:
        num = rd.integrate_reduced(sol.system, rd.sample_grid(sol, [0.0], q, oms), (0.0, 2.0), steps=128)
        ex = rd.sample_grid(sol, [2.0], q, oms)
        print(f"  {name:12s} sup|U - U_exact| = {np.max(np.abs(num.U[-1] - ex.U[0])):.2e}")


def optics():
    sol = rd.closed_form_quasilinear_grad(rd.gaussian_data(-1.0))
    P = op.OpticalParams.for_solution(sol, EPS)
    t = np.geomspace(50, 5000, 5)
    q, nu, _ = op.characteristics(t, t.copy(), OM, sol, P)
    print("optical function on the cone r = t (quasilinear family)")
    for ti, qi, ni in zip(t, q, nu):
        print(f"  t = {ti:7.1f}   q = {qi:+.5f}   nu = {ni:+.2e}")


def residual():
    sol = rd.closed_form_semilinear(rd.gaussian_data(-1.0))
    F = pf.ProfileField(sol, op.OpticalParams.for_solution(sol, EPS))
    t = np.geomspace(50, 5000, 7)
    res = [abs(pf.wave_residual(ti, ti, F)["residual"][0]) for ti in t]
    fit = pf.fit_decay_exponent(list(zip(t, res)))
    print(f"wave residual of u_app at q = 0 decays like t^{fit.exponent:.2f}")


def shock():
    print("Burgers shock times")
    print("  tanh data:", rd.hormander_shock_time(np.tanh, dV0=lambda q: 1 / np.cosh(q) ** 2))
    print("  -sin data:", rd.hormander_shock_time(lambda q: -np.sin(q), dV0=lambda q: -np.cos(q)))


if __name__ == "__main__":
    reduced_vs_closed()
    optics()
    residual()
    shock()
