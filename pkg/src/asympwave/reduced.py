"""Geometric reduced system: closed-form families, RK4 integration, shock times.

Unknowns are ``mu(s, q, omega)`` and ``U(s, q, omega)`` (M components); the
evolved pair is ``(mu, P)`` with ``P = mu * U_q``::

    dP^I/ds = -1/4 F2^I_JK P^J P^K
    dmu/ds  =  1/4 G2_J mu P^J - 1/8 G3_J mu^2 d_q P^J
"""
from dataclasses import dataclass, field
from math import factorial, comb
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline, RectBivariateSpline
from scipy.special import beta as beta_fn, betainc, erfc

from . import _numerics as nm
from .model import Direction, WaveSystemCoefficients, angular_coefficients, builtin_system

JET_ORDER = 3
DELTA0_CAP = 0.99
AMP_FLOOR = 1e-14


# ------------------------------------------------------------ scattering data

@dataclass
class ScatteringData:
    """Radiation-field seed A(q, omega).

    ``jet(q, omega)`` returns the stack ``[A, A_q, A_qq, A_qqq]`` and
    ``tail(q, omega)`` the exact integral of A from -infinity to q.
    """

    kind: str
    jet: Callable
    tail: Callable
    gamma_plus: float
    gamma_minus: float
    q_support_cut: float
    params: dict = field(default_factory=dict)
    isotropic: bool = False  # A does not depend on omega

    def __post_init__(self):
        if not self.gamma_plus > 1:
            raise ValueError(f"gamma_plus must exceed 1, got {self.gamma_plus}")
        if not self.gamma_minus > 2:
            raise ValueError(f"gamma_minus must exceed 2, got {self.gamma_minus}")

    def A(self, q, omega=None):
        return self.jet(np.asarray(q, dtype=float), omega)[0]

    def decay_constants(self, q=None, omega=None):
        """Fitted C_a with |d^a A| <= C_a <q>^{-a-gamma_sgn(q)} on a sample grid."""
        if q is None:
            q = np.linspace(-40, 40, 4001)
        jet = self.jet(q, omega)
        gam = np.where(q >= 0, self.gamma_plus, self.gamma_minus)
        return [float(np.max(np.abs(jet[a]) * nm.bracket(q) ** (a + gam))) for a in range(JET_ORDER + 1)]


def _angular(angular, omega):
    return 1.0 if angular is None or omega is None else float(angular(omega))


def gaussian_data(amp=-1.0, center=0.0, width=1.0, gamma_plus=1.5, gamma_minus=2.5, angular=None):
    """A = amp * a(omega) * exp(-((q - center)/width)^2)."""
    if width <= 0:
        raise ValueError("width must be positive")

    def jet(q, omega=None):
        q = np.asarray(q, dtype=float)
        x = (q - center) / width
        e = np.exp(-x * x) * amp * _angular(angular, omega)
        h_prev, h = np.ones_like(x), 2 * x
        out = np.empty((JET_ORDER + 1,) + x.shape)
        out[0] = e
        for n in range(1, JET_ORDER + 1):
            out[n] = (-1) ** n * h * e / width**n
            h_prev, h = h, 2 * x * h - 2 * n * h_prev
        return out

    def tail(q, omega=None):
        x = (np.asarray(q, dtype=float) - center) / width
        return amp * _angular(angular, omega) * width * np.sqrt(np.pi) / 2 * erfc(-x)

    cut = abs(center) + width * np.sqrt(max(np.log(max(abs(amp), AMP_FLOOR) / AMP_FLOOR), 0.0))
    return ScatteringData("gaussian", jet, tail, gamma_plus, gamma_minus, cut,
                          {"amp": amp, "center": center, "width": width}, angular is None)


def polynomial_data(amp=-1.0, power=2.5, gamma_plus=1.5, gamma_minus=2.5, angular=None):
    """A = amp * a(omega) * <q>^{-power}."""
    if power <= 1:
        raise ValueError("power must exceed 1 for an integrable profile")

    def jet(q, omega=None):
        q = np.asarray(q, dtype=float)
        y = np.zeros((JET_ORDER + 1,) + q.shape)
        y[0], y[1], y[2] = 1 + q * q, 2 * q, 2.0
        return amp * _angular(angular, omega) * nm.jet_powr(y, -power / 2)

    def tail(q, omega=None):
        q = np.asarray(q, dtype=float)
        a, b = (power - 1) / 2, 0.5
        half = 0.5 * beta_fn(a, b) * betainc(a, b, 1.0 / (1.0 + q * q))
        full = beta_fn(a, b)
        val = np.where(q <= 0, half, full - half)
        return amp * _angular(angular, omega) * val

    cut = float(np.sqrt(max((max(abs(amp), AMP_FLOOR) / AMP_FLOOR) ** (2 / power) - 1, 0.0)))
    return ScatteringData("polynomial_decay", jet, tail, gamma_plus, gamma_minus, cut,
                          {"amp": amp, "power": power}, angular is None)


def table_data(q_nodes, values, gamma_plus=1.5, gamma_minus=2.5):
    """Cubic-spline profile through tabulated values, zero outside the table."""
    q_nodes = np.asarray(q_nodes, dtype=float)
    spline = CubicSpline(q_nodes, np.asarray(values, dtype=float))
    derivs = [spline] + [spline.derivative(n) for n in range(1, JET_ORDER + 1)]
    lo, hi = q_nodes[0], q_nodes[-1]

    def jet(q, omega=None):
        q = np.asarray(q, dtype=float)
        inside = (q >= lo) & (q <= hi)
        return np.stack([np.where(inside, d(np.clip(q, lo, hi)), 0.0) for d in derivs])

    def tail(q, omega=None):
        q = np.asarray(q, dtype=float)
        part = np.vectorize(lambda x: spline.integrate(lo, min(x, hi)))
        return np.where(q <= lo, 0.0, part(q))

    cut = float(max(abs(lo), abs(hi)))
    return ScatteringData("table", jet, tail, gamma_plus, gamma_minus, cut, isotropic=True)


def zero_data(gamma_plus=1.5, gamma_minus=2.5):
    def jet(q, omega=None):
        return np.zeros((JET_ORDER + 1,) + np.shape(q))

    def tail(q, omega=None):
        return np.zeros(np.shape(q))

    return ScatteringData("zero", jet, tail, gamma_plus, gamma_minus, 0.0, isotropic=True)


# ---------------------------------------------------------- reduced solution

def _rational_s(N, alpha, beta, s, a):
    """q-jet of d_s^a [N / (alpha + beta s)] with N, beta jets and alpha a number."""
    D = beta * s
    D[0] = D[0] + alpha
    out = nm.jet_mul(N, nm.jet_pow(D, -(a + 1)))
    if a:
        out = (-1) ** a * factorial(a) * nm.jet_mul(out, nm.jet_pow(beta, a))
    return out


class ReducedSolution:
    """A solution (mu, U) of the reduced system, evaluated pointwise.

    Closed-form kinds evaluate through q-jets of the seed, so q- and
    s-derivatives are exact; omega-derivatives use 5-point stencils along
    geodesics of the sphere.
    """

    omega_step = 1e-2

    def __init__(self, kind, system, data: ScatteringData, coefficient: Callable, delta0: float,
                 isotropic=False):
        self.kind = kind
        # seed and coefficient independent of omega: only explicit linear factors carry angles
        self.isotropic = bool(isotropic and data.isotropic)
        self.system = system
        self.data = data
        self.coefficient = coefficient
        self.delta0 = delta0
        self.s_min = -delta0
        self.M = system.M

    # -- field jets -----------------------------------------------------
    def _seed(self, q, omega, order=JET_ORDER):
        return self.data.jet(q, omega.omega)[: order + 1]

    def _mu_jet(self, s, q, omega, a, order=JET_ORDER):
        A = self._seed(q, omega, order)
        c = self.coefficient(omega)
        if self.kind == "closed_semilinear":
            return nm.jet_const(-2.0 if a == 0 else 0.0, np.zeros_like(A) + 0 * s)
        if self.kind == "closed_quasilinear_grad":
            return _rational_s(nm.jet_const(4.0, A), -2.0, c * A, s, a)
        return _rational_s(nm.jet_const(-2.0, A), 1.0, c * A, s, a)

    def _Uq_jet(self, s, q, omega, a, order=JET_ORDER):
        """Jet stack of d_s^a U_q with shape (order+1, M, ...)."""
        A = self._seed(q, omega, order)
        c = self.coefficient(omega)
        if self.kind == "closed_semilinear":
            return _rational_s(2 * A, 2.0, -c * A, s, a)[:, None]
        jet = np.einsum("m,k...->km...", self.linear_factor(omega), A)
        return jet * (0.0 if a else 1.0) + 0 * np.asarray(s)

    def linear_factor(self, omega):
        """Vector c with U_q ~ c * A as A -> 0."""
        if self.kind == "closed_semilinear":
            return np.ones(1)
        if self.kind == "closed_quasilinear_grad":
            return -omega.omega_hat
        return np.concatenate([[1.0], omega.omega])

    def _field_jet(self, name, s, q, omega, a, order=JET_ORDER):
        if name == "mu":
            return self._mu_jet(s, q, omega, a, order)
        if name == "U_q":
            return self._Uq_jet(s, q, omega, a, order)
        if name == "muU_q":
            out = 0.0
            for j in range(a + 1):
                mu = self._mu_jet(s, q, omega, j, order)
                uq = self._Uq_jet(s, q, omega, a - j, order)
                out = out + comb(a, j) * nm.jet_mul(mu[:, None], uq)
            return out
        raise ValueError(f"unknown field {name!r}")

    def _U(self, s, q, omega, a):
        q = np.asarray(q, dtype=float)
        s_arr = np.broadcast_to(np.asarray(s, dtype=float), q.shape)
        if q.ndim == 2 and np.all(q == q[:1]) and np.all(s_arr == s_arr[:, :1]):
            return self._U_outer(s_arr[:, 0], q[0], omega, a)
        out = np.zeros((self.M,) + q.shape)
        for sv in np.unique(s_arr):
            sel = s_arr == sv
            out[:, sel] = self._U_outer(np.array([sv]), q[sel], omega, a)[:, 0]
        return out

    def _U_outer(self, s_vec, q_vec, omega, a):
        """U-type integrals on the outer product s_vec x q_vec, shape (M, n_s, n_q)."""
        lo = -self.data.q_support_cut
        sv = np.asarray(s_vec, dtype=float)[:, None]
        if self.kind != "closed_semilinear":
            # U_q = c(omega) A exactly, so U is c(omega) times the seed's own antiderivative
            c = self.linear_factor(omega)[:, None, None] * (1.0 if a == 0 else 0.0)
            return c * self.data.tail(q_vec, omega.omega)[None, None, :] + 0 * sv[None]

        def integrand(p):
            return np.moveaxis(self._Uq_jet(sv, p[None, :], omega, a, order=0)[0], 0, 1)

        # the seed is below the amplitude floor outside [lo, -lo]
        val = nm.cumulative_quad(integrand, np.clip(q_vec, lo, -lo), lo)
        val = np.moveaxis(val, 0, 1)
        if a == 0:
            c = self.linear_factor(omega)[:, None, None]
            base = c * self.data.tail(np.minimum(q_vec, lo), omega.omega)[None, None, :]
            val = np.where(q_vec[None, None, :] > lo, val + base, base)
        return val

    def _value(self, name, s, q, omega, a, b):
        q = np.asarray(q, dtype=float)
        s = np.asarray(s, dtype=float)
        shape = np.broadcast_shapes(q.shape, s.shape)
        qb, sb = np.broadcast_to(q, shape), np.broadcast_to(s, shape)
        if name == "U":
            if b == 0:
                return self._U(sb, qb, omega, a)
            return self._value("U_q", sb, qb, omega, a, b - 1)
        if b > JET_ORDER:
            raise ValueError(f"q-derivatives are available up to order {JET_ORDER}")
        if qb.ndim == 2 and shape[0] > 1 and np.all(qb == qb[:1]) and np.all(sb == sb[:, :1]):
            # outer grid: evaluate the seed once per q column
            jet = self._field_jet(name, sb[:, :1], qb[:1], omega, a, b)
            return np.broadcast_to(jet[b], jet.shape[1:-2] + shape).copy()
        jet = self._field_jet(name, sb, qb, omega, a, b)
        return jet[b]

    # -- public evaluation --------------------------------------------
    def derivative(self, name, s, q, omega: Direction, ds=0, dq=0, domega=()):
        """d_s^ds d_q^dq of field ``name`` with omega-derivatives along tangent axes.

        ``domega`` lists tangent-basis indices (0 or 1), e.g. ``(0, 1)``.
        """
        if len(domega) == 0:
            return self._value(name, s, q, omega, ds, dq)
        if len(domega) > 2:
            raise ValueError("omega-derivatives are available up to order 2")
        if self.isotropic and (name == "mu" or self.kind == "closed_semilinear"):
            return np.zeros_like(self._value(name, s, q, omega, ds, dq))
        h = self.omega_step
        d1 = np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12]) / h
        d2 = np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]) / h**2
        offs = np.arange(-2, 3) * h

        def along(vec, w):
            acc = 0.0
            for o, c in zip(offs, w):
                if c == 0.0:
                    continue
                acc = acc + c * self._value(name, s, q, omega.moved(o * vec[0], o * vec[1]), ds, dq)
            return acc

        if len(domega) == 1:
            e = np.eye(2)[domega[0]]
            return along(e, d1)
        i, j = domega
        if i == j:
            return along(np.eye(2)[i], d2)
        return (along(np.array([1.0, 1.0]), d2) - along(np.array([1.0, -1.0]), d2)) / 4

    def mu(self, s, q, omega):
        return self._value("mu", s, q, omega, 0, 0)

    def mu_q(self, s, q, omega):
        return self._value("mu", s, q, omega, 0, 1)

    def mu_s(self, s, q, omega):
        return self._value("mu", s, q, omega, 1, 0)

    def U(self, s, q, omega):
        return self._value("U", s, q, omega, 0, 0)

    def U_q(self, s, q, omega):
        return self._value("U_q", s, q, omega, 0, 0)

    def muU_q(self, s, q, omega):
        return self._value("muU_q", s, q, omega, 0, 0)

    def W(self, s, q, omega):
        """Antiderivative W with W_q = 2 U_(0) / mu."""
        s = float(s)
        lo = -self.data.q_support_cut

        def integrand(p):
            return 2 * self.U(s, p, omega)[0] / self.mu(s, p, omega)

        return nm.cumulative_quad(integrand, np.maximum(q, lo), lo, max_panel=0.05)


def _check_sign(data, coefficient, sign, omegas, q=None, label=""):
    """Require sign * coefficient(omega) * A(q, omega) >= 0 on a sample grid."""
    if q is None:
        L = max(data.q_support_cut, 1.0)
        q = np.concatenate([-np.geomspace(L, 1e-3, 800), np.linspace(-1e-3, 1e-3, 5),
                            np.geomspace(1e-3, L, 800)])
    worst = None
    for om in omegas:
        v = sign * coefficient(om) * data.A(q, om.omega)
        if np.min(v) < -1e-15:
            i = int(np.argmin(v))
            worst = (float(q[i]), om.omega.tolist())
            raise ValueError(f"sign condition {label} violated at q={worst[0]:.6g}, omega={worst[1]}")
    return q


def _default_omegas():
    from .model import sphere_directions
    return sphere_directions(16)


def _delta0(data, coefficient, scale, omegas, q):
    peak = max(float(np.max(np.abs(scale * coefficient(om) * data.A(q, om.omega)))) for om in omegas)
    return DELTA0_CAP if peak == 0 else min(1.0 / peak, DELTA0_CAP)


def _as_callable(c):
    return c if callable(c) else (lambda omega, c=float(c): c)


def _wrap(c):
    f = _as_callable(c)
    return lambda om: float(f(om.omega if isinstance(om, Direction) else om))


def closed_form_semilinear(data: ScatteringData, F=1.0, omegas=None) -> ReducedSolution:
    """mu = -2, U_q = 2A / (2 - F A s)."""
    coef = _wrap(F)
    omegas = omegas or _default_omegas()
    q = _check_sign(data, coef, -1.0, omegas, label="F*A <= 0")
    d0 = _delta0(data, coef, 1.0, omegas, q)
    return ReducedSolution("closed_semilinear", builtin_system("semilinear_ut2"), data, coef, d0,
                           not callable(F))


def closed_form_quasilinear_grad(data: ScatteringData, G=1.0, omegas=None) -> ReducedSolution:
    """mu = 4 / (G A s - 2), U_(a) = -omega_hat_a * int A."""
    coef = _wrap(G)
    omegas = omegas or _default_omegas()
    q = _check_sign(data, coef, -1.0, omegas, label="G*A <= 0")
    d0 = _delta0(data, coef, 1.0, omegas, q)
    return ReducedSolution("closed_quasilinear_grad", builtin_system("quasilinear_grad"), data, coef, d0,
                           not callable(G))


def closed_form_euler(data: ScatteringData, cs1=0.0, omegas=None) -> ReducedSolution:
    """mu = -2 / ((1 + cs1) A s + 1), (U^0, U^a) = (int A, omega_a int A)."""
    k = 1.0 + float(cs1)
    coef = _wrap(k)
    omegas = omegas or _default_omegas()
    q = _check_sign(data, coef, 1.0, omegas, label="(1+cs1)*A >= 0")
    d0 = _delta0(data, coef, 2.0, omegas, q)
    return ReducedSolution("closed_euler", builtin_system("euler", {"cs1": cs1}), data, coef, d0, True)


# ------------------------------------------------------------- numeric grids

@dataclass
class ReducedGrid:
    s_nodes: np.ndarray
    q_nodes: np.ndarray
    omega_nodes: list
    mu: np.ndarray          # (n_s, n_omega, n_q)
    muU_q: np.ndarray       # (n_s, n_omega, M, n_q)
    U: np.ndarray           # (n_s, n_omega, M, n_q)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.s_nodes = np.atleast_1d(np.asarray(self.s_nodes, dtype=float))
        self.q_nodes = np.asarray(self.q_nodes, dtype=float)
        if np.any(np.diff(self.s_nodes) <= 0) or np.any(np.diff(self.q_nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")

    @property
    def U_q(self):
        return self.muU_q / self.mu[:, :, None, :]


def sample_grid(sol: ReducedSolution, s_nodes, q_nodes, omega_nodes) -> ReducedGrid:
    s_nodes = np.atleast_1d(np.asarray(s_nodes, dtype=float))
    q_nodes = np.asarray(q_nodes, dtype=float)
    ns, nw, nq = len(s_nodes), len(omega_nodes), len(q_nodes)
    mu = np.empty((ns, nw, nq))
    P = np.empty((ns, nw, sol.M, nq))
    U = np.empty((ns, nw, sol.M, nq))
    for i, s in enumerate(s_nodes):
        for j, om in enumerate(omega_nodes):
            mu[i, j] = sol.mu(s, q_nodes, om)
            P[i, j] = sol.muU_q(s, q_nodes, om)
            U[i, j] = sol.U(s, q_nodes, om)
    return ReducedGrid(s_nodes, q_nodes, list(omega_nodes), mu, P, U)


def reduced_rhs(mu_slice, muUq_slice, direction: Direction, ang, q_nodes, stencil=None):
    """Right-hand side of the reduced system on one q-grid for one direction."""
    mu = np.asarray(mu_slice, dtype=float)
    P = np.atleast_2d(np.asarray(muUq_slice, dtype=float))
    q_nodes = np.asarray(q_nodes, dtype=float)
    if mu.shape[-1] != P.shape[-1] or mu.shape[-1] != q_nodes.size:
        raise ValueError("mu, mu*U_q and q_nodes must have the same length")
    D = stencil or nm.Stencil(q_nodes)
    dP = -0.25 * np.einsum("ijk,jq,kq->iq", ang.F2, P, P)
    dmu = 0.25 * (ang.G2 @ P) * mu
    if np.any(ang.G3 != 0):
        dmu = dmu - 0.125 * (ang.G3 @ D(P)) * mu**2
    return dmu, dP


def _blowup_estimate(s, y, dy):
    grow = (y * dy > 0) & np.isfinite(y) & np.isfinite(dy)
    if not np.any(grow):
        return None
    return float(s + np.min(np.abs(y[grow] / dy[grow])))


def integrate_reduced(system: WaveSystemCoefficients, init: ReducedGrid, s_span, steps=64,
                      blowup_threshold=1e6, u_offset=None, estimate_error=True) -> ReducedGrid:
    """Classical RK4 in s on (mu, mu*U_q) for every stored direction.

    ``u_offset`` of shape (n_omega, M) is the value of U at the first q-node
    (taken from the initial grid when omitted).  An error estimate from a
    half-step-count rerun is stored in ``info['richardson_error']``.
    """
    if steps < 8:
        raise ValueError("need at least 8 steps")
    s0, s1 = map(float, s_span)
    mu0 = init.mu[0]
    if np.any(mu0 >= 0):
        raise ValueError("mu must be negative at the initial slice")
    q = init.q_nodes
    D = nm.Stencil(q)
    angs = [angular_coefficients(system, om) for om in init.omega_nodes]
    G2 = np.stack([a.G2 for a in angs])
    G3 = np.stack([a.G3 for a in angs])
    F2 = np.stack([a.F2 for a in angs])
    use_g3 = bool(np.any(G3 != 0))

    def rhs(mu, P):
        dP = -0.25 * np.einsum("wijk,wjq,wkq->wiq", F2, P, P)
        dmu = 0.25 * np.einsum("wj,wjq->wq", G2, P) * mu
        if use_g3:
            dmu = dmu - 0.125 * np.einsum("wj,wjq->wq", G3, D(P)) * mu**2
        return dmu, dP

    def run(n):
        h = (s1 - s0) / n
        mu, P = mu0.copy(), init.muU_q[0].copy()
        mus, Ps, ss = [mu], [P], [s0]
        info = {"blowup": False, "s_blowup": None}
        for k in range(n):
            s = s0 + k * h
            k1 = rhs(mu, P)
            k2 = rhs(mu + h / 2 * k1[0], P + h / 2 * k1[1])
            k3 = rhs(mu + h / 2 * k2[0], P + h / 2 * k2[1])
            k4 = rhs(mu + h * k3[0], P + h * k3[1])
            mu_n = mu + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            P_n = P + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            scale = blowup_threshold * (1 + np.max(np.abs(init.muU_q[0])) + np.max(np.abs(mu0)))
            bad = (not np.all(np.isfinite(mu_n)) or not np.all(np.isfinite(P_n))
                   or np.any(mu_n >= 0) or np.max(np.abs(P_n)) > scale or np.max(np.abs(mu_n)) > scale)
            if bad:
                dmu, dP = k1
                ests = [e for e in (_blowup_estimate(s, P, dP), _blowup_estimate(s, mu, dmu)) if e]
                info = {"blowup": True, "s_blowup": min(ests) if ests else s + h}
                break
            mu, P = mu_n, P_n
            mus.append(mu)
            Ps.append(P)
            ss.append(s + h)
        return np.array(ss), np.stack(mus), np.stack(Ps), info

    ss, mus, Ps, info = run(steps)
    if estimate_error and not info["blowup"] and steps % 2 == 0:
        _, mus2, Ps2, info2 = run(steps // 2)
        if not info2["blowup"]:
            err = max(np.max(np.abs(mus[::2] - mus2)), np.max(np.abs(Ps[::2] - Ps2)))
            info["richardson_error"] = float(err) / 15.0
    offset = init.U[0][:, :, 0] if u_offset is None else np.asarray(u_offset)
    Uq = Ps / mus[:, :, None, :]
    U = cumulative_simpson(Uq, x=q, axis=-1, initial=0.0) + offset[None, :, :, None]
    info["steps"] = steps
    return ReducedGrid(ss, q, list(init.omega_nodes), mus, Ps, U, info)


class NumericSolution:
    """Spline interpolant of a ReducedGrid, one bicubic per direction."""

    kind = "numeric"

    def __init__(self, grid: ReducedGrid, system: WaveSystemCoefficients):
        if len(grid.s_nodes) < 4:
            raise ValueError("need at least 4 s-nodes for bicubic interpolation")
        self.grid = grid
        self.system = system
        self.M = system.M
        self.s_min = float(grid.s_nodes[0])
        s, q = grid.s_nodes, grid.q_nodes
        self._splines = []
        for j in range(len(grid.omega_nodes)):
            sp = {"mu": [RectBivariateSpline(s, q, grid.mu[:, j])],
                  "U": [RectBivariateSpline(s, q, grid.U[:, j, m]) for m in range(self.M)],
                  "U_q": [RectBivariateSpline(s, q, grid.U_q[:, j, m]) for m in range(self.M)],
                  "muU_q": [RectBivariateSpline(s, q, grid.muU_q[:, j, m]) for m in range(self.M)]}
            self._splines.append(sp)

    def _index(self, omega):
        for j, om in enumerate(self.grid.omega_nodes):
            if np.allclose(om.omega, omega.omega, atol=1e-12):
                return j
        raise ValueError("direction is not a node of the numeric grid")

    def derivative(self, name, s, q, omega, ds=0, dq=0, domega=()):
        if domega:
            raise ValueError("numeric solutions carry no omega-derivatives")
        sp = self._splines[self._index(omega)][name]
        q = np.asarray(q, dtype=float)
        s = np.broadcast_to(np.asarray(s, dtype=float), q.shape)
        vals = [f.ev(s, q, dx=ds, dy=dq) for f in sp]
        return vals[0] if name == "mu" else np.stack(vals)

    def mu(self, s, q, omega):
        return self.derivative("mu", s, q, omega)

    def mu_q(self, s, q, omega):
        return self.derivative("mu", s, q, omega, dq=1)

    def mu_s(self, s, q, omega):
        return self.derivative("mu", s, q, omega, ds=1)

    def U(self, s, q, omega):
        return self.derivative("U", s, q, omega)

    def U_q(self, s, q, omega):
        return self.derivative("U_q", s, q, omega)

    def muU_q(self, s, q, omega):
        return self.derivative("muU_q", s, q, omega)


# ------------------------------------------------------------- shock times

def hormander_shock_time(V0, family="burgers", F=1.0, dV0=None, support=(-10.0, 10.0), nodes=4096,
                         slope_tol=1e-10):
    """Blow-up time of the model asymptotic equations seeded by V0.

    burgers: characteristics of (2 d_s + V d_q) V = 0 cross first at
    min -2 / V0'; riccati: 2 d_s V = F V^2 blows up at min 2 / (F V0).
    """
    q = np.linspace(support[0], support[1], nodes)
    v = np.asarray(V0(q), dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite V0 samples")
    if family == "burgers":
        dv = np.asarray(dV0(q), dtype=float) if dV0 is not None else nm.Stencil(q)(v)
        if not np.all(np.isfinite(dv)):
            raise ValueError("non-finite V0' samples")
        neg = dv < -slope_tol
        return float(np.min(-2.0 / dv[neg])) if np.any(neg) else float("inf")
    if family == "riccati":
        fv = float(F) * v
        pos = fv > slope_tol
        return float(np.min(2.0 / fv[pos])) if np.any(pos) else float("inf")
    raise ValueError(f"unknown family {family!r}; expected burgers or riccati")


# ------------------------------------------------------------- constraints

def constraint_values(family, U_q, omega: Direction) -> dict:
    """Sup norms of the algebraic constraints carried by U_q (shape (M, ...))."""
    U_q = np.asarray(U_q, dtype=float)
    if family in ("quasilinear_grad", "closed_quasilinear_grad"):
        w = omega.omega_hat
        worst = 0.0
        for a in range(4):
            for b in range(a + 1, 4):
                worst = max(worst, float(np.max(np.abs(w[a] * U_q[b] - w[b] * U_q[a]))))
        return {"collinear_with_omega_hat": worst}
    if family in ("euler", "closed_euler"):
        w = omega.omega
        rho, v = U_q[0], U_q[1:4]
        c1 = np.max(np.abs(rho - np.einsum("c,c...->...", w, v)))
        c2 = max(float(np.max(np.abs(v[a] - w[a] * rho))) for a in range(3))
        c3 = max(float(np.max(np.abs(w[a] * v[b] - w[b] * v[a]))) for a in range(3) for b in range(3))
        return {"density_equals_radial_velocity": float(c1), "velocity_along_omega": c2,
                "velocity_collinear": c3}
    raise ValueError(f"system {family!r} carries no constraints")


def constraint_residual(sol, grid: ReducedGrid) -> dict:
    """Maximum constraint violation of ``sol`` (or of ``grid`` if sol is None)."""
    family = sol.kind if sol is not None else grid.info.get("system")
    if family in ("closed_semilinear", "semilinear_ut2", None):
        raise ValueError("system carries no constraints")
    out: dict = {}
    for j, om in enumerate(grid.omega_nodes):
        for i, s in enumerate(grid.s_nodes):
            uq = sol.U_q(s, grid.q_nodes, om) if sol is not None else grid.U_q[i, j]
            for k, v in constraint_values(family, uq, om).items():
                out[k] = max(out.get(k, 0.0), v)
    return out
