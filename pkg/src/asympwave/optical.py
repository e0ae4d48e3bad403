"""Approximate optical function by the method of characteristics.

``q`` solves ``q_t - q_r = mu(eps ln t - delta, q, omega)`` for r > t/2 with
``q = -r`` on the cone ``t = 2r``; inside ``r < t/2`` it is extended by
``q = r - t``.  Along the incoming characteristic through (t, r) we write
``p = r + t - 2 tau`` and ``z = p + zeta``; then ``d zeta/dp = -(mu + 2)/2``
with ``zeta = 0`` on the cone.  The mesh is uniform in ``asinh(p)`` so the
steps are fine where the profile lives (|z| of order one) and coarse far out.

``nu = q_t + q_r`` obeys ``d nu/d tau = mu_q nu + eps mu_s / tau``.  On the
cone, tangency of ``2 d_t + d_r`` gives ``2 q_t + q_r = -1``, hence the seed
``nu = -(2 + mu)/3``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _numerics as nm
from .model import Direction


@dataclass
class OpticalParams:
    epsilon: float = 0.02
    delta: float = 0.25
    delta0: float = 0.99
    T_eps: float = None

    def __post_init__(self):
        if not 0 < self.epsilon <= 0.5:
            raise ValueError("epsilon must lie in (0, 0.5]")
        if not 0 < self.delta < self.delta0:
            raise ValueError("delta must lie strictly between 0 and delta0")
        if self.T_eps is None:
            self.T_eps = 1.0 / self.epsilon
        if not self.epsilon * np.log(self.T_eps) - self.delta > -self.delta0:
            raise ValueError("slow time at T_eps falls below -delta0")

    @classmethod
    def for_solution(cls, sol, epsilon=0.02, delta=None):
        d0 = float(getattr(sol, "delta0", -sol.s_min))
        return cls(epsilon, d0 / 2 if delta is None else delta, d0)

    def s(self, t):
        return self.epsilon * np.log(t) - self.delta


def is_radial(sol, probes=6):
    from .model import sphere_directions
    oms = sphere_directions(probes)
    q = np.linspace(-6, 6, 25)
    ref = [sol.mu(0.5, q, oms[0]), sol.U_q(0.5, q, oms[0])]
    for om in oms[1:]:
        if not np.allclose(sol.mu(0.5, q, om), ref[0], rtol=0, atol=1e-14):
            return False
    # U_q may carry explicit omega factors; only the scalar seed matters for the chart
    return getattr(sol, "data", None) is None or all(
        np.allclose(sol.data.A(q, om.omega), sol.data.A(q, oms[0].omega), atol=1e-14) for om in oms)


def _march(t, r, omega, sol, params, steps, with_nu, scale=1.0):
    """RK4 along characteristics for every (t_i, r_i); returns (q, nu)."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    pb = -(r + t) / 3
    pe = r - t
    xb, xe = np.arcsinh(pb / scale), np.arcsinh(pe / scale)
    h = (xe - xb) / steps
    eps = params.epsilon

    def mu_fields(xi, zeta):
        p = scale * np.sinh(xi)
        tau = 0.5 * (r + t - p)
        s = eps * np.log(tau) - params.delta
        z = p + zeta
        if with_nu:
            mu = sol.mu(s, z, omega)
            return p, tau, mu, sol.mu_q(s, z, omega), sol.mu_s(s, z, omega)
        return p, tau, sol.mu(s, z, omega), None, None

    def rhs(xi, zeta, nu):
        p, tau, mu, mq, ms = mu_fields(xi, zeta)
        dp = scale * np.cosh(xi)
        dz = -0.5 * (mu + 2.0) * dp
        if not with_nu:
            return dz, 0.0
        dn = -0.5 * (mq * nu + eps * ms / tau) * dp
        return dz, dn

    zeta = np.zeros_like(t)
    _, _, mu_b, _, _ = mu_fields(xb, zeta)
    nu = -(2.0 + mu_b) / 3.0 if with_nu else np.zeros_like(t)
    xi = xb.copy()
    for _ in range(steps):
        k1 = rhs(xi, zeta, nu)
        k2 = rhs(xi + h / 2, zeta + h / 2 * k1[0], nu + h / 2 * k1[1])
        k3 = rhs(xi + h / 2, zeta + h / 2 * k2[0], nu + h / 2 * k2[1])
        k4 = rhs(xi + h, zeta + h * k3[0], nu + h * k3[1])
        zeta = zeta + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        nu = nu + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        xi = xi + h
    return pe + zeta, nu


def characteristics(t, r, omega: Direction, sol, params: OpticalParams, steps=128, tol=1e-8,
                    with_nu=True, max_steps=8192):
    """q and nu at the targets, with step doubling until the RK4 estimate meets ``tol``.

    Targets with r < t/2 take the extension q = r - t, nu = 0.
    Returns ``(q, nu, info)``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    t, r = np.broadcast_arrays(t, r)
    if np.any(t < params.T_eps * (1 - 1e-12)):
        raise ValueError(f"targets need t >= T_eps = {params.T_eps}")
    outer = r >= t / 2
    q = r - t
    nu = np.zeros_like(t)
    info = {"steps": steps, "error_estimate": 0.0}
    if np.any(outer):
        to, ro = t[outer], r[outer]
        n = steps
        q1, n1 = _march(to, ro, omega, sol, params, n, with_nu)
        while True:
            q2, n2 = _march(to, ro, omega, sol, params, 2 * n, with_nu)
            err = np.max(np.abs(q2 - q1) / nm.bracket(q2)) / 15.0
            if with_nu:
                nu_scale = np.max(np.abs(n2)) + 1e-14
                err = max(err, np.max(np.abs(n2 - n1)) / 15.0 / nu_scale)
            n *= 2
            q1, n1 = q2, n2
            if err < tol or n >= max_steps:
                break
        if err >= tol:
            raise RuntimeError(f"characteristic solve did not reach tolerance {tol} (estimate {err:.2e})")
        q[outer], nu[outer] = q1, n1
        info = {"steps": n, "error_estimate": float(err)}
    return q, nu, info


def solve_q(t, r, omega, sol, params, steps=128, tol=1e-8):
    return characteristics(t, r, omega, sol, params, steps, tol, with_nu=False)[0]


def transport_nu(t, r, omega, sol, params, steps=128, tol=1e-8):
    return characteristics(t, r, omega, sol, params, steps, tol, with_nu=True)[1]


def gradient(t, r, omega, sol, params, q=None, nu=None):
    """(q_t, q_r) from the eikonal split q_t - q_r = mu, q_t + q_r = nu."""
    if q is None or nu is None:
        q, nu, _ = characteristics(t, r, omega, sol, params)
    mu = sol.mu(params.s(t), q, omega)
    inner = np.asarray(r) < np.asarray(t) / 2
    q_t = np.where(inner, -1.0, 0.5 * (mu + nu))
    q_r = np.where(inner, 1.0, 0.5 * (nu - mu))
    return q_t, q_r


def invert_r(t, q_target, omega, sol, params, tol_rel=1e-9, max_iter=200):
    """r with q(t, r) = q_target via Newton steps safeguarded by a bisection bracket."""
    t = float(t)
    q_target = float(q_target)
    if q_target < -t / 2 - 1e-12:
        raise ValueError("q_target must be at least -t/2")
    tol = tol_rel * float(nm.bracket(q_target))

    def f(r):
        q, nu, _ = characteristics(t, r, omega, sol, params)
        q_t, q_r = gradient(t, r, omega, sol, params, q, nu)
        return float(q[0] - q_target), float(q_r[0])

    lo, hi = t / 2, 2 * t
    flo, _ = f(lo)
    fhi, _ = f(hi)
    grow = 0
    while fhi < 0:
        lo, flo = hi, fhi
        hi *= 2
        fhi, _ = f(hi)
        grow += 1
        if grow > 60:
            raise RuntimeError(f"bracket failure: last bounds [{lo}, {hi}]")
    if abs(flo) <= tol:
        return lo
    r = t + q_target if lo < t + q_target < hi else 0.5 * (lo + hi)
    for _ in range(max_iter):
        val, slope = f(r)
        if abs(val) <= tol:
            return r
        if val < 0:
            lo = r
        else:
            hi = r
        step = r - val / slope if slope > 0 else None
        r = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
    raise RuntimeError(f"inversion did not converge: bracket [{lo}, {hi}]")


@dataclass
class OpticalChart:
    t_nodes: np.ndarray
    r_nodes: np.ndarray          # shape (n_t, n_r), rows per time
    omegas: list
    q: np.ndarray                # (n_omega, n_t, n_r)
    nu: np.ndarray
    lam: np.ndarray              # (n_omega, n_t, n_r, 3)
    extension: np.ndarray        # (n_t, n_r) True where r < t/2
    params: OpticalParams
    meta: dict = field(default_factory=dict)


def build_chart(t_nodes, r_nodes, omegas, sol, params, steps=128, tol=1e-8, omega_step=1e-3):
    """Chart on rows ``r_nodes[i]`` at times ``t_nodes[i]`` for every direction."""
    t_nodes = np.asarray(t_nodes, dtype=float)
    r_nodes = np.asarray(r_nodes, dtype=float)
    if r_nodes.ndim == 1:
        r_nodes = np.broadcast_to(r_nodes, (t_nodes.size, r_nodes.size)).copy()
    T = np.broadcast_to(t_nodes[:, None], r_nodes.shape)
    radial = is_radial(sol)
    shape = (len(omegas),) + r_nodes.shape
    q = np.empty(shape)
    nu = np.empty(shape)
    lam = np.zeros(shape + (3,))
    errs, nsteps = [], []
    for j, om in enumerate(omegas):
        if radial and j > 0:
            q[j], nu[j] = q[0], nu[0]
            continue
        qq, nn, info = characteristics(T.ravel(), r_nodes.ravel(), om, sol, params, steps, tol)
        q[j], nu[j] = qq.reshape(r_nodes.shape), nn.reshape(r_nodes.shape)
        errs.append(info["error_estimate"])
        nsteps.append(info["steps"])
        if not radial:
            # angular part of the gradient by central differences on the sphere
            for e, sgn in zip(om.tangent_basis(), (0, 1)):
                hp = om.moved(omega_step * (1 - sgn), omega_step * sgn)
                hm = om.moved(-omega_step * (1 - sgn), -omega_step * sgn)
                qp = characteristics(T.ravel(), r_nodes.ravel(), hp, sol, params, steps, tol, False)[0]
                qm = characteristics(T.ravel(), r_nodes.ravel(), hm, sol, params, steps, tol, False)[0]
                dq = ((qp - qm) / (2 * omega_step)).reshape(r_nodes.shape)
                lam[j] += (dq / r_nodes)[..., None] * e
    meta = {"radial": radial, "error_estimate": max(errs), "steps": max(nsteps)}
    return OpticalChart(t_nodes, r_nodes, list(omegas), q, nu, lam, r_nodes < T / 2, params, meta)


def q_deviation_report(chart: OpticalChart, gammas) -> dict:
    """Fitted constants for |q - (r - t)| and for the ratio <q>/<r - t>."""
    if chart.q.size == 0:
        raise ValueError("empty chart")
    gm = float(gammas[1])
    eps = chart.params.epsilon
    T = np.broadcast_to(chart.t_nodes[:, None], chart.r_nodes.shape)
    rmt = chart.r_nodes - T
    dev = np.abs(chart.q - rmt[None])
    env = nm.bracket(np.maximum(0.0, -chart.q)) ** (1 - gm)
    ratio = np.max(dev / env, axis=(0, 2))
    tr = np.max(T + chart.r_nodes, axis=1)
    if np.all(ratio == 0):
        growth, const = 0.0, 0.0
    else:
        good = ratio > 0
        slope = np.polyfit(np.log(tr[good]), np.log(ratio[good]), 1)[0] if good.sum() > 1 else 0.0
        growth = max(0.0, float(slope))
        const = float(np.max(ratio / tr**growth))
    log_ratio = np.abs(np.log(nm.bracket(chart.q) / nm.bracket(rmt)[None]))
    c_two_sided = float(np.max(log_ratio / (eps * np.log(T + chart.r_nodes))[None]))
    # diagnostic: growth of the per-time maximum in eps ln t, allowing a constant prefactor
    per_t = np.max(log_ratio, axis=(0, 2))
    slope = np.polyfit(eps * np.log(chart.t_nodes), per_t, 1)[0] if chart.t_nodes.size > 1 else 0.0
    return {"deviation_constant": const, "deviation_growth_exponent": growth,
            "deviation_C": growth / eps, "two_sided_C": c_two_sided,
            "two_sided_slope": float(slope),
            "max_deviation": float(np.max(dev))}


def eikonal_residual(t, r, omega, sol, params, q=None, nu=None):
    """g(u, du)(dq, dq) for u = eps U / r along the direction omega (radial chart)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(np.abs(r - t) > t / 2):
        raise ValueError("eikonal residual is defined for |r - t| <= t/2")
    if q is None or nu is None:
        q, nu, _ = characteristics(t, r, omega, sol, params)
    q_t, q_r = gradient(t, r, omega, sol, params, q, nu)
    s = params.s(t)
    eps = params.epsilon
    U = sol.U(s, q, omega)
    Uq = sol.U_q(s, q, omega)
    Us = sol.derivative("U", s, q, omega, ds=1)
    u = eps * U / r
    du_t = eps / r * (eps * Us / t + Uq * q_t)
    du_r = -eps * U / r**2 + eps / r * Uq * q_r
    w = omega.omega
    du = np.stack([du_t] + [du_r * w[i] for i in range(3)], axis=1)
    g = sol.system.metric_closure(u, du)
    dq = np.stack([q_t] + [q_r * w[i] for i in range(3)])
    return np.einsum("ab...,a...,b...->...", g, dq, dq)
