"""Backward matching solve for the radial semilinear equation Box u = u_t^2.

With v = u - u_app and Phi = r v the modified equation becomes the 1-D wave
equation

    Phi_tt = Phi_rr - r * RHS,
    RHS = 2 (u_app)_t v_t + v_t^2 - chi(t/T) R_app,

where R_app = Box u_app - (u_app)_t^2 is evaluated in closed form from the
reduced profile (no finite differences of u_app).  Leapfrog runs from
t = 2T, where Phi and Phi_t vanish, down to t_min.
"""
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline

from . import _numerics as nm
from .energy import WeightParams, weight_eval
from .profile import ProfileField, cutoff_jet

CFL_MAX = 0.9
BLOWUP_FACTOR = 1e3


def chi_cutoff(s):
    """1 on |s| <= 1, 0 on |s| >= 2, smooth and monotone in between."""
    return nm.smoothstep(2.0 - np.abs(np.asarray(s, dtype=float)))


@dataclass
class GridSpec:
    dr: float = 1 / 22
    dt: float = 0.04
    max_nodes: int = 40_000

    @property
    def cfl(self):
        return self.dt / self.dr

    def halved(self):
        return GridSpec(self.dr / 2, self.dt / 2, self.max_nodes)


@dataclass
class BackwardRun:
    T: float
    t_min: float
    r_max: float
    grid: GridSpec
    r_nodes: np.ndarray
    history: dict  # t, energy_w0, sup_v
    snapshots: dict = field(default_factory=dict)  # t -> (v, v_t, v_r)
    epsilon: float = 0.02
    runtime: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def energy_fit(self, t_lo, t_hi):
        from .profile import fit_decay_exponent

        t, e = self.history["t"], self.history["energy_w0"]
        sel = (t >= t_lo * (1 - 1e-9)) & (t <= t_hi * (1 + 1e-9)) & (e > 0)
        return fit_decay_exponent(list(zip(t[sel], e[sel])))


class SemilinearSource:
    """R_app and (u_app)_t for the radial semilinear profile, in closed form.

    U, U_s, U_ss come from a bicubic table on (s, q); U_q and U_sq come
    straight from the closed-form jets, since the leading parts of R_app
    cancel between them.
    """

    def __init__(self, field_: ProfileField, t_lo, t_hi, n_s=129, n_q=4001):
        sol = field_.sol
        if sol.kind != "closed_semilinear":
            raise ValueError("the backward solve is implemented for the semilinear family only")
        self.f = field_
        self.sol = sol
        P = field_.params
        self.eps = P.epsilon
        s_lo, s_hi = P.s(t_lo) - 1e-3, P.s(t_hi) + 1e-3
        self.s_grid = np.linspace(max(s_lo, sol.s_min), s_hi, n_s)
        # a zero seed has no support; any nondegenerate table range works
        self.cut = max(sol.data.q_support_cut, 1.0)
        self.q_grid = np.linspace(-self.cut, self.cut, n_q)
        om = field_.omega
        self.tables = [RectBivariateSpline(self.s_grid, self.q_grid,
                                           sol._U_outer(self.s_grid, self.q_grid, om, a)[0], kx=3, ky=3)
                       for a in range(3)]

    def U_derivs(self, s, q):
        # U, U_s, U_ss are constant in q outside [-cut, cut]: evaluate the table only inside
        inside = np.abs(q) < self.cut
        qi = q[inside]
        order = np.argsort(qi, kind="stable")
        sv = np.array([s])
        edges = np.array([-self.cut, self.cut])
        out = []
        for tb in self.tables:
            vals = np.empty_like(q)
            lo, hi = tb(sv, edges)[0]
            vals[q <= -self.cut] = lo
            vals[q >= self.cut] = hi
            if qi.size:
                tmp = np.empty_like(qi)
                tmp[order] = tb(sv, qi[order])[0]
                vals[inside] = tmp
            out.append(vals)
        om = self.f.omega
        sq = np.full_like(q, s)
        Uq = self.sol.derivative("U_q", sq, q, om)[0]
        Usq = self.sol.derivative("U_q", sq, q, om, ds=1)[0]
        return (*out, Uq, Usq)

    def __call__(self, t, r):
        """(R_app, (u_app)_t) on the nodes r at time t; zero off the cutoff support."""
        R = np.zeros_like(r)
        ut = np.zeros_like(r)
        spec = self.f.spec
        x = r / t
        live = np.abs(x - 1) < spec.c
        if not np.any(live):
            return R, ut
        rl, xl = r[live], x[live]
        eps = self.eps
        s = float(self.f.params.s(t))
        U, Us, Uss, Uq, Usq = self.U_derivs(s, rl - t)
        p0, p1, p2 = cutoff_jet(xl, spec)
        psi_t = -p1 * rl / t**2
        psi_r = p1 / t
        psi_tt = p2 * rl**2 / t**4 + 2 * p1 * rl / t**3
        psi_rr = p2 / t**2
        Ut = eps * Us / t - Uq
        box_F = ((psi_rr - psi_tt) * U + 2 * (psi_r * Uq - psi_t * Ut)
                 + p0 * (-eps**2 * Uss / t**2 + eps * Us / t**2 + 2 * eps * Usq / t))
        F_t = psi_t * U + p0 * Ut
        box_u = eps * box_F / rl
        u_t = eps * F_t / rl
        R[live] = box_u - u_t**2
        ut[live] = u_t
        return R, ut


def _energy(r, Phi, Phi_t, w0, dr):
    """||w0^{1/2} d v||_{L^2} for v = Phi / r."""
    Phi_r = np.gradient(Phi, dr, edge_order=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        vr_r = np.where(r > 0, Phi_r - Phi / np.where(r > 0, r, 1.0), 0.0)
    dens = w0 * (Phi_t**2 + vr_r**2)
    return float(np.sqrt(4 * np.pi * np.trapezoid(dens, dx=dr)))


def _fields(r, Phi, Phi_t, dr):
    Phi_r = np.gradient(Phi, dr, edge_order=2)
    safe = np.where(r > 0, r, 1.0)
    v = np.where(r > 0, Phi / safe, 0.0)
    v_t = np.where(r > 0, Phi_t / safe, 0.0)
    v_r = np.where(r > 0, (Phi_r - Phi / safe) / safe, 0.0)
    return v, v_t, v_r


def required_r_max(T, t_min, c, dr):
    return (1 + c) * 2 * T + (2 * T - t_min) + 10 * dr


def solve_backward(T, t_min, field_: ProfileField, weights: WeightParams = None, grid: GridSpec = None,
                   snapshot_times=(), record_every=None, source_scale=1.0, r_max=None):
    """Leapfrog from t = 2T (v = 0) down to t_min."""
    grid = grid or GridSpec()
    weights = weights or WeightParams(epsilon=field_.params.epsilon)
    if grid.cfl > CFL_MAX:
        raise ValueError(f"CFL ratio {grid.cfl:.3f} exceeds {CFL_MAX}")
    if t_min < field_.params.T_eps * (1 - 1e-12):
        raise ValueError("t_min must be >= T_eps")
    need = required_r_max(T, t_min, field_.spec.c, grid.dr)
    r_max = max(r_max or 0.0, need)
    n = int(np.ceil(r_max / grid.dr)) + 1
    if n > grid.max_nodes:
        raise ValueError(f"r-grid needs {n} nodes, above the cap {grid.max_nodes}")
    r = np.arange(n) * grid.dr
    r_max = float(r[-1])
    dt, dr = grid.dt, grid.dr
    steps = int(round((2 * T - t_min) / dt))
    if not np.isclose(steps * dt, 2 * T - t_min, rtol=0, atol=1e-9 * T):
        raise ValueError("(2T - t_min) must be a whole number of time steps")
    record_every = record_every or max(1, int(round(1.0 / dt)))
    eps = field_.params.epsilon
    source = SemilinearSource(field_, t_min, 2 * T)
    snap_idx = {int(round((2 * T - ts) / dt)): ts for ts in snapshot_times}

    lam2 = (dt / dr) ** 2
    t0 = time.perf_counter()

    def accel(lap, src, ut, v_t):
        return lam2 * lap - dt**2 * r * (2 * ut * v_t + v_t**2 - src)

    Phi_prev = np.zeros(n)  # level t + dt
    Phi = np.zeros(n)  # level t
    hist_t, hist_e, hist_v = [], [], []
    snaps = {}
    safe_r = np.where(r > 0, r, 1.0)
    # one step past t_min so that Phi_t at t_min is centred as well
    for k in range(steps + 1):
        t = 2 * T - k * dt
        # predictor with the lagged v_t, corrector with the centred one
        R, ut = source(t, r)
        src = source_scale * chi_cutoff(t / T) * R
        lap = np.zeros_like(Phi)
        lap[1:-1] = Phi[2:] - 2 * Phi[1:-1] + Phi[:-2]
        vt_lag = (Phi - Phi_prev) / (-dt) / safe_r
        Phi_next = 2 * Phi - Phi_prev + accel(lap, src, ut, vt_lag)
        vt_c = (Phi_next - Phi_prev) / (-2 * dt) / safe_r
        Phi_next = 2 * Phi - Phi_prev + accel(lap, src, ut, vt_c)
        Phi_next[0] = Phi_next[-1] = 0.0
        last = k == steps
        if k > 0 and (k % record_every == 0 or k in snap_idx or last):
            Phi_t = (Phi_next - Phi_prev) / (-2 * dt)
            w0 = weight_eval(t, r - t, weights, "w0")
            e = _energy(r, Phi, Phi_t, w0, dr)
            sup_v = float(np.max(np.abs(Phi[1:] / r[1:])))
            if k % record_every == 0 or last:
                hist_t.append(t)
                hist_e.append(e)
                hist_v.append(sup_v)
            if k in snap_idx:
                snaps[snap_idx[k]] = _fields(r, Phi, Phi_t, dr)
            if sup_v > BLOWUP_FACTOR * eps:
                raise FloatingPointError(f"|v| = {sup_v:.3g} exceeds {BLOWUP_FACTOR:g} eps at t = {t:.4g}")
        if last:
            break
        Phi_prev, Phi = Phi, Phi_next
    order = np.argsort(hist_t)
    history = {k: np.asarray(v)[order] for k, v in
               (("t", hist_t), ("energy_w0", hist_e), ("sup_v", hist_v))}
    # support margin: v must vanish near r_max
    tail = np.max(np.abs(Phi[-int(5 / dr):])) if n > 5 / dr else 0.0
    return BackwardRun(T, t_min, r_max, grid, r, history, snaps, eps, time.perf_counter() - t0,
                       {"steps": steps, "nodes": n, "edge_amplitude": float(tail)})


def energy_difference(r1, f1, r2, f2, t, weights: WeightParams):
    """||w0^{1/2} d(v1 - v2)|| on the coarser nodes shared by both grids."""
    if len(r1) > 1 and len(r2) > 1 and (r2[1] - r2[0]) > (r1[1] - r1[0]):
        r1, f1, r2, f2 = r2, f2, r1, f1
    stride = int(round((r1[1] - r1[0]) / (r2[1] - r2[0]))) if len(r2) > 1 else 1
    sub = r2[::stride]
    m = min(len(r1), len(sub))
    if stride < 1 or r1[0] != r2[0] or not np.allclose(r1[:m], sub[:m], rtol=0, atol=1e-9):
        raise ValueError("incompatible grids")
    r = r1[:m]
    dvt = f1[1][:m] - f2[1][::stride][:m]
    dvr = f1[2][:m] - f2[2][::stride][:m]
    w0 = weight_eval(t, r - t, weights, "w0")
    return float(np.sqrt(4 * np.pi * np.trapezoid(w0 * (dvt**2 + dvr**2) * r**2, r)))


def snapshot_energy(r, f, t, weights):
    w0 = weight_eval(t, r - t, weights, "w0")
    return float(np.sqrt(4 * np.pi * np.trapezoid(w0 * (f[1] ** 2 + f[2] ** 2) * r**2, r)))


def self_convergence(coarse: BackwardRun, fine: BackwardRun, t, weights=None):
    """Relative energy-norm change of v between two resolutions at time t."""
    weights = weights or WeightParams(epsilon=coarse.epsilon)
    fc, ff = coarse.snapshots[t], fine.snapshots[t]
    diff = energy_difference(coarse.r_nodes, fc, fine.r_nodes, ff, t, weights)
    ref = snapshot_energy(fine.r_nodes, ff, t, weights)
    return diff / ref if ref > 0 else 0.0


def horizon_compare(run1: BackwardRun, run2: BackwardRun, lambda0=0.1, weights=None):
    """Weighted differences v1 - v2 on the snapshot times both runs share (t >= T_eps)."""
    if not 0 < lambda0 < 0.5:
        raise ValueError("lambda0 must lie in (0, 1/2)")
    if run2.T < run1.T:
        run1, run2 = run2, run1
    if not np.isclose(run1.grid.dr, run2.grid.dr) or not np.isclose(run1.grid.dt, run2.grid.dt):
        raise ValueError("incompatible grids")
    weights = weights or WeightParams(epsilon=run1.epsilon)
    times = sorted(set(run1.snapshots) & set(run2.snapshots))
    if not times:
        raise ValueError("runs share no snapshot times")
    eps = run1.epsilon
    env = eps * run1.T ** (-0.5 + lambda0)
    rows = []
    for t in times:
        f1, f2 = run1.snapshots[t], run2.snapshots[t]
        d_e = energy_difference(run1.r_nodes, f1, run2.r_nodes, f2, t, weights)
        n = min(len(f1[0]), len(f2[0]))
        d_sup = float(np.max(np.abs(f1[0][:n] - f2[0][:n])))
        rows.append((t, d_e, d_sup, d_e * t**lambda0 / env))
    arr = np.array(rows)
    return {"t": arr[:, 0], "energy_diff": arr[:, 1], "sup_diff": arr[:, 2],
            "weighted": arr[:, 1] * arr[:, 0] ** lambda0, "envelope_ratio": arr[:, 3],
            "max_weighted": float(np.max(arr[:, 1] * arr[:, 0] ** lambda0)),
            "fitted_C": float(np.max(arr[:, 3])), "T1": run1.T, "T2": run2.T}
