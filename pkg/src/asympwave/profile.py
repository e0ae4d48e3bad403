"""Asymptotic profile u_app = eps r^{-1} psi(r/t) U(s, q, omega) and its residuals.

Only radial seeds are handled here, so u_app depends on (t, r) alone.  The
flat wave operator is evaluated in null coordinates ``a = t + r``,
``b = r - t`` where ``Box u = (4/r) d_a d_b (r u)``: the mixed derivative is
small by itself, so no large second derivatives have to cancel numerically.
The remaining curved-metric part uses a 4th-order (t, r) Hessian.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _numerics as nm
from .model import MINKOWSKI, Direction
from .optical import OpticalParams, characteristics

D1 = np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12])
D2 = np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12])
OFFS = np.arange(-2, 3)


# ------------------------------------------------------------------ cutoff

def _exp_jet(x, sign=1.0):
    """Jet (value, d/dx, d2/dx2) of exp(-1/y) at y = sign * x (zero for y <= 0)."""
    y = sign * np.asarray(x, dtype=float)
    pos = y > 0
    ys = np.where(pos, y, 1.0)
    g = np.stack([-1 / ys, sign / ys**2, -2 / ys**3])
    e = nm.jet_exp(g)
    return np.where(pos[None], e, 0.0)


def smoothstep_jet(x):
    """Jet of the C-infinity step 0 -> 1 on [0, 1]."""
    f = _exp_jet(x)
    f1 = _exp_jet(np.asarray(x, dtype=float) - 1.0, -1.0)
    return nm.jet_mul(f, nm.jet_recip(f + f1))


@dataclass
class CutoffSpec:
    c: float = 0.1

    def __post_init__(self):
        if not 0 < self.c < 0.25:
            raise ValueError("cutoff width c must lie in (0, 1/4)")


def cutoff_jet(x, spec: CutoffSpec = CutoffSpec()):
    """Stack (psi, psi', psi'') at x."""
    x = np.asarray(x, dtype=float)
    c = spec.c
    w = c / 2
    xs = x.reshape(-1)
    left = xs < 1
    # one smoothstep evaluation per point: the rising edge left of 1, the falling edge right of it
    arg = np.where(left, (xs - (1 - c)) / w, ((1 + c) - xs) / w)
    jet = smoothstep_jet(arg)
    sign = np.where(left, 1.0, -1.0)
    jet = jet * np.stack([np.ones_like(xs), sign / w, np.full_like(xs, 1 / w**2)])
    return jet.reshape((3,) + x.shape)


def cutoff_psi(x, spec: CutoffSpec = CutoffSpec(), order=0):
    """psi = 1 on [1 - c/2, 1 + c/2], 0 outside (1 - c, 1 + c); derivatives up to 2."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    return cutoff_jet(x, spec)[order]


# ------------------------------------------------------------------ field

@dataclass
class ProfileField:
    """u_app for one radial reduced solution; callable on arrays of (t, r)."""

    sol: object
    params: OpticalParams
    spec: CutoffSpec = field(default_factory=CutoffSpec)
    omega: Direction = field(default_factory=lambda: Direction([0.0, 0.0, 1.0]))
    exact_q: bool = None
    q_tol: float = 1e-12

    def __post_init__(self):
        if self.exact_q is None:
            self.exact_q = self.sol.kind == "closed_semilinear"

    def q(self, t, r):
        t, r = np.broadcast_arrays(np.asarray(t, float), np.asarray(r, float))
        if self.exact_q:
            return r - t
        q, _, _ = characteristics(t.ravel(), r.ravel(), self.omega, self.sol, self.params,
                                  steps=256, tol=self.q_tol, with_nu=False)
        return q.reshape(t.shape)

    def __call__(self, t, r):
        """u_app with shape (M, ...)."""
        t, r = np.broadcast_arrays(np.asarray(t, float), np.asarray(r, float))
        # stencils may reach slightly below T_eps; the reduced solution extends to s_min
        if np.any(self.params.s(np.maximum(t, 1e-300)) < self.sol.s_min):
            raise ValueError("u_app requested below the reduced solution's s-range")
        psi = cutoff_psi(r / t, self.spec)
        out = np.zeros((self.sol.M,) + t.shape)
        live = psi > 0
        if np.any(live):
            tl, rl = t[live], r[live]
            U = self.sol.U(self.params.s(tl), self.q(tl, rl), self.omega)
            out[:, live] = self.params.epsilon * psi[live] * U / rl
        return out

    def plain(self, t, r):
        """eps r^{-1} U without the cutoff."""
        t, r = np.broadcast_arrays(np.asarray(t, float), np.asarray(r, float))
        U = self.sol.U(self.params.s(t), self.q(t, r), self.omega)
        return self.params.epsilon * U / r


def u_app_eval(t, r, omega, sol, params, spec=CutoffSpec()):
    return ProfileField(sol, params, spec, omega)(t, r)


def fd_step(t, r):
    return min(float(nm.bracket(r - t)), t / 100) * 1e-2


def derivatives(field: ProfileField, t, r, h=None):
    """u, u_t, u_r, u_tt, u_tr, u_rr at one point by 4th-order central differences."""
    h = h or fd_step(t, r)
    T = t + OFFS[:, None] * h
    R = r + OFFS[None, :] * h
    vals = field(np.broadcast_to(T, (5, 5)), np.broadcast_to(R, (5, 5)))
    u = vals[:, 2, 2]
    u_t = vals[:, :, 2] @ D1 / h
    u_r = vals[:, 2, :] @ D1 / h
    u_tt = vals[:, :, 2] @ D2 / h**2
    u_rr = vals[:, 2, :] @ D2 / h**2
    u_tr = np.einsum("i,mij,j->m", D1, vals, D1) / h**2
    return {"u": u, "u_t": u_t, "u_r": u_r, "u_tt": u_tt, "u_tr": u_tr, "u_rr": u_rr, "h": h}


def flat_box(field: ProfileField, t, r, h_a=None, h_b=None, refine=True):
    """Box u via (4/r) d_a d_b (r u) in null coordinates, Richardson-refined.

    Returns (value, relative change under step halving).
    """
    h_a = h_a or field.spec.c * t / 20
    h_b = h_b or 0.05

    def mixed(ha, hb):
        a0, b0 = t + r, r - t
        A = a0 + OFFS[:, None] * ha
        B = b0 + OFFS[None, :] * hb
        TT, RR = (A - B) / 2, (A + B) / 2
        F = RR * field(TT, RR)
        return np.einsum("i,mij,j->m", D1, F, D1) / (ha * hb)

    coarse = mixed(h_a, h_b)
    fine = mixed(h_a / 2, h_b / 2)
    val = fine + (fine - coarse) / 15
    scale = np.max(np.abs(val)) + 1e-300
    return 4 * val / r, float(np.max(np.abs(fine - coarse)) / scale)


def hessian_cartesian(d, r, omega: Direction):
    """4x4 space-time Hessian of a radial function from its (t, r) derivatives."""
    w = omega.omega
    M = d["u"].shape[0]
    H = np.zeros((M, 4, 4))
    H[:, 0, 0] = d["u_tt"]
    for i in range(3):
        H[:, 0, i + 1] = H[:, i + 1, 0] = d["u_tr"] * w[i]
        for j in range(3):
            H[:, i + 1, j + 1] = d["u_rr"] * w[i] * w[j] + d["u_r"] / r * ((i == j) - w[i] * w[j])
    return H


def wave_residual(t, r, field: ProfileField, coeffs=None):
    """g(u, du) d d u - f(u, du) for u = u_app, with both pieces.

    Returns dict(residual, metric_piece, source_piece, convergence).
    """
    coeffs = coeffs or field.sol.system
    if not (t + r > 0 and r > 0):
        raise ValueError("point outside the domain")
    box, conv = flat_box(field, t, r)
    d = derivatives(field, t, r)
    w = field.omega.omega
    du = np.stack([d["u_t"]] + [d["u_r"] * w[i] for i in range(3)], axis=1)
    g = coeffs.metric_closure(d["u"], du)
    H = hessian_cartesian(d, r, field.omega)
    curved = np.einsum("ab,mab->m", g - MINKOWSKI, H)
    metric_piece = box + curved
    source = coeffs.source_closure(d["u"], du)
    return {"residual": metric_piece - source, "metric_piece": metric_piece,
            "source_piece": source, "convergence": conv}


def hessian_structure_check(t, r, field: ProfileField):
    """Deviation of the Hessian from its rank-one leading part, and the singular-value ratio."""
    d = derivatives(field, t, r)
    H = hessian_cartesian(d, r, field.omega)
    sol, P = field.sol, field.params
    q = field.q(np.array([t]), np.array([r]))
    s = P.s(t)
    mu = sol.mu(s, q, field.omega)[0]
    dP = sol.derivative("muU_q", s, q, field.omega, dq=1)[:, 0]
    psi = cutoff_psi(r / t, field.spec)
    wh = field.omega.omega_hat
    lead = (P.epsilon / (4 * r)) * psi * mu * dP[:, None, None] * np.outer(wh, wh)[None]
    dev = float(np.max(np.abs(H - lead)))
    sv = np.linalg.svd(H, compute_uv=False)
    ratio = float(np.max(sv[:, 1] / np.maximum(sv[:, 0], 1e-300)))
    return {"deviation": dev, "singular_ratio": ratio, "lead_norm": float(np.max(np.abs(lead)))}


# ------------------------------------------------------------ decay fits

@dataclass
class DecayFit:
    exponent: float
    intercept: float
    rms_residual: float
    t_window: tuple
    n_samples: int
    stderr: float = 0.0


def fit_decay_exponent(samples, min_samples=5, min_spread=4.0) -> DecayFit:
    """Least-squares power law through (t, y) samples."""
    t, y = map(np.asarray, zip(*samples))
    t, y = t.astype(float), y.astype(float)
    if len(t) < min_samples:
        raise ValueError(f"need at least {min_samples} samples")
    if np.any(y <= 0):
        raise ValueError("samples must be positive")
    if t.max() < min_spread * t.min():
        raise ValueError(f"t-window must span a factor {min_spread}")
    slope, icpt, se, _ = nm.loglog_fit(t, y)
    resid = np.log(y) - (slope * np.log(t) + icpt)
    return DecayFit(slope, icpt, float(np.sqrt(np.mean(resid**2))), (float(t.min()), float(t.max())),
                    len(t), se)


# ------------------------------------------------------------ antiderivative

def w_antiderivative(sol, s, q, omega: Direction, far=1e12):
    """W(s, q) = integral of 2 U_(0) / mu from -infinity to q.

    The integral starts at ``-far * max(1, cut)``; the returned dict carries a
    bound for the neglected piece from the decay <p>^{1-gamma_minus} of U_(0).
    """
    if sol.kind != "closed_quasilinear_grad":
        raise ValueError("the antiderivative W belongs to the quasilinear_grad family")
    q = np.atleast_1d(np.asarray(q, dtype=float))
    L = -far * max(1.0, sol.data.q_support_cut)

    def integrand(p):
        return 2 * sol.U(float(s), p, omega)[0] / sol.mu(float(s), p, omega)

    val = nm.cumulative_quad(integrand, q, L)
    gm = sol.data.gamma_minus
    c = max(abs(float(sol.data.tail(np.array([-1.0]), omega.omega)[0])), 1.0)
    tail = c * abs(L) ** (2 - gm) / (gm - 2)
    return {"W": val, "tail_bound": float(tail)}
