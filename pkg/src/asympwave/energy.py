"""Weights, weighted energies and Poincare-type ratio checks on radial snapshots.

All integrals are over R^3 with a radial integrand, dx = 4 pi r^2 dr, and use
composite Simpson weights on the snapshot nodes.
"""
from dataclasses import dataclass

import numpy as np

from . import _numerics as nm
from .model import MINKOWSKI


@dataclass
class WeightParams:
    gamma1: float = 2.4
    gamma2: float = 0.2
    c0: float = 4.0
    epsilon: float = 0.02
    delta: float = 0.0
    gamma_plus: float = 1.5
    gamma_minus: float = 2.5

    def __post_init__(self):
        gp, gm = self.gamma_plus, self.gamma_minus
        if not (gp > 1 and gm > 2):
            raise ValueError("need gamma_plus > 1 and gamma_minus > 2")
        if not 2 < self.gamma1 < min(2 * (gm - 1), 4):
            raise ValueError(f"gamma1 must lie in (2, {min(2 * (gm - 1), 4)})")
        if not 0 < self.gamma2 < min(gm - 2, gp - 1, 0.5):
            raise ValueError(f"gamma2 must lie in (0, {min(gm - 2, gp - 1, 0.5)})")
        if self.c0 < 2:
            raise ValueError("c0 must be >= 2")


def weight_eval(t, q, params: WeightParams, which="w"):
    """One of the weights m, sigma, w = m exp(c0 eps ln t sigma), w0 at (t, q)."""
    q = np.asarray(q, dtype=float)
    neg = q < 0
    qn = np.where(neg, q, 0.0)
    qp = np.where(neg, 0.0, q)
    if which == "m":
        return np.where(neg, (1 - qn) ** params.gamma1, 1.0)
    if which == "sigma":
        return np.where(neg, 2 - (1 - qn) ** (-params.gamma2), (1 + qp) ** (-params.gamma2))
    if which == "w0":
        return np.where(neg, nm.bracket(q) ** params.gamma1, 1.0)
    if which == "w":
        t = np.asarray(t, dtype=float)
        if np.any(t * params.epsilon < 1 - 1e-12):
            raise ValueError("w needs t >= 1/eps")
        m = weight_eval(t, q, params, "m")
        sig = weight_eval(t, q, params, "sigma")
        return m * np.exp(params.c0 * params.epsilon * np.log(t) * sig)
    raise ValueError(f"unknown weight {which!r}")


@dataclass
class FieldSnapshot:
    t: float
    r_nodes: np.ndarray
    phi: np.ndarray
    phi_t: np.ndarray
    phi_r: np.ndarray

    def __post_init__(self):
        r = self.r_nodes = np.asarray(self.r_nodes, dtype=float)
        if r[0] < 0 or np.any(np.diff(r) <= 0):
            raise ValueError("r_nodes must be strictly increasing from r >= 0")
        for name in ("phi", "phi_t", "phi_r"):
            setattr(self, name, np.broadcast_to(np.asarray(getattr(self, name), float), r.shape).copy())

    @property
    def compact(self):
        return bool(self.phi[-1] == 0 and self.phi_t[-1] == 0 and self.phi_r[-1] == 0)

    @classmethod
    def from_function(cls, t, r_nodes, phi, phi_t=None):
        """Snapshot from nodal values; phi_r by 4th-order differences."""
        r = np.asarray(r_nodes, dtype=float)
        phi = np.asarray(phi, dtype=float)
        phi_r = nm.Stencil(r)(phi)
        return cls(t, r, phi, np.zeros_like(phi) if phi_t is None else phi_t, phi_r)

    def scaled(self, lam):
        return FieldSnapshot(self.t, self.r_nodes, lam * self.phi, lam * self.phi_t, lam * self.phi_r)

    def integrate(self, density):
        r = self.r_nodes
        return float(nm.simpson_weights(r) @ (4 * np.pi * r**2 * density))


@dataclass
class ChartSlice:
    """q and its gradient on a snapshot's nodes (radial: q_a = q_r omega_a)."""
    q: np.ndarray
    q_t: np.ndarray
    q_r: np.ndarray

    @classmethod
    def flat(cls, t, r_nodes):
        r = np.asarray(r_nodes, dtype=float)
        return cls(r - t, -np.ones_like(r), np.ones_like(r))

    @classmethod
    def from_solution(cls, t, r_nodes, sol, params, omega=None):
        from .model import Direction
        from .optical import gradient, solve_q

        omega = omega or Direction([0.0, 0.0, 1.0])
        r = np.asarray(r_nodes, dtype=float)
        tt = np.full_like(r, float(t))
        q = solve_q(tt, r, omega, sol, params)
        q_t, q_r = gradient(tt, r, omega, sol, params)
        return cls(np.asarray(q), np.asarray(q_t), np.asarray(q_r))


def flat_density(snap: FieldSnapshot):
    return snap.phi_t**2 + snap.phi_r**2


def energy_Eu(snap: FieldSnapshot, metric=None, chart: ChartSlice = None, params: WeightParams = None,
              weight=None, coercivity_tol=0.5):
    """Weighted energy with density -2 g^{0a} phi_t phi_a + g^{ab} phi_a phi_b.

    ``metric`` is None (Minkowski), one 4x4 matrix, or one per node with the
    radial direction along the third axis.  ``weight`` overrides w.
    """
    n = snap.r_nodes.size
    g = MINKOWSKI if metric is None else np.asarray(metric, dtype=float)
    g = np.broadcast_to(g, (n, 4, 4))
    dphi = np.zeros((n, 4))
    dphi[:, 0] = snap.phi_t
    dphi[:, 3] = snap.phi_r
    dens = -2 * snap.phi_t * np.einsum("na,na->n", g[:, 0, :], dphi) + np.einsum("na,nab,nb->n", dphi, g, dphi)
    flat = flat_density(snap)
    live = flat > 0
    if np.any(live) and np.min(dens[live] / flat[live]) < coercivity_tol:
        raise ValueError("energy density is not coercive for this metric")
    if weight is None:
        chart = chart or ChartSlice.flat(snap.t, snap.r_nodes)
        weight = weight_eval(snap.t, chart.q, params or WeightParams())
    return snap.integrate(np.broadcast_to(weight, dens.shape) * dens)


def energy_Eq(snap: FieldSnapshot, chart: ChartSlice, params: WeightParams = None):
    """Energy of the good derivatives q_t d_a - q_a d_t, summed over a."""
    params = params or WeightParams()
    if np.any(chart.q_t >= 0):
        raise ValueError("q_t must be negative on the snapshot")
    q = chart.q
    eps = params.epsilon
    coef = np.where(q < 0, 1 / (1 - np.minimum(q, 0.0)), 0.0) \
        + eps * np.log(1 / eps) * (1 + np.abs(q)) ** (-1 - params.gamma2)
    good = (chart.q_t * snap.phi_r - chart.q_r * snap.phi_t) ** 2
    w = weight_eval(snap.t, q, params)
    return snap.integrate(coef / np.abs(chart.q_t) * good * w)


def lp1_threshold(eta):
    return 100 * (eta + 1) ** 2 / eta**2


def poincare_sides(snap: FieldSnapshot, eta, c=0.1, variant="lp1", chart: ChartSlice = None,
                   params: WeightParams = None):
    """(LHS, RHS) of the chosen Poincare inequality."""
    t, r = snap.t, snap.r_nodes
    phi2 = snap.phi**2
    dphi2 = flat_density(snap)
    outside = r >= t
    br = nm.bracket(t - r)
    x = r / np.maximum(t, 1e-300)
    with np.errstate(divide="ignore"):
        inv_r2 = np.where(r > 0, 1 / np.maximum(r, 1e-300) ** 2, 0.0)
    transition = (x >= 1 - c) & (x <= 1 - c / 2)
    if variant in ("lp1", "lp1st"):
        thr = lp1_threshold(eta)
        if variant == "lp1" and t < thr:
            raise ValueError(f"lp1 needs t >= {thr:.4g}")
        if variant == "lp1st" and t > thr:
            raise ValueError(f"lp1st needs t <= {thr:.4g}")
        inner = ~outside & ((x >= 1 - c / 2) if variant == "lp1" else True)
        lhs = snap.integrate(np.where(outside, br**-2 * phi2, 0.0) + np.where(inner, br ** (eta - 1) * phi2, 0.0))
        if variant == "lp1":
            rhs = snap.integrate(np.where(outside, dphi2, 0.0)
                                 + np.where(~outside, br ** (eta + 1) * (dphi2 + inv_r2 * phi2 * transition), 0.0))
        else:
            rhs = snap.integrate(dphi2)
        return lhs, rhs
    if variant == "lp2":
        if chart is None:
            raise ValueError("lp2 needs a chart with q and q_r")
        w = weight_eval(t, chart.q, params or WeightParams())
        lhs = snap.integrate(chart.q_r**2 * nm.bracket(chart.q) ** -2 * phi2 * w * (x >= 1 - c / 2))
        rhs = snap.integrate((dphi2 + inv_r2 * phi2 * transition) * w)
        return lhs, rhs
    raise ValueError(f"unknown variant {variant!r}")


def poincare_ratio(snap, eta=1.2, c=0.1, variant="lp1", chart=None, params=None):
    lhs, rhs = poincare_sides(snap, eta, c, variant, chart, params)
    if lhs == 0:
        return 0.0
    return lhs / rhs


def random_snapshots(t, n=20, seed=0, r_nodes=None, width=30.0):
    """Seeded family of smooth compactly supported radial snapshots near r = t."""
    rng = np.random.default_rng(seed)
    r = np.linspace(max(t - 3 * width, 0.0), t + 3 * width, 4001) if r_nodes is None else r_nodes
    out = []
    for _ in range(n):
        phi = np.zeros_like(r)
        phi_r = np.zeros_like(r)
        for _ in range(rng.integers(1, 4)):
            c = t + rng.uniform(-width, width)
            sd = rng.uniform(0.5, 5.0)
            a = rng.normal()
            # bump exp(-((r-c)/sd)^2) truncated smoothly at 4 sd
            z = (r - c) / sd
            cut = nm.bump(z, -4, -3, 3, 4)
            g = np.exp(-z * z)
            phi += a * g * cut
            dcut = (nm.bump(z + 1e-6, -4, -3, 3, 4) - nm.bump(z - 1e-6, -4, -3, 3, 4)) / 2e-6
            phi_r += a * (g * dcut - 2 * z * g * cut) / sd
        out.append(FieldSnapshot(t, r, phi, rng.normal() * phi_r, phi_r))
    return out
