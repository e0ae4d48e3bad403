"""Quasilinear wave systems stored by their quadratic Taylor data.

A system has the form ``g^{ab}(u, du) d_a d_b u^I = f^I(u, du)`` with
``g = Minkowski + g_lin[J] u^J + g_grad[J][l] d_l u^J + ...`` and
``f^I = f_quad[I][J][K][a][b] d_a u^J d_b u^K + ...``.  Index 0 is time.

Closures take ``u`` of shape ``(M, ...)`` and ``du`` of shape ``(M, 4, ...)``
and return the full nonlinear metric ``(4, 4, ...)`` and source ``(M, ...)``.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

MINKOWSKI = np.diag([-1.0, 1.0, 1.0, 1.0])
NULL_TOL = 1e-12


@dataclass(frozen=True)
class Direction:
    """A point on the unit sphere together with the null covector (-1, omega)."""

    omega: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float).reshape(3)
        if abs(np.linalg.norm(w) - 1.0) > 1e-12:
            raise ValueError(f"direction must be a unit vector, |omega| = {np.linalg.norm(w)!r}")
        object.__setattr__(self, "omega", w)

    @property
    def omega_hat(self):
        return np.concatenate([[-1.0], self.omega])

    @classmethod
    def from_angles(cls, theta, phi):
        st = np.sin(theta)
        return cls(np.array([st * np.cos(phi), st * np.sin(phi), np.cos(theta)]))

    @classmethod
    def normalized(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(v / np.linalg.norm(v))

    def tangent_basis(self):
        w = self.omega
        helper = np.array([1.0, 0.0, 0.0]) if abs(w[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = helper - (helper @ w) * w
        e1 /= np.linalg.norm(e1)
        return e1, np.cross(w, e1)

    def moved(self, h1, h2):
        """Geodesic step of length |(h1, h2)| along the tangent basis."""
        e1, e2 = self.tangent_basis()
        v = h1 * e1 + h2 * e2
        n = np.hypot(h1, h2)
        if n == 0:
            return self
        w = np.cos(n) * self.omega + np.sin(n) * v / n
        return Direction(w / np.linalg.norm(w))


def sphere_directions(n):
    """Deterministic, roughly uniform Fibonacci points on the sphere."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    phi = np.pi * (1.0 + 5**0.5) * k
    rho = np.sqrt(1.0 - z * z)
    return [Direction.normalized([rho[i] * np.cos(phi[i]), rho[i] * np.sin(phi[i]), z[i]]) for i in range(n)]


@dataclass
class WaveSystemCoefficients:
    name: str
    M: int
    g_lin: np.ndarray
    g_grad: np.ndarray
    f_quad: np.ndarray
    metric_closure: Optional[Callable] = None
    source_closure: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        M = int(self.M)
        if M < 1:
            raise ValueError("M must be a positive integer")
        self.g_lin = np.asarray(self.g_lin, dtype=float)
        self.g_grad = np.asarray(self.g_grad, dtype=float)
        self.f_quad = np.asarray(self.f_quad, dtype=float)
        shapes = {"g_lin": (M, 4, 4), "g_grad": (M, 4, 4, 4), "f_quad": (M, M, M, 4, 4)}
        for key, shp in shapes.items():
            if getattr(self, key).shape != shp:
                raise ValueError(f"{key} has shape {getattr(self, key).shape}, expected {shp}")
        if not np.allclose(self.g_lin, self.g_lin.transpose(0, 2, 1), atol=0):
            raise ValueError("g_lin must be symmetric in its two derivative indices")
        if not np.allclose(self.g_grad, self.g_grad.transpose(0, 2, 1, 3), atol=0):
            raise ValueError("g_grad must be symmetric in its first two derivative indices")


@dataclass(frozen=True)
class AngularCoefficients:
    G2: np.ndarray
    G3: np.ndarray
    F2: np.ndarray


def angular_coefficients(coeffs: WaveSystemCoefficients, direction: Direction) -> AngularCoefficients:
    w = direction.omega_hat
    G2 = np.einsum("jab,a,b->j", coeffs.g_lin, w, w)
    G3 = np.einsum("jabl,a,b,l->j", coeffs.g_grad, w, w, w)
    F2 = np.einsum("ijkab,a,b->ijk", coeffs.f_quad, w, w)
    return AngularCoefficients(G2, G3, F2)


def null_structure_report(coeffs: WaveSystemCoefficients, directions) -> dict:
    directions = list(directions)
    if not directions:
        raise ValueError("need at least one direction")
    g2 = g3 = f2 = 0.0
    for d in directions:
        ang = angular_coefficients(coeffs, d)
        g2 = max(g2, float(np.max(np.abs(ang.G2))))
        g3 = max(g3, float(np.max(np.abs(ang.G3))))
        f2 = max(f2, float(np.max(np.abs(ang.F2))))
    null = max(g2, g3, f2) < NULL_TOL
    return {"max_G2": g2, "max_G3": g3, "max_F2": f2, "classification": "null" if null else "non-null"}


# ------------------------------------------------------------------ builtins

def _minkowski_like(u):
    g = np.zeros((4, 4) + np.shape(u)[1:])
    for a in range(4):
        g[a, a] = MINKOWSKI[a, a]
    return g


def _semilinear_ut2():
    f = np.zeros((1, 1, 1, 4, 4))
    f[0, 0, 0, 0, 0] = 1.0

    def metric(u, du):
        return _minkowski_like(np.asarray(u))

    def source(u, du):
        du = np.asarray(du)
        return du[0:1, 0] ** 2

    return WaveSystemCoefficients("semilinear_ut2", 1, np.zeros((1, 4, 4)), np.zeros((1, 4, 4, 4)), f,
                                  metric, source)


def _quasilinear_grad():
    # Box v_s - v_0 Laplacian v_s = (d_s v_0 + d_t v_s) d_t v_0 / 2
    M = 4
    g_lin = np.zeros((M, 4, 4))
    for i in range(1, 4):
        g_lin[0, i, i] = -1.0
    f = np.zeros((M, M, M, 4, 4))
    for s in range(M):
        f[s, 0, 0, s, 0] += 0.5
        f[s, s, 0, 0, 0] += 0.5

    def metric(u, du):
        u = np.asarray(u)
        g = _minkowski_like(u)
        for i in range(1, 4):
            g[i, i] = 1.0 - u[0]
        return g

    def source(u, du):
        du = np.asarray(du)
        return 0.5 * (du[0, :] + du[:, 0]) * du[0, 0]

    return WaveSystemCoefficients("quasilinear_grad", M, g_lin, np.zeros((M, 4, 4, 4)), f,
                                  metric, source)


def euler_metric(u, cs1):
    """Inverse acoustical metric for sound speed 1 + cs1 * rho; u = (rho, v)."""
    u = np.asarray(u, dtype=float)
    rho, v = u[0], u[1:4]
    cs = 1.0 + cs1 * rho
    g = np.zeros((4, 4) + rho.shape)
    g[0, 0] = -1.0
    for a in range(3):
        g[0, a + 1] = g[a + 1, 0] = -v[a]
        for b in range(3):
            g[a + 1, b + 1] = -v[a] * v[b] + (cs**2 if a == b else 0.0)
    return g


def euler_box_lower(u, du, dphi, cs1):
    """First-order part of the covariant wave operator of the acoustical metric.

    Box_g phi = g^{ab} d_a d_b phi + (this).  Uses the divergence of the inverse
    metric and |det g| = c_s^{-6}.
    """
    rho, v = u[0], u[1:4]
    cs = 1.0 + cs1 * rho
    k = cs1 / cs
    div_v = du[1, 1] + du[2, 2] + du[3, 3]
    dg = np.zeros((4,) + np.shape(rho))
    dg[0] = -div_v
    for b in range(3):
        adv = sum(v[a] * du[b + 1, a + 1] for a in range(3))
        dg[b + 1] = -du[b + 1, 0] - div_v * v[b] - adv + 2 * cs * cs1 * du[0, b + 1]
    g = euler_metric(u, cs1)
    grho_dphi = np.einsum("ab...,a...,b...->...", g, du[0], dphi)
    return np.einsum("a...,a...->...", dg, dphi) - 3 * k * grho_dphi


def _euler(cs1):
    M = 4
    g_lin = np.zeros((M, 4, 4))
    for a in range(1, 4):
        g_lin[a, 0, a] = g_lin[a, a, 0] = -1.0
        g_lin[0, a, a] = 2 * cs1
    f = np.zeros((M, M, M, 4, 4))
    for a in range(1, 4):
        for b in range(1, 4):
            f[a, b, a, 0, b] += 1.0          # d_t v^b d_b v^a
            f[a, b, a, b, 0] += 1.0          # d_b v^b d_t v^a
            f[a, 0, a, b, b] -= 1.0          # d_b rho d_b v^a
        f[a, 0, a, 0, 0] -= 2 * cs1 - 1.0    # d_t rho d_t v^a
    for a in range(1, 4):
        f[0, a, 0, 0, a] += 1.0              # d_t v^a d_a rho
        f[0, a, 0, a, 0] += 1.0              # d_a v^a d_t rho
        f[0, 0, 0, a, a] -= 2 * cs1
        for b in range(a + 1, 4):
            f[0, a, b, a, b] += 2.0
            f[0, b, a, a, b] -= 2.0

    def metric(u, du):
        return euler_metric(u, cs1)

    def source(u, du):
        u = np.asarray(u, dtype=float)
        du = np.asarray(du, dtype=float)
        cs = 1.0 + cs1 * u[0]
        k = cs1 / cs
        g = euler_metric(u, cs1)
        out = np.zeros((M,) + u.shape[1:])
        for a in range(1, 4):
            grv = np.einsum("ab...,a...,b...->...", g, du[0], du[a])
            out[a] = -(1 + k) * grv - euler_box_lower(u, du, du[a], cs1)
        grr = np.einsum("ab...,a...,b...->...", g, du[0], du[0])
        null = 0.0
        for a in range(1, 4):
            for b in range(a + 1, 4):
                null = null + du[a, a] * du[b, b] - du[a, b] * du[b, a]
        out[0] = -3 * k * grr + 2 * null - euler_box_lower(u, du, du[0], cs1)
        return out

    return WaveSystemCoefficients("euler", M, g_lin, np.zeros((M, 4, 4, 4)), f, metric, source,
                                  {"cs1": cs1})


def builtin_system(name: str, params: Optional[dict] = None) -> WaveSystemCoefficients:
    params = params or {}
    if name == "semilinear_ut2":
        return _semilinear_ut2()
    if name == "quasilinear_grad":
        return _quasilinear_grad()
    if name == "euler":
        if "cs1" not in params:
            raise ValueError("euler needs the sound-speed slope parameter 'cs1'")
        return _euler(float(params["cs1"]))
    raise ValueError(f"unknown builtin system {name!r}; expected semilinear_ut2, quasilinear_grad or euler")
