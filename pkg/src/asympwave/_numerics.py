"""Small numerical helpers shared across modules.

Jets here are truncated derivative stacks in one variable: ``jet[k]`` holds
the k-th derivative at every sample point.  Products and reciprocals follow
Leibniz' rule, which is all the closed-form profiles need.
"""
from math import comb

import numpy as np
from numpy.polynomial.legendre import leggauss

_GL_X, _GL_W = leggauss(5)


def bracket(x):
    """Japanese bracket sqrt(1 + x^2)."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + x * x)


# ---------------------------------------------------------------- jets

def jet_const(c, like):
    out = np.zeros_like(like)
    out[0] = c
    return out


def jet_mul(f, g):
    n = f.shape[0]
    out = np.zeros(np.broadcast_shapes(f.shape, g.shape))
    for k in range(n):
        for j in range(k + 1):
            out[k] = out[k] + comb(k, j) * f[j] * g[k - j]
    return out


def jet_recip(g):
    h = np.zeros_like(g, dtype=float)
    h[0] = 1.0 / g[0]
    for n in range(1, g.shape[0]):
        acc = np.zeros_like(g[0])
        for k in range(1, n + 1):
            acc = acc + comb(n, k) * g[k] * h[n - k]
        h[n] = -acc * h[0]
    return h


def jet_pow(g, m):
    """Integer power (negative allowed)."""
    if m == 0:
        return jet_const(1.0, np.asarray(g, dtype=float))
    if m > 0 and np.any(g[0] == 0):
        out = jet_const(1.0, np.asarray(g, dtype=float))
        for _ in range(m):
            out = jet_mul(out, g)
        return out
    return jet_powr(g, float(m))


def jet_exp(g):
    """exp of a jet via the Faa di Bruno recursion h' = g' h."""
    h = np.zeros_like(g, dtype=float)
    h[0] = np.exp(g[0])
    for n in range(1, g.shape[0]):
        acc = np.zeros_like(g[0])
        for k in range(n):
            acc = acc + comb(n - 1, k) * g[k + 1] * h[n - 1 - k]
        h[n] = acc
    return h


def jet_powr(g, alpha):
    """Real power g**alpha of a jet with positive value part."""
    h = np.zeros_like(g, dtype=float)
    h[0] = g[0] ** alpha
    for n in range(1, g.shape[0]):
        acc = np.zeros_like(g[0])
        for k in range(n):
            acc = acc + alpha * comb(n - 1, k) * g[k + 1] * h[n - 1 - k]
        for k in range(1, n):
            acc = acc - comb(n - 1, k) * g[k] * h[n - k]
        h[n] = acc / g[0]
    return h


# ----------------------------------------------------------- quadrature

_PANEL_CACHE: dict = {}


def _panels(q_sorted, lo, scale, max_panel):
    key = (q_sorted.tobytes(), float(lo), float(scale), float(max_panel))
    hit = _PANEL_CACHE.get(key)
    if hit is not None:
        return hit
    xlo = np.arcsinh(lo / scale)
    xs = np.maximum(np.arcsinh(q_sorted / scale), xlo)
    bps = np.concatenate([[xlo], xs])
    gaps = np.diff(bps)
    nsub = np.maximum(1, np.ceil(gaps / max_panel).astype(int))
    width = np.repeat(gaps / nsub, nsub)
    offs = np.arange(nsub.sum()) - np.repeat(np.cumsum(nsub) - nsub, nsub)
    start = np.repeat(bps[:-1], nsub) + offs * width
    nodes = start[:, None] + 0.5 * width[:, None] * (_GL_X + 1.0)
    p = scale * np.sinh(nodes).ravel()
    # quadrature weight of every node, including the Jacobian of the sinh map
    w = (scale * np.cosh(nodes) * _GL_W * (0.5 * width)[:, None]).ravel()
    ends = np.cumsum(nsub) - 1
    hit = (p, w, nodes.shape, ends)
    if len(_PANEL_CACHE) > 64:
        _PANEL_CACHE.clear()
    _PANEL_CACHE[key] = hit
    return hit


def cumulative_quad(f, q, lo, scale=1.0, max_panel=0.1):
    """Integral of ``f`` from ``lo`` to each entry of ``q``.

    Integration runs in the variable xi = asinh(p/scale) with 5-point
    Gauss-Legendre panels, so very long ranges such as [-1e6, 0] stay cheap.
    ``f`` maps a 1-D array of abscissae to an array whose last axis matches
    it.  Entries of ``q`` below ``lo`` get zero.
    """
    q = np.asarray(q, dtype=float)
    flat = q.ravel()
    order = np.argsort(flat)
    p, w, shape, ends = _panels(flat[order], lo, scale, max_panel)
    vals = np.asarray(f(p))
    lead = vals.shape[:-1]
    panel = (vals * w).reshape(lead + shape).sum(axis=-1)
    cum = np.cumsum(panel, axis=-1)[..., ends]
    out = np.empty(lead + flat.shape)
    out[..., order] = cum
    return out.reshape(lead + q.shape)


def simpson_weights(x):
    """Composite Simpson weights on a non-uniform grid (odd node count)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 3 or n % 2 == 0:
        raise ValueError("Simpson weights need an odd number of nodes >= 3")
    w = np.zeros(n)
    for i in range(0, n - 2, 2):
        h0, h1 = x[i + 1] - x[i], x[i + 2] - x[i + 1]
        hs = h0 + h1
        w[i] += hs / 6 * (2 - h1 / h0)
        w[i + 1] += hs**3 / (6 * h0 * h1)
        w[i + 2] += hs / 6 * (2 - h0 / h1)
    return w


# ------------------------------------------------------ finite differences

def fornberg(x0, xs, m):
    """Weights of the m-th derivative at x0 from nodes xs (Fornberg 1988)."""
    n = len(xs)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, -1, -1):
                c[j, k] = (c4 * c[j, k] - (k * c[j, k - 1] if k else 0.0)) / c3
        c1 = c2
    return c[:, m]


class Stencil:
    """Banded 5-point derivative operator on a fixed monotone grid."""

    def __init__(self, x, m=1, width=5):
        x = np.asarray(x, dtype=float)
        n = x.size
        if n < width:
            raise ValueError(f"need at least {width} nodes, got {n}")
        if np.any(np.diff(x) <= 0):
            raise ValueError("nodes must be strictly increasing")
        half = width // 2
        self.idx = np.empty((n, width), dtype=int)
        self.w = np.empty((n, width))
        for i in range(n):
            lo = min(max(i - half, 0), n - width)
            cols = np.arange(lo, lo + width)
            self.idx[i] = cols
            self.w[i] = fornberg(x[i], x[cols], m)

    def __call__(self, f):
        return np.sum(f[..., self.idx] * self.w, axis=-1)


# ------------------------------------------------------------ cutoffs

def _smooth_step_core(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / np.where(pos, x, 1.0)[pos])
    return out


def smoothstep(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    a = _smooth_step_core(x)
    b = _smooth_step_core(1.0 - np.asarray(x, dtype=float))
    return a / (a + b)


def bump(x, lo, inner_lo, inner_hi, hi):
    """Smooth plateau: 1 on [inner_lo, inner_hi], 0 outside (lo, hi)."""
    x = np.asarray(x, dtype=float)
    up = smoothstep((x - lo) / (inner_lo - lo))
    down = smoothstep((hi - x) / (hi - inner_hi))
    return up * down


# ------------------------------------------------------------- fitting

def loglog_fit(x, y):
    """Least-squares slope of log y against log x with its standard error."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    dof = max(len(lx) - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return float(coef[0]), float(coef[1]), float(np.sqrt(cov[0, 0])), float(np.max(np.abs(resid)))
