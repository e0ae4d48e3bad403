"""Command-line front end: config loading, pipeline runs, report.json and CSV output.

Exit codes: 0 when every check in the run passes, 1 on a check failure,
2 on usage or configuration errors.
"""
import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import admissibility as adm
from . import backward_solver as bs
from . import energy as en
from . import optical as op
from . import profile as pf
from . import reduced as rd
from .model import Direction, sphere_directions

SCHEMA_VERSION = 1
COMMANDS = ("reduced-solve", "admissibility-check", "shock-time", "optical-scan", "residual-scan",
            "poincare-check", "backward-solve", "horizon-compare", "constraint-check")
FAMILY_OF_SYSTEM = {"semilinear_ut2": "semilinear", "quasilinear_grad": "quasilinear", "euler": "euler"}
# sign a * coefficient * A must have for the closed forms to stay regular for s >= 0
REQUIRED_SIGN = {"semilinear": -1.0, "quasilinear": -1.0, "euler": 1.0}

CSV_DOCS = {
    "residual_scan.csv": {
        "t": "time", "r": "radius", "q": "optical function value",
        "residual_norm": "max over components of |g d d u_app - f|",
        "piece_g": "max |g d d u_app|", "piece_f": "max |f(u_app, d u_app)|"},
    "optical_scan.csv": {
        "t": "time", "r": "radius", "q": "optical function", "nu": "q_t + q_r",
        "q_minus_rmt": "q - (r - t)", "eikonal_residual": "g(u, du)(dq, dq)"},
    "backward.csv": {
        "t": "time", "energy_w0": "||w0^{1/2} d v(t)||_{L^2}", "sup_v": "max_r |v(t, r)|"},
    "admissibility.csv": {
        "bound_id": "bound label", "fitted_C": "smallest constant valid on the grid",
        "margin": "relative change under grid doubling", "s": "worst s", "q": "worst q"},
    "reduced.csv": {"s": "slow time", "sup_error": "sup |numeric - closed form| over q, omega, fields"},
    "poincare.csv": {"t": "time", "variant": "inequality", "index": "snapshot index",
                     "ratio": "LHS/RHS", "ratio_fine": "LHS/RHS at doubled resolution"},
    "horizon.csv": {"T1": "shorter horizon", "t": "time", "energy_diff": "||w0^{1/2} d(v1 - v2)||",
                    "sup_diff": "max |v1 - v2|", "weighted": "t^lambda0 * energy_diff"},
    "constraints.csv": {"source": "closed or propagated", "constraint": "name", "value": "max violation"},
}


class ConfigError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class RunConfig:
    system: str = "semilinear_ut2"
    system_params: dict = field(default_factory=dict)
    scattering: dict = field(default_factory=lambda: {"kind": "gaussian", "amp": -1.0})
    epsilon: float = 0.02
    delta: float = None
    gamma_plus: float = 1.5
    gamma_minus: float = 2.5
    gamma1: float = 2.4
    gamma2: float = 0.2
    c0: float = 4.0
    c: float = 0.1
    lambda0: float = 0.1
    grids: dict = field(default_factory=dict)
    shock: dict = field(default_factory=lambda: {"family": "burgers", "data": "rarefaction_step"})
    output: str = None
    seed: int = 0

    def grid(self, stage, key, default):
        return self.grids.get(stage, {}).get(key, default)

    def weights(self):
        return en.WeightParams(self.gamma1, self.gamma2, self.c0, self.epsilon, self.delta or 0.0,
                               self.gamma_plus, self.gamma_minus)

    def to_dict(self):
        return asdict(self)


def _validate(cfg: RunConfig):
    bad = []
    if cfg.system not in FAMILY_OF_SYSTEM:
        bad.append(f"unknown system {cfg.system!r}; expected one of {sorted(FAMILY_OF_SYSTEM)}")
    if not 0 < cfg.epsilon <= 0.5:
        bad.append("epsilon must lie in (0, 0.5]")
    gp, gm = cfg.gamma_plus, cfg.gamma_minus
    if not gp > 1:
        bad.append("gamma_plus must exceed 1 (admissibility requires gamma_plus > 1)")
    if not gm > 2:
        bad.append("gamma_minus must exceed 2 (admissibility requires gamma_minus > 2)")
    if gp > 1 and gm > 2:
        hi1 = min(2 * (gm - 1), 4)
        if not 2 < cfg.gamma1 < hi1:
            bad.append(f"gamma1 outside (2, min{{2(gamma_minus-1), 4}}) = (2, {hi1:g}) (weight range condition)")
        hi2 = min(gm - 2, gp - 1, 0.5)
        if not 0 < cfg.gamma2 < hi2:
            bad.append(f"gamma2 outside (0, min{{gamma_minus-2, gamma_plus-1, 1/2}}) = (0, {hi2:g}) "
                       "(weight range condition)")
    if cfg.c0 < 2:
        bad.append("c0 must be >= 2")
    if not 0 < cfg.c < 0.25:
        bad.append("cutoff width c must lie in (0, 1/4)")
    if not 0 < cfg.lambda0 < 0.5:
        bad.append("lambda0 must lie in (0, 1/2)")
    kind = cfg.scattering.get("kind")
    if kind not in ("gaussian", "polynomial_decay", "table", "zero"):
        bad.append(f"unknown scattering kind {kind!r}")
    if kind == "table" and ("q" not in cfg.scattering or "values" not in cfg.scattering):
        bad.append("table scattering data needs 'q' and 'values'")
    if cfg.system == "euler" and "cs1" not in cfg.system_params:
        bad.append("euler system needs system params {'cs1': ...}")
    if bad:
        raise ConfigError(bad)
    return cfg


def load_config(path=None, overrides=(), data=None) -> RunConfig:
    """Validated RunConfig from a JSON file (or dict) plus key=value overrides."""
    if data is None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError([f"config file {path} not found"])
        except json.JSONDecodeError as e:
            raise ConfigError([f"config parse error: {e}"])
    if not isinstance(data, dict):
        raise ConfigError(["config must be a JSON object"])
    data = json.loads(json.dumps(data))
    for item in overrides:
        if "=" not in item:
            raise ConfigError([f"override {item!r} is not key=value"])
        key, raw = item.split("=", 1)
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        node = data
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = val
    sysv = data.pop("system", "semilinear_ut2")
    if isinstance(sysv, dict):
        data["system"] = sysv.get("name")
        data["system_params"] = sysv.get("params", {})
    else:
        data["system"] = sysv
    known = set(RunConfig.__dataclass_fields__)
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError([f"unknown config keys: {unknown}"])
    base = RunConfig()
    if "scattering" in data:
        data["scattering"] = {**base.scattering, **data["scattering"]}
    try:
        cfg = RunConfig(**{**asdict(base), **data})
    except TypeError as e:
        raise ConfigError([str(e)])
    return _validate(cfg)


# -------------------------------------------------------------- building

def family(cfg):
    return FAMILY_OF_SYSTEM[cfg.system]


def scattering_data(cfg: RunConfig):
    sc = dict(cfg.scattering)
    kind = sc.pop("kind")
    sign = sc.pop("sign", "as_given")
    gam = {"gamma_plus": cfg.gamma_plus, "gamma_minus": cfg.gamma_minus}
    if kind == "zero":
        return rd.zero_data(**gam)
    if kind == "table":
        return rd.table_data(np.asarray(sc["q"], float), np.asarray(sc["values"], float), **gam)
    amp = float(sc.pop("amp", -1.0))
    if sign == "auto":
        amp = abs(amp) * REQUIRED_SIGN[family(cfg)] * np.sign(_coefficient(cfg) or 1.0)
    if kind == "gaussian":
        return rd.gaussian_data(amp, sc.get("center", 0.0), sc.get("width", 1.0), **gam)
    return rd.polynomial_data(amp, sc.get("power", cfg.gamma_minus), **gam)


def _coefficient(cfg):
    if family(cfg) == "euler":
        return 1.0 + float(cfg.system_params["cs1"])
    return float(cfg.system_params.get("F", cfg.system_params.get("G", 1.0)))


def closed_solution(cfg: RunConfig, data=None):
    data = data or scattering_data(cfg)
    fam = family(cfg)
    if fam == "semilinear":
        return rd.closed_form_semilinear(data, cfg.system_params.get("F", 1.0))
    if fam == "quasilinear":
        return rd.closed_form_quasilinear_grad(data, cfg.system_params.get("G", 1.0))
    return rd.closed_form_euler(data, cfg.system_params["cs1"])


def optical_params(cfg, sol):
    return op.OpticalParams.for_solution(sol, cfg.epsilon, cfg.delta)


def threads():
    try:
        return max(1, int(os.environ.get("ASYMPWAVE_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    items = list(items)
    n = threads()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(n) as ex:
        return list(ex.map(fn, items))


# --------------------------------------------------------------- reports

class Report:
    def __init__(self, command, cfg):
        self.command = command
        self.cfg = cfg
        self.records = []
        self.csv = {}
        self.t0 = time.perf_counter()

    def add(self, rid, value, envelope, passed, provenance, check=True, **extra):
        rec = {"id": rid, "value": _jsonable(value), "envelope": envelope,
               "pass": bool(passed), "check": check, "provenance": provenance}
        rec.update({k: _jsonable(v) for k, v in extra.items()})
        self.records.append(rec)
        return rec

    @property
    def passed(self):
        return all(r["pass"] for r in self.records if r["check"])

    def write_csv(self, out, name, columns, rows):
        path = Path(out) / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(x) for x in row])
        self.csv[name] = {"columns": list(columns), "doc": CSV_DOCS.get(name, {})}

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, "version": __version__, "command": self.command,
                "config": self.cfg.to_dict(), "pass": self.passed, "records": self.records,
                "csv": self.csv, "timing_seconds": round(time.perf_counter() - self.t0, 3)}


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if np.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# -------------------------------------------------------------- commands

def cmd_reduced_solve(cfg, rep, out):
    sol = closed_solution(cfg)
    nq = cfg.grid("reduced", "n_q", 512)
    qh = cfg.grid("reduced", "q_half", 10.0)
    s_targets = cfg.grid("reduced", "s_targets", [0.5, 1.0, 2.0])
    steps = cfg.grid("reduced", "steps", 256)
    q = np.linspace(-qh, qh, nq)
    oms = sphere_directions(cfg.grid("reduced", "n_omega", 4))
    init = rd.sample_grid(sol, [0.0], q, oms)
    s_end = max(s_targets)
    num = rd.integrate_reduced(sol.system, init, (0.0, s_end), steps=steps)
    rows = []
    worst = 0.0
    for s in s_targets:
        i = int(np.argmin(np.abs(num.s_nodes - s)))
        exact = rd.sample_grid(sol, [num.s_nodes[i]], q, oms)
        err = max(np.max(np.abs(num.mu[i] - exact.mu[0])), np.max(np.abs(num.muU_q[i] - exact.muU_q[0])),
                  np.max(np.abs(num.U[i] - exact.U[0])))
        rows.append((float(num.s_nodes[i]), float(err)))
        worst = max(worst, err)
    rep.write_csv(out, "reduced.csv", ["s", "sup_error"], rows)
    rep.add("closed_form_agreement", worst, 1e-6, worst < 1e-6, "reduced.integrate_reduced",
            richardson_error=num.info.get("richardson_error"))


def cmd_admissibility(cfg, rep, out):
    sol = closed_solution(cfg)
    g = cfg.grids.get("admissibility", {})
    grid = adm.AdmissibilityGrid.default(sol.s_min, g.get("s_max", 10.0), g.get("n_s", 64), g.get("n_q", 512),
                                         g.get("n_omega", 8), g.get("q_half", 20.0))
    report = adm.check_admissible(sol, (cfg.gamma_plus, cfg.gamma_minus), grid)
    rows = []
    for r in report.records:
        rows.append((r.bound_id, r.fitted_C, r.margin, r.worst_point[0], r.worst_point[1]))
        rep.add(f"bound_{r.bound_id}", r.fitted_C, adm.STABILITY_TOL, r.passed, "admissibility.check_admissible",
                margin=r.margin, growth_rate=r.growth_rate)
    rep.write_csv(out, "admissibility.csv", ["bound_id", "fitted_C", "margin", "s", "q"], rows)
    failing = [r.bound_id for r in report.records if not r.passed]
    rep.add("failing_bounds", failing, [], not failing, "admissibility.check_admissible", check=False,
            caveat=report.caveat)


def _shock_seed(spec):
    name = spec.get("data", "rarefaction_step")
    if name == "rarefaction_step":
        w = float(spec.get("width", 1.0))
        return (lambda q: np.tanh(q / w)), (lambda q: 1 / (w * np.cosh(q / w) ** 2))
    if name == "neg_sin":
        return (lambda q: -np.sin(q)), (lambda q: -np.cos(q))
    if name == "gaussian":
        a = float(spec.get("amp", 1.0))
        return (lambda q: a * np.exp(-q * q)), (lambda q: -2 * a * q * np.exp(-q * q))
    raise ConfigError([f"unknown shock data {name!r}"])


def cmd_shock_time(cfg, rep, out):
    spec = cfg.shock
    V0, dV0 = _shock_seed(spec)
    fam = spec.get("family", "burgers")
    support = tuple(spec.get("support", (-10.0, 10.0)))
    s_star = rd.hormander_shock_time(V0, fam, spec.get("F", 1.0), dV0, support, spec.get("nodes", 4096))
    expected = spec.get("expected")
    if expected is None:
        rep.add("s_star", s_star, None, True, "reduced.hormander_shock_time",
                classification="global" if np.isinf(s_star) else "blow-up")
    else:
        exp = float("inf") if expected in ("inf", "+inf") else float(expected)
        ok = s_star == exp if np.isinf(exp) else abs(s_star - exp) <= 0.02 * abs(exp)
        rep.add("s_star", s_star, exp, ok, "reduced.hormander_shock_time")


def _q_targets(cfg, stage, default):
    return list(cfg.grid(stage, "q_values", default))


def cmd_optical_scan(cfg, rep, out):
    sol = closed_solution(cfg)
    P = optical_params(cfg, sol)
    g = cfg.grids.get("optical", {})
    t_nodes = np.geomspace(g.get("t_min", 50.0), g.get("t_max", 5000.0), g.get("n_t", 12))
    rmt = np.linspace(-g.get("q_half", 10.0), g.get("q_half", 10.0), g.get("n_r", 81))
    om = Direction([0.0, 0.0, 1.0])
    chart = op.build_chart(t_nodes, t_nodes[:, None] + rmt[None, :], [om], sol, P)
    dev = op.q_deviation_report(chart, (cfg.gamma_plus, cfg.gamma_minus))
    rep.add("deviation_constant", dev["deviation_constant"], None, np.isfinite(dev["deviation_constant"]),
            "optical.q_deviation_report", growth_exponent=dev["deviation_growth_exponent"])
    rep.add("two_sided_C", dev["two_sided_C"], 1.0, dev["two_sided_C"] < 1.0, "optical.q_deviation_report",
            slope=dev["two_sided_slope"])
    rows = []
    q_fixed = _q_targets(cfg, "optical", [-2.0, 0.0, 2.0])

    def eik_row(i):
        t = t_nodes[i]
        r = chart.r_nodes[i]
        q, nu = chart.q[0, i], chart.nu[0, i]
        e = op.eikonal_residual(np.full_like(r, t), r, om, sol, P, q, nu)
        return [(t, r[j], q[j], nu[j], q[j] - (r[j] - t), e[j]) for j in range(r.size)]

    for block in parallel_map(eik_row, range(t_nodes.size)):
        rows.extend(block)
    rep.write_csv(out, "optical_scan.csv", ["t", "r", "q", "nu", "q_minus_rmt", "eikonal_residual"], rows)
    # eikonal decay at fixed q: r from the chart rows, then one vectorised solve per q
    for qv in q_fixed:
        r_at = np.array([np.interp(qv, chart.q[0, i], chart.r_nodes[i]) for i in range(t_nodes.size)])
        vals = np.abs(op.eikonal_residual(t_nodes, r_at, om, sol, P))
        if np.min(vals) <= 0:
            rep.add(f"eikonal_exponent_q{qv:g}", 0.0, -1.7, True, "optical.eikonal_residual", note="identically zero")
            continue
        fit = pf.fit_decay_exponent(list(zip(t_nodes, vals)))
        rep.add(f"eikonal_exponent_q{qv:g}", fit.exponent, -1.7, fit.exponent <= -1.7, "optical.eikonal_residual")


def _profile_field(cfg, sol):
    P = optical_params(cfg, sol)
    return pf.ProfileField(sol, P, pf.CutoffSpec(cfg.c))


def cmd_residual_scan(cfg, rep, out):
    sol = closed_solution(cfg)
    F = _profile_field(cfg, sol)
    P = F.params
    g = cfg.grids.get("residual", {})
    t_nodes = np.geomspace(g.get("t_min", 1.2 * P.T_eps), g.get("t_max", 100 * P.T_eps), g.get("n_t", 7))
    q_vals = _q_targets(cfg, "residual", [-1.0, 0.0, 1.0])
    om = F.omega
    pts = []
    for qv in q_vals:
        for t in t_nodes:
            r = t + qv if F.exact_q else float(op.invert_r(t, qv, om, sol, P))
            pts.append((qv, float(t), r))
    res = parallel_map(lambda p: pf.wave_residual(p[1], p[2], F), pts)
    rows = []
    worst_cancel = 0.0
    for (qv, t, r), w in zip(pts, res):
        rn = float(np.max(np.abs(w["residual"])))
        pg = float(np.max(np.abs(w["metric_piece"])))
        pfv = float(np.max(np.abs(w["source_piece"])))
        rows.append((t, r, qv, rn, pg, pfv))
        if t >= 10 * P.T_eps and max(pg, pfv) > 0:
            worst_cancel = max(worst_cancel, rn / max(pg, pfv))
    rep.write_csv(out, "residual_scan.csv", ["t", "r", "q", "residual_norm", "piece_g", "piece_f"], rows)
    for qv in q_vals:
        sel = [(t, rn) for (t, r, q, rn, _, _) in rows if q == qv and rn > 0]
        if len(sel) < 5:
            rep.add(f"residual_exponent_q{qv:g}", 0.0, -2.7, True, "profile.wave_residual", note="identically zero")
            continue
        fit = pf.fit_decay_exponent(sel)
        rep.add(f"residual_exponent_q{qv:g}", fit.exponent, -2.7, fit.exponent <= -2.7, "profile.wave_residual")
    rep.add("cancellation_ratio", worst_cancel, 0.2, worst_cancel <= 0.2, "profile.wave_residual", check=False)


def cmd_poincare(cfg, rep, out):
    g = cfg.grids.get("poincare", {})
    times = g.get("t_values", [200.0, 2000.0])
    eta = g.get("eta", 1.2)
    n = g.get("n_snapshots", 20)
    W = cfg.weights()
    chart_sol = None
    if g.get("chart", "flat") == "solution":
        chart_sol = closed_solution(cfg)
    rows = []
    for t in times:
        variant = "lp1" if t >= en.lp1_threshold(eta) else "lp1st"
        snaps = en.random_snapshots(t, n, cfg.seed)
        fine = en.random_snapshots(t, n, cfg.seed, r_nodes=np.linspace(snaps[0].r_nodes[0], snaps[0].r_nodes[-1],
                                                                        2 * snaps[0].r_nodes.size - 1))
        for v in (variant, "lp2"):
            ratios, ratios_f = [], []
            for i, (a, b) in enumerate(zip(snaps, fine)):
                ca = cb = None
                if v == "lp2":
                    if chart_sol is None:
                        ca, cb = en.ChartSlice.flat(t, a.r_nodes), en.ChartSlice.flat(t, b.r_nodes)
                    else:
                        P = optical_params(cfg, chart_sol)
                        ca = en.ChartSlice.from_solution(t, a.r_nodes, chart_sol, P)
                        cb = en.ChartSlice.from_solution(t, b.r_nodes, chart_sol, P)
                ra = en.poincare_ratio(a, eta, cfg.c, v, ca, W)
                rb = en.poincare_ratio(b, eta, cfg.c, v, cb, W)
                ratios.append(ra)
                ratios_f.append(rb)
                rows.append((t, v, i, ra, rb))
            C, Cf = max(ratios), max(ratios_f)
            stable = abs(C - Cf) <= 0.1 * max(C, Cf)
            rep.add(f"{v}_t{t:g}", C, "finite, +-10% under refinement", bool(np.isfinite(C) and stable),
                    "energy.poincare_ratio", refined=Cf)
    rep.write_csv(out, "poincare.csv", ["t", "variant", "index", "ratio", "ratio_fine"], rows)


def _backward_setup(cfg):
    if cfg.system != "semilinear_ut2":
        raise ConfigError(["backward solves are implemented for semilinear_ut2 only"])
    sol = closed_solution(cfg)
    return _profile_field(cfg, sol)


def cmd_backward(cfg, rep, out):
    F = _backward_setup(cfg)
    T_eps = F.params.T_eps
    g = cfg.grids.get("backward", {})
    T = g.get("T", 4 * T_eps)
    grid = bs.GridSpec(g.get("dr", 1 / 22), g.get("dt", 0.04), g.get("max_nodes", 40_000))
    run = bs.solve_backward(T, T_eps, F, cfg.weights(), grid, snapshot_times=(T_eps,))
    h = run.history
    rep.write_csv(out, "backward.csv", ["t", "energy_w0", "sup_v"], zip(h["t"], h["energy_w0"], h["sup_v"]))
    fit = run.energy_fit(T_eps, T)
    rep.add("energy_exponent", fit.exponent, [-0.8, -0.3], -0.8 <= fit.exponent <= -0.3,
            "backward_solver.solve_backward", runtime=run.runtime)
    if g.get("self_convergence", True):
        fine = bs.solve_backward(T, T_eps, F, cfg.weights(), grid.halved(), snapshot_times=(T_eps,))
        sc = bs.self_convergence(run, fine, T_eps, cfg.weights())
        rep.add("self_convergence", sc, 0.05, sc < 0.05, "backward_solver.solve_backward")


def cmd_horizon(cfg, rep, out):
    F = _backward_setup(cfg)
    T_eps = F.params.T_eps
    g = cfg.grids.get("horizon", {})
    factors = g.get("T1_factors", [4, 8, 16])
    grid = bs.GridSpec(g.get("dr", 1 / 11), g.get("dt", 0.08), g.get("max_nodes", 200_000))
    horizons = sorted({f * T_eps for f in factors} | {2 * f * T_eps for f in factors})
    times = [t for t in g.get("t_values", [50, 60, 80, 100, 140, 200, 280, 400, 560, 800]) if t >= T_eps]
    runs = {T: bs.solve_backward(T, T_eps, F, cfg.weights(), grid, snapshot_times=[t for t in times if t <= T])
            for T in horizons}
    rows, fit_pts = [], []
    for f in factors:
        T1 = f * T_eps
        hc = bs.horizon_compare(runs[T1], runs[2 * T1], cfg.lambda0, cfg.weights())
        for t, de, ds, wv in zip(hc["t"], hc["energy_diff"], hc["sup_diff"], hc["weighted"]):
            rows.append((T1, t, de, ds, wv))
        fit_pts.append((T1, hc["max_weighted"]))
    rep.write_csv(out, "horizon.csv", ["T1", "t", "energy_diff", "sup_diff", "weighted"], rows)
    fit = pf.fit_decay_exponent(fit_pts, min_samples=3, min_spread=1.0)
    target = -0.5 + cfg.lambda0
    rep.add("horizon_rate", fit.exponent, target + 0.1, fit.exponent <= target + 0.1,
            "backward_solver.horizon_compare", points=fit_pts)


def cmd_constraints(cfg, rep, out):
    if family(cfg) == "semilinear":
        raise ConfigError(["semilinear_ut2 carries no constraints"])
    sol = closed_solution(cfg)
    q = np.linspace(-10, 10, cfg.grid("constraints", "n_q", 512))
    oms = sphere_directions(cfg.grid("constraints", "n_omega", 4))
    s_nodes = np.linspace(0, 2, 9)
    closed = rd.constraint_residual(sol, rd.sample_grid(sol, s_nodes, q, oms))
    init = rd.sample_grid(sol, [0.0], q, oms)
    num = rd.integrate_reduced(sol.system, init, (0.0, 2.0), steps=cfg.grid("constraints", "steps", 64))
    num.info["system"] = sol.kind
    prop = rd.constraint_residual(None, num)
    rows = [("closed", k, v) for k, v in closed.items()] + [("propagated", k, v) for k, v in prop.items()]
    rep.write_csv(out, "constraints.csv", ["source", "constraint", "value"], rows)
    cmax, pmax = max(closed.values()), max(prop.values())
    rep.add("closed_constraints", cmax, 1e-12, cmax < 1e-12, "reduced.constraint_residual")
    rep.add("propagated_constraints", pmax, 1e-6, pmax < 1e-6, "reduced.constraint_residual")


HANDLERS = {
    "reduced-solve": cmd_reduced_solve, "admissibility-check": cmd_admissibility, "shock-time": cmd_shock_time,
    "optical-scan": cmd_optical_scan, "residual-scan": cmd_residual_scan, "poincare-check": cmd_poincare,
    "backward-solve": cmd_backward, "horizon-compare": cmd_horizon, "constraint-check": cmd_constraints,
}


def run_command(cmd, cfg: RunConfig, out=None):
    """Run one pipeline stage; returns the Report (report.json and CSVs are written to ``out``)."""
    if cmd not in HANDLERS:
        raise ConfigError([f"unknown command {cmd!r}"])
    out = Path(out or cfg.output or os.environ.get("ASYMPWAVE_OUT", "asympwave_out"))
    out.mkdir(parents=True, exist_ok=True)
    rep = Report(cmd, cfg)
    HANDLERS[cmd](cfg, rep, out)
    (out / "report.json").write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=False) + "\n")
    return rep


def build_parser():
    p = argparse.ArgumentParser(prog="asympwave", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for c in COMMANDS:
        sp = sub.add_parser(c)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.override)
        rep = run_command(args.command, cfg, args.out)
    except ConfigError as e:
        for v in e.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    for r in rep.records:
        status = "PASS" if r["pass"] else "FAIL"
        tag = "" if r["check"] else " (diagnostic)"
        print(f"{status} {r['id']} = {r['value']} (envelope {r['envelope']}){tag}")
    if not rep.passed:
        failed = [r["id"] for r in rep.records if r["check"] and not r["pass"]]
        print("failing checks: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
