"""Figure data sets and their SVG renderings.

Each figure has a stable string id, a table of default parameters that can
be overridden (with type checking), and a builder returning the CSV table
and plot panels. Simulation-backed figures default to desk-scale trial
counts; raise ``trials`` for smoother curves.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import pacbounds as pb
from .core import ErrorBudget, InvalidParameter, PacTarget, Unsatisfiable
from .designs import optimal_row_weight
from .montecarlo import DECODER_KIND, TrialPlan, design_for, empirical_rate_curves
from .svgplot import Panel, Series, render


@dataclass
class FigureData:
    columns: tuple[str, ...]
    rows: list[tuple]
    panels: list[Panel]
    dropped: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_cell(v) for v in row) + "\n")
        return buf.getvalue()

    def to_svg(self) -> str:
        return render(self.panels)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


@dataclass(frozen=True)
class FigureDef:
    id: str
    number: int
    title: str
    defaults: dict[str, Any]
    build: Callable[..., FigureData]


REGISTRY: dict[str, FigureDef] = {}


def figure(fig_id: str, number: int, title: str, **defaults):
    def wrap(fn):
        REGISTRY[fig_id] = FigureDef(fig_id, number, title, defaults, fn)
        return fn

    return wrap


def resolve_params(fig_id: str, overrides: dict[str, Any] | None) -> dict[str, Any]:
    """Merge overrides into the figure defaults, checking names and types."""
    if fig_id not in REGISTRY:
        raise InvalidParameter("id", f"unknown figure {fig_id!r}; known: {sorted(REGISTRY)}")
    params = dict(REGISTRY[fig_id].defaults)
    for key, value in (overrides or {}).items():
        if key not in params:
            raise InvalidParameter(key, f"not a parameter of figure {fig_id}")
        params[key] = _coerce(key, params[key], value)
    return params


def _coerce(key, default, value):
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
    elif isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif isinstance(default, list):
        if isinstance(value, list):
            if default and all(isinstance(d, (int, float)) for d in default):
                if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
                    raise InvalidParameter(key, "expected a list of numbers")
            return value
    elif isinstance(default, str) and isinstance(value, str):
        return value
    raise InvalidParameter(key, f"expected {type(default).__name__}, got {value!r}")


def build_figure(fig_id: str, overrides: dict[str, Any] | None = None, threads: int = 1) -> FigureData:
    params = resolve_params(fig_id, overrides)
    return REGISTRY[fig_id].build(params, threads)


def _try(fn, counter: list):
    """Evaluate ``fn``; on an unsatisfiable bound, count and warn instead of failing."""
    try:
        return fn()
    except Unsatisfiable as exc:
        counter[0] += 1
        warnings.warn(f"grid point dropped: {exc}", stacklevel=2)
        return None


def _log_inv_delta_grid(lo: float, hi: float, points: int) -> np.ndarray:
    return np.linspace(lo, hi, points)


# F1


@figure(
    "minlp",
    1,
    "Grid-search optimum vs fixed-point iteration for CoMa",
    instances=[[2500, 50], [10000, 100], [10000, 200]],
    delta=0.01,
    eps_min=1e-3,
    eps_max=0.1,
    eps_points=10,
    p_points=2000,
)
def _fig_minlp(P, threads):
    rows = []
    eps_grid = np.geomspace(P["eps_min"], P["eps_max"], P["eps_points"])
    panels = [
        Panel("Sufficient tests", "epsilon", "m_S", xlog=True),
        Panel("Bernoulli parameter", "epsilon", "p_opt", xlog=True),
        Panel("False-positive budget", "epsilon", "g_eps", xlog=True),
    ]
    for n, k in P["instances"]:
        n, k = int(n), int(k)
        fp_rows, grid_rows = [], []
        for eps in eps_grid:
            fp = pb.coma_fixed_point_opt(n, k, float(eps), P["delta"])
            grid = pb.coma_minlp_grid(
                n, k, float(eps), P["delta"], p_grid=pb.default_p_grid(k, P["p_points"])
            )
            rows.append((n, k, float(eps), fp.m_s, fp.p_opt, fp.g_eps, grid.m_s, grid.p_opt, grid.g_eps))
            fp_rows.append(fp)
            grid_rows.append(grid)
        tag = f"({n},{k})"
        for panel, attr in zip(panels, ("m_s", "p_opt", "g_eps")):
            panel.series.append(Series(f"fixed point {tag}", eps_grid, [getattr(r, attr) for r in fp_rows]))
            panel.series.append(
                Series(f"grid {tag}", eps_grid, [getattr(r, attr) for r in grid_rows], style="scatter")
            )
    cols = ("n", "k", "epsilon", "m_fixed_point", "p_fixed_point", "g_fixed_point", "m_grid", "p_grid", "g_grid")
    return FigureData(cols, rows, panels)


# F2


@figure(
    "cbp_eta_approx",
    2,
    "CBP bound at the optimal row weight and closed-form Chernoff parameters",
    n=2500,
    k=50,
    c=0.5,
    log_inv_delta_min=0.5,
    log_inv_delta_max=25.0,
    points=50,
)
def _fig_cbp_eta(P, threads):
    n, k, c = P["n"], P["k"], P["c"]
    x = _log_inv_delta_grid(P["log_inv_delta_min"], P["log_inv_delta_max"], P["points"])
    rows = []
    for li in x:
        delta = math.exp(-li)
        target = PacTarget(0.0, delta)
        thm = pb.cbp_sufficient_tests(n, k, target, c=c)
        cor = pb.cbp_sstar_bound(n, k, target, c=c)
        eta = thm.intermediates["eta"]
        closed = math.e * k / (1 - eta) * (math.log(n - k) + math.log(2 / delta))
        approx = {r: pb.cbp_eta_approx(n, k, 0, delta, r) for r in ("n_dominant", "delta_dominant", "comparable")}
        rows.append(
            (
                float(li), delta, thm.rho_r, cor.rho_r, closed / n, eta,
                approx["n_dominant"], approx["delta_dominant"], approx["comparable"],
                pb.cbp_eta_regime(n, k, 0, delta),
            )
        )
    cols = (
        "log_inv_delta", "delta", "rho_general", "rho_sstar_factored", "rho_exact_recovery_form",
        "eta_exact", "eta_n_dominant", "eta_delta_dominant", "eta_comparable", "auto_regime",
    )
    xs = [r[0] for r in rows]
    left = Panel("CBP testing rate", "log(1/delta)", "testing rate m_S/n")
    left.series = [
        Series("general form, s = s*", xs, [r[2] for r in rows]),
        Series("growth factor taken out", xs, [r[3] for r in rows], style="dashed"),
        Series("exact-recovery form", xs, [r[4] for r in rows], style="scatter"),
    ]
    right = Panel("Chernoff parameter", "log(1/delta)", "eta")
    right.series = [
        Series("exact", xs, [r[5] for r in rows]),
        Series("delta << 2/(n-k)", xs, [r[6] for r in rows], style="dashed"),
        Series("delta >> 2/(n-k)", xs, [r[7] for r in rows], style="dashed"),
        Series("delta ~ 2/(n-k)", xs, [r[8] for r in rows], style="dashed"),
    ]
    return FigureData(cols, rows, [left, right])


# F3 to F5


def _algorithm_figure(algorithm: str, P, threads):
    n, k = P["n"], P["k"]
    budgets = [int(b) for b in P["budgets"]]
    xs = _log_inv_delta_grid(P["log_inv_delta_min"], P["log_inv_delta_max"], P["points"])
    dropped = [0]
    rows = []
    left = Panel("Bounds vs prior exact-recovery result", "log(1/delta)", "testing rate m_S/n")
    right = Panel("Bound vs simulation", "log(1/delta)", "testing rate m/n")
    baseline = [pb.baseline_bounds(algorithm, n, k, math.exp(-x)) / n for x in xs]
    left.series.append(Series("prior exact-recovery bound", xs, baseline, color="#000000"))
    for x, y in zip(xs, baseline):
        rows.append(("left", "baseline", "", float(x), y))
    bound_m = {}
    for b in budgets:
        pts = []
        for x in xs:
            r = _try(lambda: pb.sufficient_tests(algorithm, n, k, PacTarget(0.0, math.exp(-x)), budget=b), dropped)
            if r is not None:
                pts.append((float(x), r.rho_r, r.m_s))
        bound_m[b] = [p[2] for p in pts]
        for panel in (left, right):
            panel.series.append(Series(f"bound, budget {b}", [p[0] for p in pts], [p[1] for p in pts]))
        rows.extend(("left", "bound", b, p[0], p[1]) for p in pts)
    if P["trials"] > 0:
        lo = max(1, min(min(v) for v in bound_m.values() if v) // 3)
        hi = max(max(v) for v in bound_m.values() if v)
        m_grid = sorted(set(np.linspace(lo, hi, P["m_points"]).round().astype(int).tolist()))
        kind = DECODER_KIND[algorithm]
        template = TrialPlan(
            n, k, design_for(algorithm, n, k), algorithm, m_grid[0], ErrorBudget(kind, 0),
            trials=P["trials"], master_seed=P["seed"],
        )
        curves = empirical_rate_curves(template, m_grid, budgets, threads)
        for b in budgets:
            pts = [(-math.log(s.p_hat), s.plan.m / n) for s in curves[b] if 0 < s.p_hat < 1]
            right.series.append(Series(f"simulated, budget {b}", [p[0] for p in pts], [p[1] for p in pts], style="scatter"))
            rows.extend(("right", "simulated", b, p[0], p[1]) for p in pts)
    return FigureData(("panel", "series", "budget", "log_inv_delta", "rho_R"), rows, [left, right], dropped[0])


_SIM_DEFAULTS = dict(n=2500, k=50, log_inv_delta_min=0.25, log_inv_delta_max=7.0, points=28, trials=200, m_points=12, seed=2024)


@figure("coma", 3, "CoMa bound, prior bound and simulation", budgets=[0, 5, 25], **_SIM_DEFAULTS)
def _fig_coma(P, threads):
    return _algorithm_figure("coma", P, threads)


@figure("cbp", 4, "CBP bound, prior bound and simulation", budgets=[0, 5, 25], **_SIM_DEFAULTS)
def _fig_cbp(P, threads):
    return _algorithm_figure("cbp", P, threads)


@figure("dd", 5, "DD bound, prior bound and simulation", budgets=[0, 2, 5], **_SIM_DEFAULTS)
def _fig_dd(P, threads):
    return _algorithm_figure("dd", P, threads)


# F6


@figure(
    "approx_error",
    6,
    "Testing rate vs number of allowed errors",
    n=2500,
    k=50,
    deltas=[0.1, 0.01, 0.001],
    max_budget=50,
)
def _fig_approx_error(P, threads):
    n, k = P["n"], P["k"]
    rows = []
    left = Panel("CoMa and CBP", "false positives allowed", "testing rate m_S/n")
    right = Panel("DD", "false negatives allowed", "testing rate m_S/n")
    for algorithm, panel, cap in (("coma", left, n - k - 1), ("cbp", left, n - k - 1), ("dd", right, k - 1)):
        budgets = list(range(0, min(P["max_budget"], cap) + 1))
        for delta in P["deltas"]:
            ys = [pb.sufficient_tests(algorithm, n, k, PacTarget(0.0, delta), budget=b).rho_r for b in budgets]
            rows.extend((algorithm, delta, b, y) for b, y in zip(budgets, ys))
            panel.series.append(Series(f"{algorithm}, delta={delta:g}", budgets, ys))
    return FigureData(("algorithm", "delta", "budget", "rho_R"), rows, [left, right])


# F7


@figure(
    "delta_eps",
    7,
    "Certified delta vs number of allowed errors at fixed m",
    n=2500,
    k=50,
    coma_m=[1250, 1400],
    cbp_m=[1500, 1800],
    dd_m=[900, 1100],
    max_budget=10,
)
def _fig_delta_eps(P, threads):
    n, k = P["n"], P["k"]
    p = 1.0 / k
    rows = []
    panel = Panel("Confidence vs error tolerance", "errors allowed", "delta", ylog=True)
    budgets = list(range(P["max_budget"] + 1))
    funcs = {
        "coma": lambda m, b: pb.coma_failure_bound(n, k, p, m, b),
        "cbp": lambda m, b: pb.cbp_failure_bound(n, k, m, b),
        "dd": lambda m, b: pb.dd_failure_bound(n, k, p, m, b),
    }
    for algorithm in ("coma", "cbp", "dd"):
        for m in P[f"{algorithm}_m"]:
            ys = [funcs[algorithm](int(m), b) for b in budgets]
            rows.extend((algorithm, int(m), b, y) for b, y in zip(budgets, ys))
            panel.series.append(Series(f"{algorithm}, m={m}", budgets, ys))
    return FigureData(("algorithm", "m", "budget", "delta"), rows, [panel])


# F8 to F10


def _prevalence_ks(n, pct_min, pct_max, points):
    ks = np.unique(np.clip(np.round(np.linspace(pct_min, pct_max, points) / 100 * n), 1, n - 1).astype(int))
    return [int(k) for k in ks]


def _eta(n, k, g, delta, c):
    return pb.cbp_params(n, k, g, delta, optimal_row_weight(n, k), c).eta


@figure(
    "eta_vs_p",
    8,
    "CBP Chernoff parameter vs prevalence",
    n=2500,
    budgets=[0, 5, 25],
    deltas=[0.1, 1e-5],
    c=0.5,
    prevalence_min=0.2,
    prevalence_max=20.0,
    points=40,
)
def _fig_eta_vs_p(P, threads):
    n = P["n"]
    ks = _prevalence_ks(n, P["prevalence_min"], P["prevalence_max"], P["points"])
    rows = []
    panel = Panel("Chernoff parameter", "prevalence (%)", "eta")
    for g in P["budgets"]:
        for delta in P["deltas"]:
            ys = [_eta(n, k, int(g), delta, P["c"]) for k in ks]
            xs = [100 * k / n for k in ks]
            rows.extend((int(g), delta, x, k, y) for x, k, y in zip(xs, ks, ys))
            panel.series.append(Series(f"g={g}, delta={delta:g}", xs, ys))
    return FigureData(("g_eps", "delta", "prevalence_pct", "k", "eta"), rows, [panel])


@figure(
    "eta_surface",
    9,
    "CBP Chernoff parameter over prevalence and delta",
    n=2500,
    c=0.5,
    prevalence_min=0.2,
    prevalence_max=20.0,
    points=25,
    log10_delta_min=-10.0,
    log10_delta_max=-1.0,
    delta_points=10,
)
def _fig_eta_surface(P, threads):
    n = P["n"]
    ks = _prevalence_ks(n, P["prevalence_min"], P["prevalence_max"], P["points"])
    deltas = np.logspace(P["log10_delta_min"], P["log10_delta_max"], P["delta_points"])
    rows = []
    panel = Panel("Chernoff parameter slices", "prevalence (%)", "eta")
    for delta in deltas:
        ys = [_eta(n, k, 0, float(delta), P["c"]) for k in ks]
        xs = [100 * k / n for k in ks]
        rows.extend((x, k, float(delta), y) for x, k, y in zip(xs, ks, ys))
        panel.series.append(Series(f"delta={delta:.0e}", xs, ys))
    return FigureData(("prevalence_pct", "k", "delta", "eta"), rows, [panel])


@figure(
    "eta_vs_n",
    10,
    "CBP Chernoff parameter vs prevalence for several n",
    ns=[1000, 2500, 10000, 100000],
    delta=1e-5,
    c=0.5,
    prevalence_min=0.2,
    prevalence_max=20.0,
    points=40,
)
def _fig_eta_vs_n(P, threads):
    rows = []
    panel = Panel("Chernoff parameter", "prevalence (%)", "eta")
    for n in P["ns"]:
        n = int(n)
        ks = _prevalence_ks(n, P["prevalence_min"], P["prevalence_max"], P["points"])
        xs = [100 * k / n for k in ks]
        ys = [_eta(n, k, 0, P["delta"], P["c"]) for k in ks]
        rows.extend((n, x, k, y) for x, k, y in zip(xs, ks, ys))
        panel.series.append(Series(f"n={n}", xs, ys))
    return FigureData(("n", "prevalence_pct", "k", "eta"), rows, [panel])


# F11


@figure(
    "gtilde",
    11,
    "Smallest admissible DD slack from the mixture over hidden counts",
    n_min=100,
    n_max=500,
    n_step=50,
    ks=[5, 10, 20],
    d_values=[0, 1, 2],
    delta=0.01,
)
def _fig_gtilde(P, threads):
    rows = []
    panel = Panel("DD slack parameter", "n", "g_tilde", ylog=False)
    ns = list(range(P["n_min"], P["n_max"] + 1, P["n_step"]))
    dropped = [0]
    for d in P["d_values"]:
        for k in P["ks"]:
            k = int(k)
            if d >= k:
                continue
            pts = []
            for n in ns:
                if k >= n:
                    continue
                target = PacTarget(0.0, P["delta"])
                grid = _try(lambda: pb.dd_sufficient_tests(n, k, 1.0 / k, target, "grid", budget=int(d)), dropped)
                with warnings.catch_warnings():
                    # The envelope outcome is reported as a column instead.
                    warnings.filterwarnings("ignore", message="dd: gtilde")
                    dflt = _try(lambda: pb.dd_sufficient_tests(n, k, 1.0 / k, target, budget=int(d)), dropped)
                if grid is None or dflt is None:
                    continue
                holds = pb.dd_envelope_holds(n, k, 1.0 / k, dflt.m_s, int(d), dflt.intermediates["g_tilde"])
                gt = grid.intermediates["g_tilde"]
                rows.append((n, k, int(d), grid.m_s, gt, dflt.m_s, dflt.intermediates["g_tilde"], holds))
                pts.append((n, gt))
            panel.series.append(
                Series(f"d={d}, k={k}", [p[0] for p in pts], [p[1] for p in pts], style="scatter")
            )
    cols = ("n", "k", "d_eps", "m_grid", "g_tilde_grid", "m_default", "g_tilde_default", "default_envelope_holds")
    return FigureData(cols, rows, [panel], dropped[0])


# F12 to F14


@figure(
    "surfaces",
    12,
    "Testing rate over error tolerance and confidence",
    n=2500,
    k=50,
    budget_max=50,
    budget_step=5,
    one_minus_delta_min=0.5,
    one_minus_delta_max=0.999,
    confidence_points=12,
)
def _fig_surfaces(P, threads):
    n, k = P["n"], P["k"]
    conf = np.linspace(P["one_minus_delta_min"], P["one_minus_delta_max"], P["confidence_points"])
    rows = []
    panels = []
    for algorithm in ("coma", "cbp", "dd"):
        cap = n - k - 1 if algorithm != "dd" else k - 1
        budgets = list(range(0, min(P["budget_max"], cap) + 1, P["budget_step"]))
        panel = Panel(algorithm, "1 - delta", "testing rate m_S/n")
        for b in budgets:
            ys = []
            for c1 in conf:
                r = pb.sufficient_tests(algorithm, n, k, PacTarget(0.0, float(1 - c1)), budget=b)
                rows.append((algorithm, b, float(c1), r.rho_r, r.m_s))
                ys.append(r.rho_r)
            panel.series.append(Series(f"budget {b}", conf, ys))
        panels.append(panel)
    return FigureData(("algorithm", "budget", "one_minus_delta", "rho_R", "m_s"), rows, panels)


# F15


@figure(
    "rate_vs_n",
    15,
    "Testing rate vs population size for k = 0.95 n^beta",
    betas=[0.2, 0.35, 0.5],
    log10_n_min=3.0,
    log10_n_max=6.0,
    points=13,
    delta=1e-3,
    budgets=[0, 5],
    coefficient=0.95,
)
def _fig_rate_vs_n(P, threads):
    ns = np.unique(np.round(np.logspace(P["log10_n_min"], P["log10_n_max"], P["points"])).astype(int))
    rows = []
    panels = []
    dropped = [0]
    for b in P["budgets"]:
        panel = Panel(f"{'exact' if b == 0 else f'{b} errors'} recovery", "n", "testing rate m_S/n", xlog=True, ylog=True)
        for beta in P["betas"]:
            for algorithm in ("coma", "cbp", "dd"):
                pts = []
                for n in ns:
                    n = int(n)
                    k = max(1, int(round(P["coefficient"] * n**beta)))
                    if algorithm == "dd" and b >= k:
                        continue
                    r = _try(lambda: pb.sufficient_tests(algorithm, n, k, PacTarget(0.0, P["delta"]), budget=int(b)), dropped)
                    if r is None:
                        continue
                    rows.append((algorithm, beta, n, k, int(b), r.rho_r))
                    pts.append((n, r.rho_r))
                style = {"coma": "line", "cbp": "dashed", "dd": "scatter"}[algorithm]
                panel.series.append(Series(f"{algorithm}, beta={beta}", [p[0] for p in pts], [p[1] for p in pts], style=style))
        panels.append(panel)
    return FigureData(("algorithm", "beta", "n", "k", "budget", "rho_R"), rows, panels, dropped[0])
