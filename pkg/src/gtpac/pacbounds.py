"""Sufficient-test bounds for CoMa, CBP and DD under (epsilon, delta) targets.

Conventions used throughout:

* ``q = 1 - p`` for the Bernoulli design.
* An *error budget* is the number of false positives (CoMa, CBP) or false
  negatives (DD) an estimate may contain while its disagreement probability
  on a fresh test stays at most ``epsilon``.
* Real-valued bounds are kept in ``m_real`` and rounded up once, when the
  :class:`~gtpac.core.BoundResult` is built.
* A budget is *saturated* when ``epsilon`` is at least the largest error
  any estimate can reach. The budget is then clamped to its maximum and the
  failure event becomes impossible, so one test suffices.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, logsumexp

from .core import (
    BoundResult,
    ErrorBudget,
    ErrorKind,
    InvalidParameter,
    NonConvergence,
    PacTarget,
    Unsatisfiable,
    _check_int,
    _check_probability,
)
from .coupon import EULER_GAMMA, SccpInstance, harmonic, sccp_expected_time
from .designs import optimal_row_weight

E = math.e

# Largest population for which the default DD gtilde is checked against the
# full distribution of G at run time (the check costs O((n - k) m)).
ENVELOPE_CHECK_MAX_N = 500


def log_binom(a, b):
    """log C(a, b) through log-gamma; -inf when b is outside [0, a]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    inside = (b >= 0) & (b <= a)
    with np.errstate(invalid="ignore"):
        out = gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)
    out = np.where(inside, out, -np.inf)
    return float(out) if out.ndim == 0 else out


def _check_instance(n, k):
    _check_int("n", n, 2)
    _check_int("k", k, 1)
    if not 0 < k < n:
        raise InvalidParameter("k", f"need 0 < k < n, got k={k}, n={n}")


def _check_eps(eps):
    _check_probability("epsilon", eps, open_low=False, open_high=False)


def _largest_feasible(error, estimate: int, low: int, high: int, eps: float) -> int:
    """Largest integer c in [low, high] with error(c) <= eps, starting near ``estimate``.

    ``error`` must be nondecreasing. The closed forms are floors of real
    expressions, so rounding can put them one step off near a boundary;
    this walks to the exact answer.
    """
    c = min(max(estimate, low), high)
    while c > low and error(c) > eps:
        c -= 1
    while c < high and error(c + 1) <= eps:
        c += 1
    return c


@dataclass(frozen=True)
class Budget:
    count: int
    saturated: bool


# Error budgets.


def fp_error_bernoulli(G, k, p):
    """Disagreement probability of an estimate with G extra items (Bernoulli design)."""
    q = 1.0 - p
    return (1.0 - q**G) * q**k


def fn_error_bernoulli(D, k, p):
    """Disagreement probability of an estimate missing D defectives (Bernoulli design)."""
    q = 1.0 - p
    return (1.0 - q**D) * q ** (k - D)


def fp_error_rowweight(G, n, k, s):
    """Disagreement probability of an estimate with G extra items (row-weight design)."""
    return (1.0 - k / n) ** s * (1.0 - (1.0 - G / (n - k)) ** s)


def geps_bernoulli_budget(eps: float, k: int, p: float, n: int | None = None) -> Budget:
    _check_eps(eps)
    _check_int("k", k, 1)
    _check_probability("p", p)
    q = 1.0 - p
    ceiling = q**k
    cap = None if n is None else n - k
    if eps >= ceiling:
        if cap is None:
            raise InvalidParameter("n", "needed to clamp a saturated false-positive budget")
        return Budget(cap, True)
    estimate = math.floor(math.log1p(-eps / ceiling) / math.log1p(-p))
    high = cap if cap is not None else max(estimate + 2, 2)
    g = _largest_feasible(lambda G: fp_error_bernoulli(G, k, p), estimate, 0, high, eps)
    return Budget(g, False)


def geps_bernoulli(eps: float, k: int, p: float, n: int | None = None) -> int:
    """Largest false-positive count whose disagreement probability stays within ``eps``.

    Returns ``n - k`` when ``eps`` reaches the error ceiling ``(1-p)^k``;
    ``n`` is then required.
    """
    return geps_bernoulli_budget(eps, k, p, n).count


def geps_rowweight_budget(eps: float, n: int, k: int, s: float) -> Budget:
    _check_eps(eps)
    _check_instance(n, k)
    if not s >= 1:
        raise InvalidParameter("s", f"must be >= 1, got {s}")
    ceiling = (1.0 - k / n) ** s
    if eps >= ceiling:
        return Budget(n - k, True)
    estimate = math.floor((n - k) * (1.0 - (1.0 - eps / ceiling) ** (1.0 / s)))
    g = _largest_feasible(lambda G: fp_error_rowweight(G, n, k, s), estimate, 0, n - k, eps)
    return Budget(g, False)


def geps_rowweight(eps: float, n: int, k: int, s: float) -> int:
    """False-positive budget for the row-weight design with real row weight ``s``."""
    return geps_rowweight_budget(eps, n, k, s).count


def deps_bernoulli_budget(eps: float, k: int, p: float) -> Budget:
    _check_eps(eps)
    _check_int("k", k, 1)
    _check_probability("p", p)
    q = 1.0 - p
    if eps >= 1.0 - q**k:
        return Budget(k, True)
    estimate = math.floor(math.log1p(eps / q**k) / -math.log1p(-p))
    d = _largest_feasible(lambda D: fn_error_bernoulli(D, k, p), estimate, 0, k, eps)
    return Budget(d, False)


def deps_bernoulli(eps: float, k: int, p: float) -> int:
    """Largest false-negative count whose disagreement probability stays within ``eps``."""
    return deps_bernoulli_budget(eps, k, p).count


# CoMa.


def hidden_prob(g: int, k: int, p: float, m: int) -> float:
    """Probability that a fixed set of g non-defectives avoids every negative test."""
    _check_int("g", g, 1)
    _check_int("k", k, 1)
    _check_int("m", m, 0)
    _check_probability("p", p)
    q = 1.0 - p
    return math.exp(m * math.log1p(-(q**k) + q ** (g + k)))


def _coma_log_failure(n, k, p, g, m):
    """log of the union bound on more than g false positives after m tests."""
    q = 1.0 - p
    return log_binom(n - k, g + 1) + m * np.log1p(-(q**k) + q ** (g + k + 1))


def _coma_m_real(n, k, p, g, delta):
    q = 1.0 - p
    rate = -np.log1p(-(q**k) + q ** (np.asarray(g) + k + 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        return (log_binom(n - k, np.asarray(g) + 1) + math.log(1.0 / delta)) / rate


def _result(algorithm, n, k, m_real, kind, count, intermediates, saturated):
    if not math.isfinite(m_real):
        raise Unsatisfiable(f"{algorithm}: bound is not finite (m={m_real})")
    m_s = max(1, math.ceil(m_real))
    return BoundResult(
        algorithm=algorithm,
        n=n,
        k=k,
        m_s=m_s,
        m_real=float(m_real),
        budget=ErrorBudget(kind, count),
        intermediates=intermediates,
        saturated=saturated,
    )


def coma_sufficient_tests(
    n: int, k: int, p: float, target: PacTarget, budget: int | None = None
) -> BoundResult:
    """Tests sufficient for CoMa on a Bernoulli(p) design.

    ``budget`` overrides the false-positive budget derived from ``epsilon``.
    """
    _check_instance(n, k)
    _check_probability("p", p)
    if budget is None:
        b = geps_bernoulli_budget(target.epsilon, k, p, n)
    else:
        ErrorBudget(ErrorKind.FALSE_POSITIVE, budget).check_against(n, k)
        b = Budget(budget, budget >= n - k)
    g = b.count
    inter = {"p": p, "g_eps": g}
    if g >= n - k:
        return _result("coma", n, k, 0.0, ErrorKind.FALSE_POSITIVE, g, inter, True)
    m_real = float(_coma_m_real(n, k, p, g, target.delta))
    return _result("coma", n, k, m_real, ErrorKind.FALSE_POSITIVE, g, inter, b.saturated)


def coma_failure_bound(n: int, k: int, p: float, m: int, g: int) -> float:
    """Union bound on P(more than g false positives) after m tests, clipped to 1.

    This is the confidence statement of the CoMa bound read backwards: the
    smallest delta for which m tests are sufficient.
    """
    _check_instance(n, k)
    _check_int("m", m, 0)
    _check_int("g", g, 0)
    if g >= n - k:
        return 0.0
    return float(min(1.0, math.exp(_coma_log_failure(n, k, p, g, m))))


@dataclass(frozen=True)
class ComaOptimum:
    p_opt: float
    g_eps: int
    m_s: int
    iterations: int = 0


def coma_p_opt(k: int, g: int) -> float:
    """Bernoulli parameter minimising the hidden-set probability for budget g."""
    return -math.expm1(math.log(k / (k + g + 1)) / (g + 1))


def coma_fixed_point_opt(
    n: int, k: int, eps: float, delta: float, max_iter: int = 200
) -> ComaOptimum:
    """Alternate between the budget for the current p and the best p for that budget."""
    _check_instance(n, k)
    target = PacTarget(eps, delta)
    p = 1.0 / (k + 1)
    g = geps_bernoulli(eps, k, p, n)
    for it in range(1, max_iter + 1):
        p_next = coma_p_opt(k, g)
        g_next = geps_bernoulli(eps, k, p_next, n)
        if g_next == g:
            p = p_next
            m_s = coma_sufficient_tests(n, k, p, target).m_s
            return ComaOptimum(p, g, m_s, it)
        p, g = p_next, g_next
    raise NonConvergence("fixed-point iteration did not settle", last=(p, g))


def default_p_grid(k: int, points: int = 20000) -> np.ndarray:
    """Linear grid over [1/(100k), min(0.5, 10/k)]."""
    return np.linspace(0.01 / k, min(0.5, 10.0 / k), points)


def coma_minlp_grid(
    n: int,
    k: int,
    eps: float,
    delta: float,
    p_grid: np.ndarray | None = None,
    g_cap: int | None = None,
) -> ComaOptimum:
    """Minimise the number of tests jointly over a grid of p and all feasible budgets.

    For a fixed (p, g) the confidence constraint is linear in m, so the
    smallest feasible m comes out in closed form; the grid supplies p and
    every g permitted by the epsilon constraint up to ``g_cap``.

    ``g_cap`` defaults to (n-k)//2. Past that point log C(n-k, g+1) shrinks
    as g grows, and the program is solved trivially by declaring nearly
    every item defective at a p where almost no test is informative.

    Ties on the integer m are broken by the real-valued m, then by p and g.
    """
    _check_instance(n, k)
    _check_eps(eps)
    _check_probability("delta", delta)
    grid = default_p_grid(k) if p_grid is None else np.asarray(p_grid, dtype=float)
    cap = (n - k) // 2 if g_cap is None else int(g_cap)
    cap = min(cap, n - k - 1)
    best = None
    for p in grid:
        if not 0 < p < 1:
            continue
        b = geps_bernoulli_budget(eps, k, float(p), n)
        g = np.arange(min(b.count, cap) + 1)
        m_real = _coma_m_real(n, k, float(p), g, delta)
        m_real = np.where(np.isfinite(m_real), m_real, np.inf)
        m_int = np.maximum(1, np.ceil(m_real))
        i = int(np.lexsort((m_real, m_int))[0])
        key = (m_int[i], m_real[i], float(p), int(g[i]))
        if best is None or key < best:
            best = key
    if best is None or not math.isfinite(best[0]):
        raise Unsatisfiable("no grid point satisfies both constraints")
    return ComaOptimum(best[2], best[3], int(best[0]))


# CBP.


@dataclass(frozen=True)
class CbpParams:
    chi: float
    C: float
    eta: float
    c: float
    s: float


def _cbp_log_term(n, k, g, delta, c):
    """log(1/(c delta))/(g+1) + g/(g+1) + log((n-k)/(g+1))."""
    return math.log(1.0 / (c * delta)) / (g + 1) + g / (g + 1) + math.log((n - k) / (g + 1))


def cbp_params(n: int, k: int, g_eps: int, delta: float, s: float, c: float = 0.5) -> CbpParams:
    """Chernoff split parameters for the CBP bound."""
    _check_instance(n, k)
    _check_int("g_eps", g_eps, 0)
    _check_probability("delta", delta)
    _check_probability("c", c)
    if g_eps >= n - k:
        raise InvalidParameter("g_eps", f"must be < n - k = {n - k}")
    if not s > 0:
        raise InvalidParameter("s", f"must be positive, got {s}")
    log_term = _cbp_log_term(n, k, g_eps, delta, c)
    spread = math.log(n - k) + EULER_GAMMA - harmonic(g_eps)
    chi = log_term / spread
    C = math.log(1.0 / ((1.0 - c) * delta)) / ((n - k) / s * log_term)
    # Positive root of eta^2 + C eta - C = 0, written to avoid cancellation.
    eta = 2.0 * C / (C + math.sqrt(C * C + 4.0 * C))
    return CbpParams(chi, C, eta, c, s)


def _cbp_budget(target, n, k, s, budget):
    if budget is None:
        return geps_rowweight_budget(target.epsilon, n, k, s)
    ErrorBudget(ErrorKind.FALSE_POSITIVE, budget).check_against(n, k)
    return Budget(budget, budget >= n - k)


def _cbp_intermediates(n, k, g, s, params=None):
    s_star = optimal_row_weight(n, k)
    inter = {"g_eps": g, "s": s, "s_star": s_star}
    if g < n - k:
        inst = SccpInstance(n - k, g)
        inter["expected_time_exact"] = sccp_expected_time(inst, "exact")
        inter["expected_time_approx"] = sccp_expected_time(inst, "approx")
    if params is not None:
        inter.update(chi=params.chi, C=params.C, eta=params.eta, c=params.c)
    return inter


def cbp_sufficient_tests(
    n: int,
    k: int,
    target: PacTarget,
    s: float | None = None,
    c: float = 0.5,
    budget: int | None = None,
) -> BoundResult:
    """Tests sufficient for CBP when each test draws ``s`` items with replacement.

    ``s`` defaults to the rate-optimal real row weight.
    """
    _check_instance(n, k)
    s = optimal_row_weight(n, k) if s is None else float(s)
    b = _cbp_budget(target, n, k, s, budget)
    g = b.count
    if g >= n - k:
        inter = _cbp_intermediates(n, k, g, s)
        return _result("cbp", n, k, 0.0, ErrorKind.FALSE_POSITIVE, g, inter, True)
    params = cbp_params(n, k, g, target.delta, s, c)
    spread = math.log(n - k) + EULER_GAMMA - harmonic(g)
    negative_rate = s * ((n - k) / n) ** s
    m_real = params.chi * (n - k) * spread / ((1.0 - params.eta) * negative_rate)
    inter = _cbp_intermediates(n, k, g, s, params)
    return _result("cbp", n, k, m_real, ErrorKind.FALSE_POSITIVE, g, inter, b.saturated)


def cbp_sstar_bound(
    n: int, k: int, target: PacTarget, c: float = 0.5, budget: int | None = None
) -> BoundResult:
    """CBP bound at the optimal row weight, in the form with (n/(n-k))^s* factored out."""
    _check_instance(n, k)
    s_star = optimal_row_weight(n, k)
    b = _cbp_budget(target, n, k, s_star, budget)
    g = b.count
    if g >= n - k:
        inter = _cbp_intermediates(n, k, g, s_star)
        return _result("cbp_sstar", n, k, 0.0, ErrorKind.FALSE_POSITIVE, g, inter, True)
    params = cbp_params(n, k, g, target.delta, s_star, c)
    spread = math.log(n - k) + EULER_GAMMA - harmonic(g)
    growth = (n / (n - k)) ** s_star
    m_real = params.chi * k * growth * spread / (1.0 - params.eta)
    inter = _cbp_intermediates(n, k, g, s_star, params)
    inter["growth"] = growth
    return _result("cbp_sstar", n, k, m_real, ErrorKind.FALSE_POSITIVE, g, inter, b.saturated)


def cbp_failure_bound(
    n: int, k: int, m: int, g: int, s: float | None = None, c: float = 0.5
) -> float:
    """Smallest delta for which m tests satisfy the CBP bound with budget g (1 if none)."""
    _check_instance(n, k)
    if g >= n - k:
        return 0.0

    def excess(log_delta):
        target = PacTarget(0.0, math.exp(log_delta))
        return cbp_sufficient_tests(n, k, target, s, c, budget=g).m_real - m

    lo, hi = -700.0, math.log(1.0 - 1e-12)
    if excess(hi) > 0:
        return 1.0
    if excess(lo) <= 0:
        return 0.0
    return math.exp(brentq(excess, lo, hi, xtol=1e-10))


ETA_REGIMES = ("n_dominant", "delta_dominant", "comparable", "approx_recovery")


def cbp_eta_regime(n: int, k: int, g_eps: int, delta: float) -> str:
    """Regime used by :func:`cbp_eta_approx` in automatic mode.

    Any positive budget uses the approximate-recovery form. Otherwise delta
    is compared with 2/(n-k): a ratio below 0.1 counts as much smaller,
    above 10 as much larger, anything between as comparable.
    """
    if g_eps > 0:
        return "approx_recovery"
    ratio = delta * (n - k) / 2.0
    if ratio < 0.1:
        return "n_dominant"
    if ratio > 10.0:
        return "delta_dominant"
    return "comparable"


def cbp_eta_approx(n: int, k: int, g_eps: int, delta: float, regime: str = "auto") -> float:
    """Closed-form approximations of the CBP Chernoff parameter at s = s*, c = 1/2."""
    _check_instance(n, k)
    _check_int("g_eps", g_eps, 0)
    _check_probability("delta", delta)
    if regime == "auto":
        regime = cbp_eta_regime(n, k, g_eps, delta)
    s_star = optimal_row_weight(n, k)
    w = n - k
    log2d = math.log(2.0 / delta)
    if regime == "n_dominant":
        return math.sqrt(s_star / w)
    if regime == "delta_dominant":
        return math.sqrt(s_star * log2d / (w * math.log(w)))
    if regime == "comparable":
        return math.sqrt(s_star * log2d / (w * (log2d + math.log(w))))
    if regime == "approx_recovery":
        g1 = g_eps + 1
        return math.sqrt(s_star * log2d / (w * (log2d / g1 + math.log(w / g1))))
    raise InvalidParameter("regime", f"expected auto or one of {ETA_REGIMES}, got {regime!r}")


# DD.


def dd_gbar(n: int, k: int, p: float, m) -> float:
    """Expected number of non-defectives left in the probable defective set."""
    _check_instance(n, k)
    _check_probability("p", p)
    q = 1.0 - p
    m_arr = np.asarray(m, dtype=float)
    if np.any(m_arr < 0):
        raise InvalidParameter("m", "must be nonnegative")
    out = (n - k) * np.exp(m_arr * math.log1p(-p * q**k))
    return float(out) if out.ndim == 0 else out


def dd_miss_prob(d: int, g: float, k: int, p: float, m: int) -> float:
    """Probability that none of d given defectives is isolated, given g hidden non-defectives."""
    _check_int("d", d, 0)
    _check_int("k", k, 1)
    _check_int("m", m, 0)
    _check_probability("p", p)
    if d > k:
        raise InvalidParameter("d", f"must be <= k = {k}")
    if g < 0:
        raise InvalidParameter("g", "must be nonnegative")
    q = 1.0 - p
    base = d * p * q ** (k - 1 + g)
    if base >= 1.0:
        return 0.0 if m > 0 else 1.0
    return math.exp(m * math.log1p(-base))


def dd_G_log_pmf(n: int, k: int, p: float, m: int, include_b0: bool = False) -> np.ndarray:
    """log P(G = g) for g = 0..n-k as a mixture over the number of negative tests.

    With ``include_b0=False`` the mixture starts at one negative test, so the
    mass (1 - (1-p)^k)^m of the all-positive outcome is absent; with
    ``include_b0=True`` that mass is placed at g = n - k, giving a proper
    distribution.
    """
    _check_instance(n, k)
    _check_probability("p", p)
    _check_int("m", m, 0)
    w = n - k
    lq = math.log1p(-p)
    lq_neg = k * lq
    l_pos = math.log1p(-math.exp(lq_neg))
    g = np.arange(w + 1, dtype=float)[:, None]
    b = np.arange(1, m + 1, dtype=float)[None, :]
    if m == 0:
        out = np.full(w + 1, -np.inf)
    else:
        log_hidden = b * lq
        log_clear = np.log(-np.expm1(log_hidden))
        terms = (
            log_binom(m, b)
            + b * lq_neg
            + (m - b) * l_pos
            + g * log_hidden
            + (w - g) * log_clear
        )
        out = log_binom(w, g[:, 0]) + logsumexp(terms, axis=1)
    if include_b0 or m == 0:
        out[w] = np.logaddexp(out[w], m * l_pos)
    return out


def dd_prob_G(g: int, n: int, k: int, p: float, m: int, include_b0: bool = False) -> float:
    """P(G = g); see :func:`dd_G_log_pmf` for the treatment of the all-positive outcome."""
    _check_int("g", g, 0)
    if g > n - k:
        raise InvalidParameter("g", f"must be <= n - k = {n - k}")
    return float(np.exp(dd_G_log_pmf(n, k, p, m, include_b0)[g]))


def _dd_log_lhs(n, k, p, d, m, gtilde):
    """log of C(k, d+1) (1 - (d+1) p q^(k-1+gbar(m)+gtilde))^m for an array of m."""
    q = 1.0 - p
    m = np.asarray(m, dtype=float)
    gbar = dd_gbar(n, k, p, m)
    gt = np.ceil(gbar) - gbar if gtilde is None else gtilde
    base = (d + 1) * p * q ** (k - 1 + gbar + gt)
    with np.errstate(divide="ignore"):
        return log_binom(k, d + 1) + m * np.log1p(-np.minimum(base, 1.0))


def _scan_first(f, threshold, stride, m_cap, start=1, block=4096):
    """Smallest m >= start with f(m) <= threshold, scanning by ``stride`` then by one.

    ``f`` is evaluated on blocks of ``block`` coarse points; the coarse
    values must not increase, which is checked.
    """
    prev_val = None
    prev_m = start - 1
    lo = start
    while lo <= m_cap:
        coarse = np.arange(lo, min(m_cap, lo + stride * block) + 1, stride)
        vals = f(coarse)
        seq = vals if prev_val is None else np.concatenate(([prev_val], vals))
        if np.any(np.diff(seq) > 1e-9 * np.maximum(1.0, np.abs(seq[1:]))):
            raise NonConvergence("scan objective increased between coarse points")
        hits = np.flatnonzero(vals <= threshold)
        if hits.size:
            i = hits[0]
            upper = int(coarse[i])
            lower = int(coarse[i - 1]) + 1 if i > 0 else prev_m + 1
            fine = np.arange(lower, upper + 1)
            fine_hits = np.flatnonzero(f(fine) <= threshold)
            return int(fine[fine_hits[0]])
        prev_val = vals[-1]
        prev_m = int(coarse[-1])
        lo = prev_m + stride
    raise Unsatisfiable(f"no m <= {m_cap} meets the target")


def dd_expected_miss(n: int, k: int, p: float, m: int, d: int, include_b0: bool = True) -> float:
    """E over G of (1 - (d+1) p q^(k-1+G))^m, using the pmf of G."""
    q = 1.0 - p
    log_pmf = dd_G_log_pmf(n, k, p, m, include_b0)
    g = np.arange(n - k + 1)
    base = np.minimum((d + 1) * p * q ** (k - 1 + g), 1.0)
    with np.errstate(divide="ignore"):
        log_f = m * np.log1p(-base)
    return float(np.exp(logsumexp(log_f + log_pmf)))


def dd_envelope_holds(n: int, k: int, p: float, m: int, d: int, gtilde: float) -> bool:
    """Check the step that bounds the G-mixture by its value at gbar + gtilde.

    Compares sum_g f(g) P(G=g) against f(gbar + gtilde) P(G <= gbar + gtilde),
    with f(g) = (1 - (d+1) p q^(k-1+g))^m and the b = 0 mass included.
    """
    q = 1.0 - p
    log_pmf = dd_G_log_pmf(n, k, p, m, include_b0=True)
    g = np.arange(n - k + 1)
    base = np.minimum((d + 1) * p * q ** (k - 1 + g), 1.0)
    with np.errstate(divide="ignore"):
        log_f = m * np.log1p(-base)
    total = logsumexp(log_f + log_pmf)
    cut = dd_gbar(n, k, p, m) + gtilde
    below = g <= cut
    envelope_base = min((d + 1) * p * q ** (k - 1 + cut), 1.0)
    with np.errstate(divide="ignore"):
        log_env = m * math.log1p(-envelope_base) + logsumexp(log_pmf[below])
    return bool(total <= log_env + 1e-12)


def dd_min_gtilde(n: int, k: int, p: float, m: int, d: int) -> float:
    """Smallest gtilde' >= 0 with sum_g f(g) P(G=g) <= f(gbar + gtilde')."""
    q = 1.0 - p
    expected = dd_expected_miss(n, k, p, m, d)
    if m == 0:
        return 0.0
    root = expected ** (1.0 / m)
    if root >= 1.0:
        return 0.0
    # Need (d+1) p q^(k-1+x) <= 1 - root, i.e. x >= log((1-root)/((d+1)p)) / log q - (k-1).
    x = math.log((1.0 - root) / ((d + 1) * p)) / math.log(q) - (k - 1)
    return max(0.0, x - dd_gbar(n, k, p, m))


def dd_sufficient_tests(
    n: int,
    k: int,
    p: float,
    target: PacTarget,
    gtilde_policy: str = "default",
    budget: int | None = None,
    gtilde: float | None = None,
    stride: int | None = None,
    m_cap: int = 10**7,
) -> BoundResult:
    """Smallest m satisfying the DD bound.

    ``gtilde_policy="default"`` uses gtilde = ceil(gbar) - gbar at every m
    (or the constant ``gtilde`` when given). For n up to
    ``ENVELOPE_CHECK_MAX_N`` the choice is checked against the full
    distribution of G; the outcome is stored as ``envelope_holds`` (1 or 0)
    and a warning is issued when it fails. ``"grid"`` solves for the
    smallest admissible gtilde' at each m from the full distribution of G,
    which turns the confidence constraint into C(k, d+1) E[f(G)] <= delta.
    """
    _check_instance(n, k)
    _check_probability("p", p)
    if budget is None:
        b = deps_bernoulli_budget(target.epsilon, k, p)
    else:
        ErrorBudget(ErrorKind.FALSE_NEGATIVE, budget).check_against(n, k)
        b = Budget(budget, budget >= k)
    d = b.count
    if d >= k:
        inter = {"p": p, "d_eps": d, "g_bar": float(n - k), "g_tilde": 0.0}
        return _result("dd", n, k, 0.0, ErrorKind.FALSE_NEGATIVE, d, inter, True)
    if stride is None:
        stride = max(1, math.floor(k * E / 100))
    threshold = math.log(target.delta)
    if gtilde_policy == "default":
        m_s = _scan_first(lambda ms: _dd_log_lhs(n, k, p, d, ms, gtilde), threshold, stride, m_cap)
        gbar = dd_gbar(n, k, p, m_s)
        gt = math.ceil(gbar) - gbar if gtilde is None else float(gtilde)
        envelope = None
        if n <= ENVELOPE_CHECK_MAX_N:
            envelope = dd_envelope_holds(n, k, p, m_s, d, gt)
            if not envelope:
                warnings.warn(
                    f"dd: gtilde={gt:.4g} does not bound the G-mixture at m={m_s}; "
                    "use gtilde_policy='grid' for a certified count",
                    stacklevel=2,
                )
    elif gtilde_policy == "grid":
        lbin = log_binom(k, d + 1)

        def f(ms):
            return np.array([lbin + math.log(max(dd_expected_miss(n, k, p, int(x), d), 1e-300)) for x in ms])

        start = _scan_first(
            lambda ms: _dd_log_lhs(n, k, p, d, ms, None), threshold, stride, m_cap
        )
        # Start the expensive scan at half the default-policy answer, falling
        # back to m = 1 if that point already meets the target.
        first = max(1, start // 2)
        if first > 1 and f([first])[0] <= threshold:
            first = 1
        m_s = _scan_first(f, threshold, stride, m_cap, start=first, block=8)
        gbar = dd_gbar(n, k, p, m_s)
        gt = dd_min_gtilde(n, k, p, m_s, d)
        envelope = None
    else:
        raise InvalidParameter("gtilde_policy", f"expected 'default' or 'grid', got {gtilde_policy!r}")
    inter = {"p": p, "d_eps": d, "g_bar": gbar, "g_tilde": gt}
    if envelope is not None:
        inter["envelope_holds"] = float(envelope)
    return _result("dd", n, k, float(m_s), ErrorKind.FALSE_NEGATIVE, d, inter, b.saturated)


def dd_failure_bound(n: int, k: int, p: float, m: int, d: int, gtilde: float | None = None) -> float:
    """Left side of the DD bound at m (the delta that m tests certify), clipped to 1."""
    _check_instance(n, k)
    if d >= k:
        return 0.0
    return float(min(1.0, math.exp(_dd_log_lhs(n, k, p, d, np.array([m]), gtilde)[0])))


# Order-wise forms and prior-art comparison curves.


def orderwise_ms(algorithm: str, n: int, k: int, target: PacTarget) -> float:
    """Large-n closed forms of the three bounds, with budget ke*epsilon."""
    _check_instance(n, k)
    eps, delta = target.epsilon, target.delta
    b1 = k * E * eps + 1.0
    if algorithm == "coma":
        return 2 * k * E * (math.log(n / b1) + 1 + math.log(1 / delta) / b1)
    if algorithm == "cbp":
        return 2 * k * E * (math.log(n / b1) + 1 + math.log(2 / delta) * (1 / b1 + E / (2 * k)))
    if algorithm == "dd":
        lnk = math.log(n / k)
        return k * E * (lnk + math.log(1 / delta) / (b1 * lnk) + math.log(k * E / b1) / lnk)
    raise InvalidParameter("algorithm", f"expected coma, cbp or dd, got {algorithm!r}")


def dd_quadratic_ms(n: int, k: int, delta: float, d: int = 0) -> float:
    """Positive root of m^2/(ke) - m log(n/k) - D = 0."""
    D = dd_quadratic_offset(k, delta, d)
    lnk = math.log(n / k)
    return k * E / 2 * (lnk + math.sqrt(lnk * lnk + 4 * D / (k * E)))


def dd_quadratic_offset(k: int, delta: float, d: int = 0) -> float:
    return k * E * (math.log(1 / delta) / (d + 1) + math.log(k * E / (d + 1)))


def dd_transcendental_residual(n: int, k: int, m: float, delta: float, d: int = 0) -> float:
    """Relative residual of m (1 - n e^(-m/ke) / k) >= D at the given m."""
    D = dd_quadratic_offset(k, delta, d)
    lhs = m * (1.0 - n * math.exp(-m / (k * E)) / k)
    return (lhs - D) / D


def baseline_bounds(algorithm: str, n: int, k: int, delta_prime: float) -> float:
    """Earlier exact-recovery sufficiency results used as comparison curves."""
    _check_instance(n, k)
    _check_probability("delta_prime", delta_prime, open_high=False)
    if algorithm == "coma":
        return E * k * (math.log(n) + math.log(1 / delta_prime))
    if algorithm == "cbp":
        return 2 * E * k * (math.log(n) + math.log(2 / delta_prime))
    if algorithm == "dd":
        sparsity = 1.0 - math.log(k) / math.log(n)
        kappa = max(sparsity, 1.0 - sparsity)
        return E * k * (kappa * math.log(n) + math.log(1 / delta_prime))
    raise InvalidParameter("algorithm", f"expected coma, cbp or dd, got {algorithm!r}")


def sufficient_tests(algorithm: str, n: int, k: int, target: PacTarget, **kw) -> BoundResult:
    """Dispatch to the bound for ``algorithm`` with design defaults p = 1/k, s = s*."""
    if algorithm == "coma":
        return coma_sufficient_tests(n, k, kw.get("p") or 1.0 / k, target, kw.get("budget"))
    if algorithm == "cbp":
        return cbp_sufficient_tests(n, k, target, kw.get("s"), kw.get("c") or 0.5, kw.get("budget"))
    if algorithm == "dd":
        return dd_sufficient_tests(
            n,
            k,
            kw.get("p") or 1.0 / k,
            target,
            kw.get("gtilde_policy") or "default",
            kw.get("budget"),
        )
    raise InvalidParameter("algorithm", f"expected coma, cbp or dd, got {algorithm!r}")
