import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gtpac import pacbounds as pb
from gtpac.core import InvalidParameter, NonConvergence, PacTarget, Unsatisfiable
from gtpac.designs import optimal_row_weight


def _scan_budget(error, eps, cap):
    """Largest count c <= cap with error(c) <= eps, by scanning from zero."""
    c = 0
    while c < cap and error(c + 1) <= eps:
        c += 1
    return c


# Error budgets.


def test_geps_bernoulli_examples():
    assert pb.geps_bernoulli(0.0, 50, 0.02) == 0
    assert pb.geps_bernoulli(0.01, 50, 0.02) == 1
    b = pb.geps_bernoulli_budget(0.5, 50, 0.02, n=2500)
    assert (b.count, b.saturated) == (2450, True)
    with pytest.raises(InvalidParameter):
        pb.geps_bernoulli(0.5, 50, 0.02)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0, 0.3),
    st.integers(1, 200),
    st.floats(0.001, 0.3),
)
def test_geps_bernoulli_matches_scan(eps, k, p):
    n = k + 400
    b = pb.geps_bernoulli_budget(eps, k, p, n)
    want = _scan_budget(lambda G: pb.fp_error_bernoulli(G, k, p), eps, n - k)
    assert b.count == want


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 0.5), st.integers(1, 100), st.floats(1, 80))
def test_geps_rowweight_matches_scan(eps, k, s):
    n = k + 300
    got = pb.geps_rowweight(eps, n, k, s)
    want = _scan_budget(lambda G: pb.fp_error_rowweight(G, n, k, s), eps, n - k)
    assert got == want


def test_geps_rowweight_examples_and_monotone():
    n, k = 2500, 50
    s = optimal_row_weight(n, k)
    assert pb.geps_rowweight(0.0, n, k, s) == 0
    want = _scan_budget(lambda G: pb.fp_error_rowweight(G, n, k, s), 0.01, n - k)
    assert pb.geps_rowweight(0.01, n, k, s) == want
    values = [pb.geps_rowweight(e, n, k, s) for e in np.linspace(0, 0.5, 400)]
    assert all(a <= b for a, b in zip(values, values[1:]))


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.integers(1, 200), st.floats(0.001, 0.3))
def test_deps_bernoulli_matches_scan(eps, k, p):
    got = pb.deps_bernoulli(eps, k, p)
    want = _scan_budget(lambda D: pb.fn_error_bernoulli(D, k, p), eps, k)
    assert got == want


def test_deps_examples():
    assert pb.deps_bernoulli(0.0, 50, 0.02) == 0
    want = _scan_budget(lambda D: pb.fn_error_bernoulli(D, 50, 0.02), 0.01, 50)
    assert pb.deps_bernoulli(0.01, 50, 0.02) == want
    assert pb.deps_bernoulli(1.0, 50, 0.02) == 50


# CoMa.


def test_hidden_prob_limits():
    assert pb.hidden_prob(3, 5, 0.2, 0) == 1.0
    far = pb.hidden_prob(10_000, 5, 0.2, 10)
    assert far == pytest.approx((1 - 0.8**5) ** 10, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 500), st.floats(1e-4, 0.5))
def test_exact_recovery_rate_identity(k, p):
    q = 1 - p
    assert 1 - q**k + q ** (k + 1) == pytest.approx(1 - p * q**k, rel=1e-12, abs=1e-15)


def test_coma_reference_counts():
    for delta, want in ((0.09, 1400), (0.27, 1250)):
        r = pb.coma_sufficient_tests(2500, 50, 0.02, PacTarget(0.0, delta))
        assert abs(r.m_s - want) <= 0.01 * want
        assert r.intermediates["g_eps"] == 0


def test_coma_failure_bound_inverts_sufficient_tests():
    r = pb.coma_sufficient_tests(2500, 50, 0.02, PacTarget(0.0, 0.05))
    assert pb.coma_failure_bound(2500, 50, 0.02, r.m_s, 0) <= 0.05
    assert pb.coma_failure_bound(2500, 50, 0.02, r.m_s - 1, 0) > 0.05


@pytest.mark.parametrize("algorithm", ["coma", "cbp", "dd"])
def test_bounds_monotone_in_delta_and_eps(algorithm):
    n, k = 2500, 50
    deltas = np.geomspace(1e-6, 0.5, 15)
    ms = [pb.sufficient_tests(algorithm, n, k, PacTarget(0.0, float(d))).m_s for d in deltas]
    assert all(a >= b for a, b in zip(ms, ms[1:]))
    epss = np.linspace(0, 0.05, 12)
    ms = [pb.sufficient_tests(algorithm, n, k, PacTarget(float(e), 0.01)).m_s for e in epss]
    assert all(a >= b for a, b in zip(ms, ms[1:]))


def test_saturated_budget_returns_flag():
    r = pb.coma_sufficient_tests(2500, 50, 0.02, PacTarget(0.5, 0.1))
    assert r.saturated and r.m_s == 1 and r.budget.count == 2450
    r = pb.dd_sufficient_tests(2500, 50, 0.02, PacTarget(0.99, 0.1))
    assert r.saturated and r.budget.count == 50


def test_fixed_point_exact_recovery():
    opt = pb.coma_fixed_point_opt(2500, 50, 0.0, 0.01)
    assert opt.p_opt == pytest.approx(1 / 51, rel=1e-12)
    assert opt.g_eps == 0


@pytest.mark.parametrize("eps", [0.0, 0.003, 0.02, 0.08])
def test_fixed_point_invariants(eps):
    n, k = 2500, 50
    opt = pb.coma_fixed_point_opt(n, k, eps, 0.01)
    assert opt.g_eps == pb.geps_bernoulli(eps, k, opt.p_opt, n)
    want_p = 1 - (k / (k + opt.g_eps + 1)) ** (1 / (opt.g_eps + 1))
    assert abs(opt.p_opt - want_p) < 1e-12
    assert opt.m_s == pb.coma_sufficient_tests(n, k, opt.p_opt, PacTarget(eps, 0.01)).m_s


def test_fixed_point_nonconvergence_reports_last():
    with pytest.raises(NonConvergence) as info:
        pb.coma_fixed_point_opt(2500, 50, 0.05, 0.01, max_iter=0)
    assert info.value.last is None or len(info.value.last) == 2


def test_minlp_grid_exact_recovery_matches_fixed_point():
    n, k = 2500, 50
    grid = pb.default_p_grid(k, 4000)
    step = grid[1] - grid[0]
    sol = pb.coma_minlp_grid(n, k, 0.0, 0.01, p_grid=grid)
    fp = pb.coma_fixed_point_opt(n, k, 0.0, 0.01)
    assert sol.g_eps == 0
    assert abs(sol.p_opt - fp.p_opt) <= step
    assert sol.m_s <= fp.m_s


def test_minlp_grid_never_worse_than_any_grid_point():
    n, k, eps, delta = 600, 12, 0.01, 0.05
    grid = pb.default_p_grid(k, 300)
    sol = pb.coma_minlp_grid(n, k, eps, delta, p_grid=grid)
    for p in grid[::7]:
        g = pb.geps_bernoulli(eps, k, float(p), n)
        for gg in range(min(g, (n - k) // 2) + 1):
            r = pb.coma_sufficient_tests(n, k, float(p), PacTarget(eps, delta), budget=gg)
            assert sol.m_s <= r.m_s


def test_minlp_grid_relaxed_budget():
    # With the budget pinned to its cap, the solution equals the best exact-style bound at that budget.
    n, k = 300, 10
    sol = pb.coma_minlp_grid(n, k, 0.9, 0.1, p_grid=np.array([0.1]), g_cap=5)
    r = pb.coma_sufficient_tests(n, k, 0.1, PacTarget(0.0, 0.1), budget=5)
    assert sol.g_eps == 5 and sol.m_s == r.m_s


def test_minlp_grid_unsatisfiable():
    with pytest.raises(Unsatisfiable):
        pb.coma_minlp_grid(100, 5, 0.0, 0.1, p_grid=np.array([0.0, 1.0]))


# CBP.


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 40), st.floats(1e-8, 0.9), st.floats(0.05, 0.95))
def test_eta_solves_quadratic(g, delta, c):
    n, k = 2500, 50
    prm = pb.cbp_params(n, k, g, delta, optimal_row_weight(n, k), c)
    assert prm.eta**2 + prm.C * prm.eta - prm.C == pytest.approx(0.0, abs=1e-10)
    assert 0 < prm.eta < 1


def test_eta_vanishes_with_C():
    prm = pb.cbp_params(10**9, 1, 0, 0.5, 1.0, 0.5)
    assert prm.C < 1e-6 and prm.eta < 2e-3


def test_cbp_reference_rate():
    r = pb.cbp_sufficient_tests(2500, 50, PacTarget(0.0, 0.1), budget=30)
    assert r.rho_r == pytest.approx(0.325, abs=0.01)


def test_cbp_exact_recovery_reduction():
    n, k = 2500, 50
    for delta in (1e-4, 0.01, 0.2):
        r = pb.cbp_sufficient_tests(n, k, PacTarget(0.0, delta))
        eta = r.intermediates["eta"]
        closed = math.e * k / (1 - eta) * (math.log(n - k) + math.log(2 / delta))
        # The forms differ only by (n-k) log(n/(n-k)) against k.
        ratio = (n - k) * math.log(n / (n - k)) / k
        assert r.m_real / closed == pytest.approx(ratio, rel=1e-10)
        assert abs(r.m_real / closed - 1) < 0.015


def test_cbp_monotone_in_budget():
    ms = [pb.cbp_sufficient_tests(2500, 50, PacTarget(0.0, 0.01), budget=g).m_s for g in range(0, 200, 5)]
    assert all(a >= b for a, b in zip(ms, ms[1:]))


def test_growth_factor_at_most_e():
    for n in (2, 10, 2500, 10**6):
        for k in {1, n // 3, n - 1} - {0}:
            s = optimal_row_weight(n, k)
            # Equal to e analytically; allow floating-point rounding in the power.
            assert (n / (n - k)) ** s <= math.e * (1 + 1e-9)


def test_sstar_factored_form_upper_bounds_general_form():
    n, k = 2500, 50
    for delta in np.geomspace(1e-8, 0.5, 12):
        for g in (0, 5, 30):
            t = PacTarget(0.0, float(delta))
            thm = pb.cbp_sufficient_tests(n, k, t, budget=g)
            cor = pb.cbp_sstar_bound(n, k, t, budget=g)
            assert cor.m_s >= thm.m_s - 1


def test_cbp_failure_bound_inverts():
    r = pb.cbp_sufficient_tests(2500, 50, PacTarget(0.0, 0.05), budget=3)
    d = pb.cbp_failure_bound(2500, 50, r.m_s, 3)
    assert d <= 0.05 + 1e-12
    assert pb.cbp_failure_bound(2500, 50, r.m_s - 30, 3) > 0.05


def test_eta_regime_boundary_and_zero_budget_form():
    n, k = 2500, 50
    d = 2 / (n - k)
    assert pb.cbp_eta_regime(n, k, 0, d) == "comparable"
    assert pb.cbp_eta_approx(n, k, 0, d) == pb.cbp_eta_approx(n, k, 0, d, "comparable")
    for delta in (1e-6, 1e-3, 0.2):
        a = pb.cbp_eta_approx(n, k, 0, delta, "approx_recovery")
        b = pb.cbp_eta_approx(n, k, 0, delta, "comparable")
        assert a == pytest.approx(b, rel=1e-14)
    assert pb.cbp_eta_regime(n, k, 3, 0.1) == "approx_recovery"
    with pytest.raises(InvalidParameter):
        pb.cbp_eta_approx(n, k, 0, 0.1, "bogus")


def test_eta_comparable_form_tracks_exact():
    n, k = 2500, 50
    for delta in np.geomspace(1e-10, 0.6, 25):
        exact = pb.cbp_sufficient_tests(n, k, PacTarget(0.0, float(delta))).intermediates["eta"]
        assert pb.cbp_eta_approx(n, k, 0, float(delta), "comparable") == pytest.approx(exact, rel=0.1)


@pytest.mark.xfail(strict=True, reason="regime form needs log(2/delta) << log(n-k); at n=2500 it is 35% off")
def test_eta_small_delta_regime_within_ten_percent():
    n, k, delta = 2500, 50, 1e-5
    exact = pb.cbp_params(n, k, 0, delta, optimal_row_weight(n, k)).eta
    assert pb.cbp_eta_approx(n, k, 0, delta, "n_dominant") == pytest.approx(exact, rel=0.1)


@pytest.mark.xfail(strict=True, reason="auto-selected regime forms are 20-35% off at n=2500")
def test_eta_auto_regime_within_ten_percent():
    n, k = 2500, 50
    for delta in np.geomspace(1e-10, 0.6, 25):
        exact = pb.cbp_sufficient_tests(n, k, PacTarget(0.0, float(delta))).intermediates["eta"]
        assert pb.cbp_eta_approx(n, k, 0, float(delta)) == pytest.approx(exact, rel=0.1)


# DD.


def test_gbar_basics():
    assert pb.dd_gbar(2500, 50, 0.02, 0) == 2450
    assert pb.dd_gbar(2500, 50, 0.02, 1000) == pytest.approx(1.64, abs=0.01)
    vals = pb.dd_gbar(2500, 50, 0.02, np.arange(0, 3000, 10))
    assert np.all(np.diff(vals) <= 0)


def test_miss_prob_basics():
    assert pb.dd_miss_prob(3, 2, 10, 0.1, 0) == 1.0
    assert pb.dd_miss_prob(0, 2, 10, 0.1, 50) == 1.0
    want = (1 - 2 * 0.3 * 0.7 ** (4 - 1 + 1)) ** 6
    assert pb.dd_miss_prob(2, 1, 4, 0.3, 6) == pytest.approx(want)
    with pytest.raises(InvalidParameter):
        pb.dd_miss_prob(5, 0, 4, 0.3, 6)


@pytest.mark.parametrize("n,k,p,m", [(10, 2, 0.3, 5), (40, 4, 0.2, 12), (200, 10, 0.1, 60)])
def test_G_pmf_mass_and_mean(n, k, p, m):
    q = 1 - p
    pmf = np.exp(pb.dd_G_log_pmf(n, k, p, m))
    deficit = (1 - q**k) ** m
    assert pmf.sum() <= 1 + 1e-12
    assert pmf.sum() == pytest.approx(1 - deficit, abs=1e-12)
    full = np.exp(pb.dd_G_log_pmf(n, k, p, m, include_b0=True))
    assert full.sum() == pytest.approx(1.0, abs=1e-12)
    g = np.arange(n - k + 1)
    mean = g @ pmf + (n - k) * deficit
    assert mean == pytest.approx(pb.dd_gbar(n, k, p, m), rel=1e-6)
    assert pb.dd_prob_G(1, n, k, p, m) == pytest.approx(pmf[1])


def _dd_lhs(n, k, p, d, m):
    gbar = pb.dd_gbar(n, k, p, m)
    gt = math.ceil(gbar) - gbar
    return math.exp(pb.log_binom(k, d + 1)) * (1 - (d + 1) * p * (1 - p) ** (k - 1 + gbar + gt)) ** m


@pytest.mark.parametrize("delta", [0.3, 0.01, 1e-4])
@pytest.mark.parametrize("eps", [0.0, 0.01])
def test_dd_minimality(delta, eps):
    n, k, p = 2500, 50, 0.02
    r = pb.dd_sufficient_tests(n, k, p, PacTarget(eps, delta))
    d = r.budget.count
    assert _dd_lhs(n, k, p, d, r.m_s) <= delta
    assert _dd_lhs(n, k, p, d, r.m_s - 1) > delta
    assert r.intermediates["g_bar"] == pytest.approx(pb.dd_gbar(n, k, p, r.m_s))


def test_dd_stride_does_not_change_answer():
    target = PacTarget(0.0, 0.01)
    a = pb.dd_sufficient_tests(2500, 50, 0.02, target, stride=1)
    b = pb.dd_sufficient_tests(2500, 50, 0.02, target, stride=37)
    assert a.m_s == b.m_s


def test_dd_unsatisfiable_within_cap():
    with pytest.raises(Unsatisfiable):
        pb.dd_sufficient_tests(2500, 50, 0.02, PacTarget(0.0, 1e-3), m_cap=100)


def test_default_gtilde_envelope_reported_for_small_n():
    n, k, p = 300, 10, 0.1
    r = pb.dd_sufficient_tests(n, k, p, PacTarget(0.0, 0.01))
    holds = pb.dd_envelope_holds(n, k, p, r.m_s, 0, r.intermediates["g_tilde"])
    assert holds and r.intermediates["envelope_holds"] == 1.0
    assert "envelope_holds" not in pb.dd_sufficient_tests(2500, 50, 0.02, PacTarget(0.0, 0.01)).intermediates


def test_default_gtilde_can_fail_envelope_and_warns():
    # With one allowed miss the G-mixture has a heavier right tail than
    # ceil(gbar) - gbar accounts for.
    n, k, p = 300, 10, 0.1
    with pytest.warns(UserWarning, match="gtilde"):
        r = pb.dd_sufficient_tests(n, k, p, PacTarget(0.0, 0.01), budget=1)
    assert r.intermediates["envelope_holds"] == 0.0
    assert pb.dd_min_gtilde(n, k, p, r.m_s, 1) > r.intermediates["g_tilde"]


@pytest.mark.parametrize("n", [100, 300, 500])
def test_grid_gtilde_satisfies_program(n):
    k, p = 10, 0.1
    for d in (0, 1, 2):
        r = pb.dd_sufficient_tests(n, k, p, PacTarget(0.0, 0.01), gtilde_policy="grid", budget=d)
        m, gt = r.m_s, r.intermediates["g_tilde"]
        lhs = pb.dd_expected_miss(n, k, p, m, d)
        rhs = (1 - (d + 1) * p * (1 - p) ** (k - 1 + pb.dd_gbar(n, k, p, m) + gt)) ** m
        assert lhs <= rhs * (1 + 1e-9)
        assert math.exp(pb.log_binom(k, d + 1)) * rhs <= 0.01 * (1 + 1e-9)


def test_grid_policy_gtilde_is_tight_and_admissible():
    n, k, p = 300, 10, 0.1
    r = pb.dd_sufficient_tests(n, k, p, PacTarget(0.0, 0.01), gtilde_policy="grid")
    m, gt = r.m_s, r.intermediates["g_tilde"]
    expected = pb.dd_expected_miss(n, k, p, m, 0)
    q = 1 - p
    at = lambda x: (1 - p * q ** (k - 1 + pb.dd_gbar(n, k, p, m) + x)) ** m
    assert expected <= at(gt) * (1 + 1e-9)
    if gt > 1e-6:
        assert expected > at(gt - 1e-3)
    # The grid program certifies the same delta through the full G distribution.
    assert math.exp(pb.log_binom(k, 1)) * expected <= 0.01
    assert math.exp(pb.log_binom(k, 1)) * pb.dd_expected_miss(n, k, p, m - 1, 0) > 0.01


def test_gtilde_grows_with_budget():
    n, k, p = 400, 10, 0.1
    values = []
    for d in (0, 1, 2):
        r = pb.dd_sufficient_tests(n, k, p, PacTarget(0.0, 0.01), gtilde_policy="grid", budget=d)
        values.append(r.intermediates["g_tilde"])
    assert values[0] <= values[1] <= values[2]


def test_dd_reference_high_confidence_is_self_consistent():
    r = pb.dd_sufficient_tests(2500, 50, 0.02, PacTarget(0.0, 1e-3))
    assert pb.dd_failure_bound(2500, 50, 0.02, r.m_s, 0) <= 1e-3
    assert pb.dd_failure_bound(2500, 50, 0.02, r.m_s - 1, 0) > 1e-3


# Order-wise forms and baselines.


def test_orderwise_exact_recovery_forms():
    n, k, delta = 10**6, 1000, 1e-3
    t = PacTarget(0.0, delta)
    e = math.e
    assert pb.orderwise_ms("coma", n, k, t) == pytest.approx(2 * k * e * (math.log(n) + 1 + math.log(1 / delta)))
    lnk = math.log(n / k)
    want = k * e * (lnk + (math.log(1 / delta) + math.log(k) + 1) / lnk)
    assert pb.orderwise_ms("dd", n, k, t) == pytest.approx(want)
    with pytest.raises(InvalidParameter):
        pb.orderwise_ms("x", n, k, t)


@pytest.mark.parametrize("algorithm", ["coma", "cbp", "dd"])
def test_orderwise_rate_slope(algorithm):
    # With k = 0.95 n^beta, log rho against log n has slope close to beta - 1.
    ns = np.array([1e5, 1e6, 1e7])
    for beta in (0.2, 0.35, 0.5):
        rates = [pb.orderwise_ms(algorithm, int(n), max(1, round(0.95 * n**beta)), PacTarget(0.0, 1e-3)) / n for n in ns]
        slope = np.polyfit(np.log(ns), np.log(rates), 1)[0]
        assert slope == pytest.approx(beta - 1, abs=0.06)


def test_baselines():
    n, k = 2500, 50
    assert pb.baseline_bounds("coma", n, k, 1.0) == pytest.approx(math.e * k * math.log(n))
    ratios = [pb.baseline_bounds("cbp", n, 10, 0.1) / pb.baseline_bounds("coma", n, 10, 0.1) for n in (10**3, 10**6, 10**12, 10**30)]
    assert all(a > b for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] == pytest.approx(2.0, abs=0.02)
    gp = 1 - math.log(k) / math.log(n)
    want = math.e * k * (max(gp, 1 - gp) * math.log(n) + math.log(10))
    assert pb.baseline_bounds("dd", n, k, 0.1) == pytest.approx(want)


def test_quadratic_root_solves_quadratic():
    n, k, delta = 10**4, 100, 0.01
    m = pb.dd_quadratic_ms(n, k, delta)
    D = pb.dd_quadratic_offset(k, delta)
    assert m * m / (k * math.e) - m * math.log(n / k) - D == pytest.approx(0.0, abs=1e-6 * m * m)


@pytest.mark.xfail(strict=True, reason="the quadratic closed form drops a sign in log(1 - D/m); residual is about -50%")
@pytest.mark.parametrize("n", [10**4, 10**6])
def test_quadratic_solution_satisfies_transcendental(n):
    k = math.isqrt(n)
    m = pb.dd_quadratic_ms(n, k, 0.01)
    assert abs(pb.dd_transcendental_residual(n, k, m, 0.01)) < 0.05


def test_log_binom():
    assert pb.log_binom(10, 3) == pytest.approx(math.log(120))
    assert pb.log_binom(5, 6) == -math.inf
    big = pb.log_binom(2450, 31)
    assert big == pytest.approx(math.lgamma(2451) - math.lgamma(32) - math.lgamma(2420), rel=1e-9)
