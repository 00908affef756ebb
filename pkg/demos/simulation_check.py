"""Compare each bound with the empirical failure rate at the bound's test count.

Run: python3 demos/simulation_check.py   (about 10 s on one core)
"""

from gtpac import pacbounds as pb
from gtpac.core import ErrorBudget, PacTarget
from gtpac.montecarlo import DECODER_KIND, TrialPlan, design_for, run_trials

n, k, trials = 2500, 50, 500
print(f"n={n}, k={k}, {trials} trials per cell, random defective set per trial\n")
print(f"{'decoder':>7} {'delta':>6} {'budget':>6} {'m_S':>5} {'failure rate':>12} {'95% interval':>18}")
for alg, budget in (("coma", 0), ("cbp", 5), ("dd", 2)):
    for delta in (0.3, 0.1):
        m_s = pb.sufficient_tests(alg, n, k, PacTarget(0.0, delta), budget=budget).m_s
        plan = TrialPlan(n, k, design_for(alg, n, k), alg, m_s, ErrorBudget(DECODER_KIND[alg], budget), trials, 1)
        s = run_trials(plan)
        print(f"{alg:>7} {delta:>6g} {budget:>6} {m_s:>5} {s.p_hat:>12.3f}   [{s.ci_low:.3f}, {s.ci_high:.3f}]")
print("\nEach failure rate should sit at or below its delta.")
