"""Sufficient test counts for the three decoders on one instance.

Run: python3 demos/bounds_walkthrough.py
"""

from gtpac import pacbounds as pb
from gtpac.core import PacTarget

n, k = 2500, 50
print(f"n={n}, k={k}, design parameter p=1/k for CoMa and DD, row weight s* for CBP\n")

print("Exact recovery at decreasing delta:")
print(f"{'delta':>8} {'CoMa':>6} {'CBP':>6} {'DD':>6}")
for delta in (0.3, 0.1, 0.01, 1e-3):
    target = PacTarget(0.0, delta)
    row = [pb.sufficient_tests(alg, n, k, target).m_s for alg in ("coma", "cbp", "dd")]
    print(f"{delta:>8g} {row[0]:>6} {row[1]:>6} {row[2]:>6}")

print("\nAllowing errors: prediction error epsilon becomes an integer budget")
for eps in (0.0, 0.005, 0.02):
    target = PacTarget(eps, 0.1)
    coma = pb.sufficient_tests("coma", n, k, target)
    dd = pb.sufficient_tests("dd", n, k, target)
    print(
        f"eps={eps:<6g} CoMa budget g={coma.intermediates['g_eps']:<3} m={coma.m_s:<5}"
        f" DD budget d={dd.intermediates['d_eps']:<3} m={dd.m_s}"
    )

print("\nOptimising the Bernoulli parameter for CoMa (eps=0.02, delta=0.01):")
fp = pb.coma_fixed_point_opt(n, k, 0.02, 0.01)
grid = pb.coma_minlp_grid(n, k, 0.02, 0.01)
print(f"  fixed point: p={fp.p_opt:.5f} g={fp.g_eps} m={fp.m_s}")
print(f"  grid search: p={grid.p_opt:.5f} g={grid.g_eps} m={grid.m_s}")
