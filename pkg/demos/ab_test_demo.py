"""Walkthrough: budget-splitting A/B test with item randomization.

Treatment swaps uniform item values for exponential ones (clipped at 3), a
change that raises clearing prices. The experiment splits each buyer's
budget across two markets, randomizes items, solves both observed
equilibria, and reads off treatment effects with confidence intervals.

Run:  python3 demos/ab_test_demo.py
"""

import numpy as np

from fppe import ABDesign, ValueDistribution, decide, run_ab_experiment
from fppe.abtest import treatment_effect_ci

rng = np.random.default_rng(3)
# a few deep-pocketed buyers, a middle tier, and five buyers whose budgets
# bind in both arms (their pacing responds to the treatment)
budgets = np.concatenate([rng.random(6) + 1.0, rng.random(9), 0.05 * rng.random(5)])

design = ABDesign(
    pi=0.5,
    horizon=400,
    seed=2024,
    budgets=budgets,
    control_process=ValueDistribution.uniform(),
    treatment_process=ValueDistribution.exponential(),
)
result = run_ab_experiment(design, alpha=0.1)

print(f"arm sizes: control {result.t0}, treated {result.t1}")
print(f"control revenue {result.solution0.revenue:.4f}, "
      f"treated revenue {result.solution1.revenue:.4f}")

lo, hi = result.intervals.rev
print(f"\nrevenue effect {result.tau_rev:.4f}, 90% CI [{lo:.4f}, {hi:.4f}]")
print("verdict:", decide(result.intervals.rev))

lo, hi = result.intervals.nsw
print(f"welfare effect {result.tau_nsw:.4f}, 90% CI [{lo:.4f}, {hi:.4f}]")

print("\nlargest per-buyer pacing effects:")
for i in np.argsort(-np.abs(result.tau_beta))[:5]:
    blo, bhi = result.intervals.beta[i]
    print(f"  buyer {i}: tau_beta = {result.tau_beta[i]:+.4f}  CI [{blo:+.4f}, {bhi:+.4f}]")

# Tighter evidence at a stricter level: recompute the intervals at alpha=0.02.
strict = treatment_effect_ci(result, alpha=0.02)
print(f"\n98% revenue CI: [{strict.rev[0]:.4f}, {strict.rev[1]:.4f}]",
      "->", decide(strict.rev))
