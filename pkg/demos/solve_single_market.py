"""Walkthrough: define a market, sample items, solve the observed
equilibrium, and confirm the scale-invariance properties.

Run:  python3 demos/solve_single_market.py
"""

import numpy as np

from fppe import (
    MarketDefinition,
    ValueDistribution,
    sample_items,
    scale_budgets_and_values,
    scale_values_and_supply,
    solve_fppe,
)

# Five buyers: two with inflated budgets (they will keep leftover budget and
# pace at the cap), three with tight budgets (they will shade bids).
budgets = np.array([1.6, 1.2, 0.25, 0.10, 0.05])
market = MarketDefinition(budgets=budgets, value_process=ValueDistribution.uniform())

batch = sample_items(market, t=400, seed=7)
solution = solve_fppe(batch, budgets)

print("pacing multipliers:", solution.beta.round(4))
print("leftover budgets:  ", solution.leftover.round(4))
print("total utilities:   ", solution.total_utility.round(4))
print(f"revenue {solution.revenue:.4f}   welfare {solution.nsw:.4f}   "
      f"kkt residual {solution.kkt_residual:.2e}")

# Budget binding <=> multiplier below 1 (complementary slackness).
for i, (b, lo) in enumerate(zip(solution.beta, solution.leftover)):
    tag = "paced (budget binding)" if b < 1 else f"cap, leftover {lo:.3f}"
    print(f"  buyer {i}: beta={b:.4f}  {tag}")

# Scaling budgets and values together leaves (beta, x) unchanged and scales
# prices; scaling values against supply leaves everything economic unchanged.
alpha = 3.0
scaled_market, scaled_batch = scale_budgets_and_values(market, batch, alpha)
scaled = solve_fppe(scaled_batch, scaled_market.budgets)
print("\nafter scaling budgets+values by", alpha)
print("  max |beta difference|:", np.abs(scaled.beta - solution.beta).max())
print("  revenue ratio:", scaled.revenue / solution.revenue)

resupplied = scale_values_and_supply(batch, alpha)
resolved = solve_fppe(resupplied, budgets)
print("after scaling values by", alpha, "and supply by 1 /", alpha)
print("  max |beta difference|:", np.abs(resolved.beta - solution.beta).max())
print("  revenue difference:", abs(resolved.revenue - solution.revenue))
