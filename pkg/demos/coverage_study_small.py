"""Walkthrough: a small Monte Carlo coverage study for the revenue CI.

The full protocol: dual averaging (twice, with an agreement gate) plus a
large fresh sample give the limit revenue; independent observed markets are
then solved and their 90% intervals checked against it. This demo shrinks
the oracle and trial counts so it finishes in under a minute; the
acceptance-scale tables live in tests/test_acceptance.py and behind the
`fppe coverage` CLI command.

Run:  python3 demos/coverage_study_small.py
"""

from fppe.experiments import ScenarioConfig, run_coverage_study

cfg = ScenarioConfig(
    n=10,
    t_grid=(40, 80),
    family="uniform",
    active_fraction=0.4,
    d=0.4,
    alpha=0.1,
    trials=60,
    base_seed=20240,
    da_iterations=150_000,
    truth_items=300_000,
)

print(f"market: n={cfg.n}, {cfg.family} values, "
      f"{cfg.active_fraction:.0%} of buyers given inflated budgets")
rows = run_coverage_study(cfg, jobs=2)
print(f"limit revenue (oracle): {rows[0].truth:.4f}\n")
print(f"{'t':>5} {'coverage':>9} {'mean width':>11} {'failures':>9}")
for row in rows:
    print(f"{row.t:>5} {row.coverage:>9.2f} {row.mean_ci_width:>11.4f} {row.failures:>9}")
print("\nnominal level is 0.90; at 60 trials the binomial noise is about ±0.08")
