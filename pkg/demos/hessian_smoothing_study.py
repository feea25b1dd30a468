"""Walkthrough: bias/variance of the numerical Hessian across smoothing rates.

The stencil width is eps = t^-d. Small d means a wide stencil: stable across
trials but biased. Large d means a narrow stencil: nearly unbiased but noisy.
Stencil widths that push a coordinate's evaluation below zero are recorded
as domain errors rather than silently adjusted.

Run:  python3 demos/hessian_smoothing_study.py
"""

import math
from collections import defaultdict

import numpy as np

from fppe.experiments import SmoothingConfig, run_smoothing_study

cfg = SmoothingConfig(
    d_grid=(0.10, 0.25, 0.40, 0.55, 0.70),
    t_grid=(199, 543, 1474, 4004),
    family="uniform",
    trials=8,
    base_seed=11,
)
rows = run_smoothing_study(cfg)

by_cell = defaultdict(list)
errors = defaultdict(int)
for row in rows:
    if row.status == "ok":
        by_cell[(row.d, row.t, row.buyer)].append(row.estimate)
    else:
        errors[(row.d, row.t)] += 1

buyer = 6  # evaluation point beta = 1.0; valid for every d in the grid
print(f"diagonal estimate for the buyer evaluated at beta=1.0 "
      f"(mean +- sd over {cfg.trials} trials)\n")
header = "    t  " + "".join(f"d={d:<12}" for d in cfg.d_grid)
print(header)
for t in cfg.t_grid:
    cells = []
    for d in cfg.d_grid:
        vals = by_cell.get((d, t, buyer))
        if vals:
            cells.append(f"{np.mean(vals):6.3f}±{np.std(vals):<6.3f}")
        else:
            cells.append(f"{'domain err':<13}")
    print(f"{t:>5}  " + "".join(f"{c:<13}" for c in cells))

print("\nstencil domain errors per (d, t) across all buyers and trials:")
for (d, t), count in sorted(errors.items()):
    eps = t ** (-d)
    print(f"  d={d:.2f} t={t:<5} eps={eps:.3f}: {count} entries outside the domain")
print("\nsmall d: small spread, visible drift in t (bias); large d: the "
      "opposite. The recommended band is d in (0.32, 0.47).")
