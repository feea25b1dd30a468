"""Stochastic dual-averaging oracle for the limit market.

Used as ground truth in coverage studies: the limit pacing multipliers solve
min E[max_i beta_i v_i(theta)] - sum_i b_i log beta_i over (0, 1]^n, and the
running-average subgradient scheme below converges at the O(1/k) rate needed
to treat its output as the true beta for Monte Carlo work.
"""

from __future__ import annotations

import numpy as np

from .market import MarketDefinition, _rng

_BLOCK = 1 << 14


def solve_limit_dual_averaging(
    mdef: MarketDefinition, iterations: int, seed: int
) -> np.ndarray:
    """Averaged dual-averaging iterate after `iterations` fresh item draws.

    Per step: draw one item, take the winning-buyer subgradient of the price
    term, fold it into the running gradient average gbar, and reset beta to
    the closed-form minimizer of <gbar, beta> - sum b_i log beta_i over
    (0, 1]^n, i.e. beta_i = min(1, b_i / gbar_i). Returns the average of the
    iterates over the second half of the run.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    n = mdef.n
    budgets = mdef.budgets
    process = mdef.value_process
    rng = _rng(seed)

    gbar = np.zeros(n)
    beta = np.ones(n)
    acc = np.zeros(n)
    tail_start = iterations // 2
    tail_count = 0
    k = 0
    while k < iterations:
        block = min(_BLOCK, iterations - k)
        values = process.values_from_latent(rng.random((n, block)))
        for j in range(block):
            v = values[:, j]
            w = int(np.argmax(beta * v))
            gbar *= k / (k + 1.0)
            gbar[w] += v[w] / (k + 1.0)
            beta = np.where(gbar > budgets, budgets / np.maximum(gbar, 1e-300), 1.0)
            if k >= tail_start:
                acc += beta
                tail_count += 1
            k += 1
    return acc / tail_count


def estimate_limit_expectations(
    mdef: MarketDefinition, beta: np.ndarray, n_items: int, seed: int
) -> dict:
    """Plug a pacing vector into a fresh large sample to estimate limit
    functionals: revenue (mean clearing price), per-buyer won value, and the
    derived utility / leftover / welfare summaries."""
    if n_items < 1:
        raise ValueError("n_items must be >= 1")
    n = mdef.n
    budgets = mdef.budgets
    beta = np.asarray(beta, dtype=float)
    rng = _rng(seed)
    price_sum = 0.0
    won_value = np.zeros(n)
    done = 0
    while done < n_items:
        block = min(_BLOCK, n_items - done)
        values = mdef.value_process.values_from_latent(rng.random((n, block)))
        bids = beta[:, None] * values
        win = np.argmax(bids, axis=0)
        cols = np.arange(block)
        price_sum += bids[win, cols].sum()
        won_value += np.bincount(win, weights=values[win, cols], minlength=n)
        done += block
    item_utility = won_value / n_items
    utility = budgets / beta
    return {
        "revenue": price_sum / n_items,
        "item_utility": item_utility,
        "utility": utility,
        "leftover": np.maximum(utility - item_utility, 0.0),
        "nsw": float(budgets @ (np.log(budgets) - np.log(beta))),
    }
