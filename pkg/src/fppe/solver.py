"""Observed-market equilibrium solver.

The pacing multipliers solve a convex program: minimize, over beta in
(0, 1]^n,

    H(beta) = sigma * sum_tau max_i beta_i * v_i(tau) - sum_i b_i * log beta_i.

The solver runs in phases: an L-BFGS-B descent locates the winner structure,
then a winner-stable fixed point solves the stationarity system

    beta_i = min(1, b_i / (sigma * sum_{tau won by i} v_i(tau)))

exactly. Instances whose optimum has genuinely tied items (several buyers
sharing the top paced bid) are handled by merging tied buyers into a single
aggregate buyer (their multipliers are locked to fixed ratios by the tie),
re-solving, and certifying the result through the allocation step.

Allocation recovery gives every uniquely won item to its winner; tied items
are split by a feasibility program (per-item full allocation, per-buyer
budget-exact spend for buyers below the pacing cap) with a minimum-norm
objective that pins a unique allocation.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .market import ItemBatch

BETA_FLOOR = 1e-12
_BOUNDARY = 1.0 - 1e-12


class SolverError(RuntimeError):
    """Raised when no iterate satisfies the KKT tolerance."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class ConsistencyError(RuntimeError):
    """Raised when recovered quantities violate equilibrium conditions."""


@dataclass(frozen=True)
class SolverConfig:
    kkt_tolerance: float = 1e-9
    max_iterations: int = 2000
    tie_tolerance: float = 1e-7  # relative to the item price
    refinement: bool = True      # enable the fixed-point / tie polish phases

    def __post_init__(self):
        if self.kkt_tolerance <= 0 or self.tie_tolerance <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True, eq=False)
class EquilibriumSolution:
    """One observed equilibrium: multipliers, prices, allocation, summaries."""

    beta: np.ndarray
    prices: np.ndarray
    allocation: np.ndarray
    leftover: np.ndarray
    item_utility: np.ndarray
    total_utility: np.ndarray
    revenue: float
    nsw: float
    kkt_residual: float

    def to_json(self) -> dict:
        return {
            "beta": self.beta.tolist(),
            "prices": self.prices.tolist(),
            "allocation": self.allocation.tolist(),
            "leftover": self.leftover.tolist(),
            "item_utility": self.item_utility.tolist(),
            "total_utility": self.total_utility.tolist(),
            "revenue": self.revenue,
            "nsw": self.nsw,
            "kkt_residual": self.kkt_residual,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EquilibriumSolution":
        return cls(
            beta=np.asarray(obj["beta"], dtype=float),
            prices=np.asarray(obj["prices"], dtype=float),
            allocation=np.asarray(obj["allocation"], dtype=float),
            leftover=np.asarray(obj["leftover"], dtype=float),
            item_utility=np.asarray(obj["item_utility"], dtype=float),
            total_utility=np.asarray(obj["total_utility"], dtype=float),
            revenue=float(obj["revenue"]),
            nsw=float(obj["nsw"]),
            kkt_residual=float(obj["kkt_residual"]),
        )


def save_solution(sol: EquilibriumSolution, path: str | Path) -> None:
    Path(path).write_text(json.dumps(sol.to_json()))


def load_solution(path: str | Path) -> EquilibriumSolution:
    return EquilibriumSolution.from_json(json.loads(Path(path).read_text()))


def dual_eg_objective(
    beta: np.ndarray, batch: ItemBatch, budgets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Objective value and a subgradient of the dual program at beta.

    The subgradient selects, per item, the lexicographically smallest
    highest-bidding buyer: g_i = sigma * sum_{tau won by i} v_i(tau) - b_i/beta_i.
    """
    beta = np.asarray(beta, dtype=float)
    budgets = np.asarray(budgets, dtype=float)
    if (beta <= 0).any():
        raise ValueError("beta must be strictly positive")
    values, sigma = batch.values, batch.supply_weight
    bids = beta[:, None] * values
    win = np.argmax(bids, axis=0)
    cols = np.arange(values.shape[1])
    value = sigma * bids[win, cols].sum() - budgets @ np.log(beta)
    won_value = np.bincount(win, weights=values[win, cols], minlength=beta.size)
    return float(value), sigma * won_value - budgets / beta


def dual_objective_batch(
    betas: np.ndarray, values: np.ndarray, sigma: float, budgets: np.ndarray
) -> np.ndarray:
    """Objective values for a stack of beta vectors (m x n), without subgradients.

    Evaluates the formula on (0, inf)^n; callers may pass points above 1.
    """
    betas = np.atleast_2d(np.asarray(betas, dtype=float))
    if (betas <= 0).any():
        raise ValueError("beta must be strictly positive")
    m, n = betas.shape
    t = values.shape[1]
    out = np.empty(m)
    chunk = max(1, int(4_000_000 / max(n * t, 1)))
    for s in range(0, m, chunk):
        block = betas[s : s + chunk]
        bids = block[:, :, None] * values[None, :, :]
        out[s : s + chunk] = bids.max(axis=1).sum(axis=1)
    return sigma * out - np.log(betas) @ np.asarray(budgets, dtype=float)


def _subgradient_residual(beta: np.ndarray, g: np.ndarray) -> float:
    """Max violation of the first-order conditions: |g_i| below the cap,
    positive part of g_i at the cap (leftover budget must be nonnegative)."""
    interior = beta < _BOUNDARY
    res = 0.0
    if interior.any():
        res = float(np.abs(g[interior]).max())
    if (~interior).any():
        res = max(res, float(max(0.0, g[~interior].max())))
    return res


def _assignment(values: np.ndarray, beta: np.ndarray) -> np.ndarray:
    return np.argmax(beta[:, None] * values, axis=0)


def _beta_for_assignment(
    values: np.ndarray, sigma: float, budgets: np.ndarray, win: np.ndarray
) -> np.ndarray:
    cols = np.arange(values.shape[1])
    won = np.bincount(win, weights=values[win, cols], minlength=values.shape[0])
    denom = sigma * won
    raw = np.where(denom > 0, budgets / np.maximum(denom, 1e-300), np.inf)
    return np.minimum(1.0, np.maximum(raw, BETA_FLOOR))


def _assignment_residual(
    values: np.ndarray, sigma: float, budgets: np.ndarray, beta: np.ndarray
) -> float:
    win = _assignment(values, beta)
    cols = np.arange(values.shape[1])
    won = np.bincount(win, weights=values[win, cols], minlength=beta.size)
    return _subgradient_residual(beta, sigma * won - budgets / beta)


def _lbfgs_phase(values, sigma, budgets, x0, maxiter):
    cols = np.arange(values.shape[1])
    n = values.shape[0]

    def fun(beta):
        bids = beta[:, None] * values
        win = np.argmax(bids, axis=0)
        val = sigma * bids[win, cols].sum() - budgets @ np.log(beta)
        won = np.bincount(win, weights=values[win, cols], minlength=n)
        return val, sigma * won - budgets / beta

    res = minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=[(BETA_FLOOR, 1.0)] * n,
        options={"maxiter": maxiter, "ftol": 1e-15, "gtol": 1e-11, "maxls": 50},
    )
    return np.clip(res.x, BETA_FLOOR, 1.0)


def _winner_fixed_point(values, sigma, budgets, beta0, max_rounds=80):
    """Iterate assignment -> stationary beta -> assignment until stable.

    A stable assignment certifies global optimality (the selected subgradient
    is zero below the cap and nonpositive at it)."""
    beta = beta0
    seen = set()
    for _ in range(max_rounds):
        win = _assignment(values, beta)
        key = win.tobytes()
        beta_new = _beta_for_assignment(values, sigma, budgets, win)
        if np.array_equal(_assignment(values, beta_new), win):
            return beta_new, True
        if key in seen:
            return beta, False
        seen.add(key)
        beta = beta_new
    return beta, False


def _tie_components(values, beta, rel_tol):
    """Group buyers connected by tied items at beta; returns (components,
    ratios) or None when tie ratios are inconsistent.

    Within a component the multipliers are locked to beta_i = c * r_i, with
    the ratio vector r determined by the tied item values and normalized to
    max r = 1.
    """
    n, t = values.shape
    bids = beta[:, None] * values
    prices = bids.max(axis=0)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    edges: list[tuple[int, int, float]] = []
    for tau in np.nonzero(prices > 0)[0]:
        members = np.nonzero(bids[:, tau] >= prices[tau] * (1.0 - rel_tol))[0]
        if members.size < 2:
            continue
        i0 = int(members[0])
        for j in members[1:]:
            j = int(j)
            # tie beta_i v_i = beta_j v_j  =>  r_j / r_i = v_i / v_j
            edges.append((i0, j, values[i0, tau] / values[j, tau]))
            ri, rj = find(i0), find(j)
            if ri != rj:
                parent[rj] = ri
    if not edges:
        return None

    ratios = np.full(n, np.nan)
    adj: dict[int, list[tuple[int, float]]] = {}
    for i, j, rho in edges:
        adj.setdefault(i, []).append((j, rho))
        adj.setdefault(j, []).append((i, 1.0 / rho))
    comps: dict[int, list[int]] = {}
    for i in range(n):
        comps.setdefault(find(i), []).append(i)
    components = []
    for root, members in comps.items():
        if len(members) == 1:
            ratios[members[0]] = 1.0
            components.append(np.asarray(members))
            continue
        start = members[0]
        ratios[start] = 1.0
        stack = [start]
        while stack:
            i = stack.pop()
            for j, rho in adj.get(i, ()):
                cand = ratios[i] * rho
                if np.isnan(ratios[j]):
                    ratios[j] = cand
                    stack.append(j)
                elif abs(ratios[j] - cand) > 1e-6 * max(ratios[j], cand):
                    return None
        members = np.asarray(members)
        ratios[members] /= ratios[members].max()
        components.append(members)
    return components, ratios


def _cone_phase(values, sigma, budgets):
    """High-accuracy interior-point solve of the dual program.

    Epigraph form: minimize sigma * sum(m) - b @ log(beta) subject to
    m_tau >= beta_i * v_i(tau) and beta <= 1. Used as a fallback reference
    when the optimum sits at a tie (a kink), where the descent and
    fixed-point phases cannot certify on their own.
    """
    import cvxpy as cp

    n, t = values.shape
    beta = cp.Variable(n, pos=True)
    m = cp.Variable(t)
    constraints = [beta <= 1]
    for i in range(n):
        constraints.append(m >= values[i] * beta[i])
    problem = cp.Problem(
        cp.Minimize(sigma * cp.sum(m) - np.asarray(budgets) @ cp.log(beta)),
        constraints,
    )
    try:
        # inaccurate statuses are fine: the result only seeds the exact polish
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            problem.solve(solver=cp.CLARABEL)
    except cp.error.SolverError:
        return None
    if beta.value is None:
        return None
    return np.clip(beta.value, BETA_FLOOR, 1.0)


def _certify_by_allocation(beta, values, sigma, budgets, cfg):
    """KKT residual using the allocation-implied subgradient selection."""
    try:
        _, x, _ = _recover_arrays(beta, values, sigma, budgets, cfg)
    except ConsistencyError:
        return np.inf
    g = sigma * (x * values).sum(axis=1) - budgets / beta
    return _subgradient_residual(beta, g)


def _solve_beta(values, sigma, budgets, cfg, depth=0):
    n = values.shape[0]
    row_mass = sigma * values.sum(axis=1)
    x0 = np.minimum(1.0, np.where(row_mass > 0, budgets / np.maximum(row_mass, 1e-300), 1.0))
    x0 = np.maximum(x0, 1e-6)

    beta1 = _lbfgs_phase(values, sigma, budgets, x0, min(cfg.max_iterations, 500))
    if not cfg.refinement:
        res = _assignment_residual(values, sigma, budgets, beta1)
        if res <= cfg.kkt_tolerance:
            return beta1
        raise SolverError(f"no KKT certificate without refinement (residual {res:.3e})", res)

    candidates = [beta1]
    beta2, ok = _winner_fixed_point(values, sigma, budgets, beta1)
    candidates.append(beta2)
    if ok:
        return beta2

    beta1b = _lbfgs_phase(values, sigma, budgets, beta2, cfg.max_iterations)
    candidates.append(beta1b)
    beta2b, ok = _winner_fixed_point(values, sigma, budgets, beta1b)
    candidates.append(beta2b)
    if ok:
        return beta2b

    cone = _cone_phase(values, sigma, budgets)
    if cone is not None:
        candidates.append(cone)
        beta3, ok = _winner_fixed_point(values, sigma, budgets, cone)
        candidates.append(beta3)
        if ok:
            return beta3

    best_res = min(
        _assignment_residual(values, sigma, budgets, b) for b in candidates
    )
    if depth >= 3:
        raise SolverError(
            f"fixed point did not stabilize (residual {best_res:.3e})", best_res
        )

    # The optimum likely sits at a tie: lock tied buyers' multipliers to the
    # ratios the ties imply, solve the reduced problem, and certify via the
    # budget-exact allocation.
    objs = dual_objective_batch(np.vstack(candidates), values, sigma, budgets)
    beta_ref = candidates[int(np.argmin(objs))]
    for detect_tol in (1e-8, 3e-7, 1e-5, 3e-4):
        grouping = _tie_components(values, beta_ref, detect_tol)
        if grouping is None:
            continue
        components, ratios = grouping
        if len(components) == n:
            continue
        merged_values = np.stack(
            [(ratios[c][:, None] * values[c]).max(axis=0) for c in components]
        )
        merged_budgets = np.array([budgets[c].sum() for c in components])
        try:
            c_sol = _solve_beta(merged_values, sigma, merged_budgets, cfg, depth + 1)
        except SolverError:
            continue
        beta_m = np.empty(n)
        for c_val, members in zip(c_sol, components):
            beta_m[members] = np.minimum(1.0, c_val * ratios[members])
        res = _certify_by_allocation(beta_m, values, sigma, budgets, cfg)
        best_res = min(best_res, res)
        if res <= cfg.kkt_tolerance:
            return beta_m
    raise SolverError(
        f"failed to certify the pacing solution (best residual {best_res:.3e})",
        best_res,
    )


def solve_dual_eg(
    batch: ItemBatch, budgets: np.ndarray, cfg: SolverConfig | None = None
) -> np.ndarray:
    """Solve the sample dual program for the pacing multipliers.

    Returns beta in (0, 1]^n with KKT residual at most cfg.kkt_tolerance
    (there exists a subgradient selection certifying optimality to that
    tolerance); raises SolverError otherwise.
    """
    cfg = cfg or SolverConfig()
    budgets = np.asarray(budgets, dtype=float)
    if budgets.ndim != 1 or budgets.size != batch.n:
        raise ValueError("budgets must be a vector matching the batch buyer count")
    if (budgets <= 0).any():
        raise ValueError("budgets must be strictly positive")
    return _solve_beta(batch.values, batch.supply_weight, budgets, cfg)


def _split_single_tied_item(tau, members, prices, sigma, budgets, beta, spend0):
    """Closed-form split of one tied item: below-cap members take exactly the
    share that exhausts their budget; capped members share the remainder."""
    price = prices[tau]
    shares = np.zeros(members.size)
    exact = beta[members] < _BOUNDARY
    targets = (budgets[members] - spend0[members]) / (sigma * price)
    shares[exact] = targets[exact]
    if (shares < -1e-7).any():
        raise ConsistencyError("tied-item split needs a negative share")
    shares = np.clip(shares, 0.0, None)
    remainder = 1.0 - shares.sum()
    capped = ~exact
    if capped.any():
        if remainder < -1e-7:
            raise ConsistencyError("tied item oversubscribed by budget-exact shares")
        share_each = max(remainder, 0.0) / capped.sum()
        if (share_each > targets[capped] + 1e-9).any():
            return None  # a capped member's budget binds; needs the full program
        shares[capped] = share_each
    elif abs(remainder) > 1e-6:
        raise ConsistencyError("tied item not exactly filled by budget-exact shares")
    return [(int(i), int(tau)) for i in members], shares / shares.sum()


def _solve_tie_qp(tied_items, member_lists, prices, sigma, budgets, beta, spend0):
    """Minimum-norm fractional split of tied items.

    Constraints: each tied item fully allocated; buyers below the pacing cap
    spend exactly their remaining budget; capped buyers stay within theirs.
    Spend rows are rescaled to unit magnitude before handing the program to
    the cone solver.
    """
    import cvxpy as cp

    pairs = [
        (int(i), int(tau))
        for tau, members in zip(tied_items, member_lists)
        for i in members
    ]
    xv = cp.Variable(len(pairs), nonneg=True)
    price_of = np.array([prices[tau] for _, tau in pairs])
    cons = []
    pos = 0
    for tau, members in zip(tied_items, member_lists):
        k = len(members)
        cons.append(cp.sum(xv[pos : pos + k]) == 1)
        pos += k
    involved = sorted({i for i, _ in pairs})
    for i in involved:
        idx = [k for k, (bi, _) in enumerate(pairs) if bi == i]
        scale = sigma * price_of[idx].max()
        spend_i = (sigma * price_of[idx] / scale) @ xv[idx]
        target = (budgets[i] - spend0[i]) / scale
        if beta[i] < _BOUNDARY:
            cons.append(spend_i == target)
        else:
            cons.append(spend_i <= target)
    problem = cp.Problem(cp.Minimize(cp.sum_squares(xv)), cons)
    try:
        # downstream invariant checks gate any inaccurate solve
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            problem.solve(solver=cp.CLARABEL)
    except cp.error.SolverError as exc:
        raise ConsistencyError(f"tie split failed: {exc}") from exc
    if problem.status not in ("optimal", "optimal_inaccurate") or xv.value is None:
        raise ConsistencyError(
            f"tie split infeasible (status {problem.status}); pacing solution "
            "likely not converged"
        )
    return pairs, np.clip(xv.value, 0.0, None)


def _recover_arrays(beta, values, sigma, budgets, cfg):
    n, t = values.shape
    bids = beta[:, None] * values
    prices = bids.max(axis=0)
    pos = prices > 0
    x = np.zeros((n, t))
    winner_mask = pos[None, :] & (bids >= prices[None, :] * (1.0 - cfg.tie_tolerance))
    counts = winner_mask.sum(axis=0)
    uniq_items = np.nonzero(pos & (counts == 1))[0]
    if uniq_items.size:
        x[np.argmax(bids[:, uniq_items], axis=0), uniq_items] = 1.0
    tied_items = np.nonzero(pos & (counts >= 2))[0]

    if tied_items.size:
        member_lists = [np.nonzero(winner_mask[:, tau])[0] for tau in tied_items]
        spend0 = sigma * (x * prices[None, :]).sum(axis=1)
        tied_buyers = np.unique(np.concatenate(member_lists))
        all_capped = bool((beta[tied_buyers] >= _BOUNDARY).all())
        done = False
        if all_capped:
            # equal split among capped buyers, valid while budgets stay slack
            for tau, members in zip(tied_items, member_lists):
                x[members, tau] = 1.0 / members.size
            spend = sigma * (x * prices[None, :]).sum(axis=1)
            if (spend <= budgets + 1e-9 * (1.0 + budgets)).all():
                done = True
            else:
                x[:, tied_items] = 0.0
        if not done and tied_items.size == 1:
            split = _split_single_tied_item(
                tied_items[0], member_lists[0], prices, sigma, budgets, beta, spend0
            )
            if split is not None:
                for (i, tau), v in zip(*split):
                    x[i, tau] = v
                done = True
        if not done:
            pairs, xval = _solve_tie_qp(
                tied_items, member_lists, prices, sigma, budgets, beta, spend0
            )
            for (i, tau), v in zip(pairs, xval):
                x[i, tau] = v
            col = x[:, tied_items].sum(axis=0)
            x[:, tied_items] /= col[None, :]

    spend = sigma * (x * prices[None, :]).sum(axis=1)
    leftover = budgets - spend
    if (leftover < -1e-7 * (1.0 + budgets)).any():
        raise ConsistencyError("allocation overspends a budget beyond tolerance")
    return prices, x, np.maximum(leftover, 0.0)


def recover_allocation(
    beta: np.ndarray,
    batch: ItemBatch,
    budgets: np.ndarray,
    cfg: SolverConfig | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Prices, allocation and leftover budgets implied by solved multipliers."""
    cfg = cfg or SolverConfig()
    return _recover_arrays(
        np.asarray(beta, dtype=float),
        batch.values,
        batch.supply_weight,
        np.asarray(budgets, dtype=float),
        cfg,
    )


def equilibrium_summary(
    beta: np.ndarray,
    prices: np.ndarray,
    allocation: np.ndarray,
    batch: ItemBatch,
    budgets: np.ndarray,
    check_tolerance: float = 1e-6,
) -> EquilibriumSolution:
    """Assemble the full solution record and re-check every invariant."""
    beta = np.asarray(beta, dtype=float)
    budgets = np.asarray(budgets, dtype=float)
    values, sigma = batch.values, batch.supply_weight
    item_utility = sigma * (allocation * values).sum(axis=1)
    spend = sigma * (allocation * prices[None, :]).sum(axis=1)
    leftover = np.maximum(budgets - spend, 0.0)
    total_utility = item_utility + leftover
    revenue = float(sigma * prices.sum())
    nsw = float(budgets @ (np.log(budgets) - np.log(beta)))
    g = item_utility - budgets / beta
    sol = EquilibriumSolution(
        beta=beta,
        prices=np.asarray(prices, dtype=float),
        allocation=np.asarray(allocation, dtype=float),
        leftover=leftover,
        item_utility=item_utility,
        total_utility=total_utility,
        revenue=revenue,
        nsw=nsw,
        kkt_residual=_subgradient_residual(beta, g),
    )
    violations = verify_solution(sol, batch, budgets, tol=check_tolerance)
    if violations:
        raise ConsistencyError("; ".join(violations))
    return sol


def solve_fppe(
    batch: ItemBatch, budgets: np.ndarray, cfg: SolverConfig | None = None
) -> EquilibriumSolution:
    """Solve multipliers, recover the allocation, and summarize."""
    cfg = cfg or SolverConfig()
    beta = solve_dual_eg(batch, budgets, cfg)
    prices, allocation, _ = recover_allocation(beta, batch, budgets, cfg)
    return equilibrium_summary(beta, prices, allocation, batch, budgets)


def verify_solution(
    sol: EquilibriumSolution,
    batch: ItemBatch,
    budgets: np.ndarray,
    tol: float = 1e-6,
) -> list[str]:
    """Check every equilibrium invariant; returns human-readable violations."""
    budgets = np.asarray(budgets, dtype=float)
    values, sigma = batch.values, batch.supply_weight
    beta, x, p = sol.beta, sol.allocation, sol.prices
    out = []
    if (beta <= 0).any() or (beta > 1 + 1e-12).any():
        out.append("beta outside (0, 1]")
    ratio = budgets / beta
    if np.max(np.abs(sol.total_utility - ratio) / (1.0 + ratio)) > tol:
        out.append("total utility != budget / beta")
    if np.max(np.abs(sol.total_utility - (sol.item_utility + sol.leftover))) > tol * (
        1.0 + np.abs(sol.total_utility).max()
    ):
        out.append("total utility != item utility + leftover")
    col = x.sum(axis=0)
    if (col > 1 + tol).any():
        out.append("some item over-allocated")
    bids = beta[:, None] * values
    max_bid = bids.max(axis=0)
    wi, wj = np.nonzero(x > tol)
    if (bids[wi, wj] < max_bid[wj] - tol * (1.0 + max_bid[wj])).any():
        out.append("an allocated buyer is not a highest bidder")
    spend = sigma * (x * p[None, :]).sum(axis=1)
    if (spend > budgets + tol * (1.0 + budgets)).any():
        out.append("budget exceeded")
    over = sol.leftover > tol * (1.0 + budgets)
    if (beta[over] < 1 - tol).any():
        out.append("positive leftover with beta < 1")
    full = p > tol
    if full.any() and np.max(np.abs(col[full] - 1.0)) > tol:
        out.append("positive-price item not fully allocated")
    psi = -float(budgets @ np.log(beta))
    nsw_identity = psi + float(budgets @ np.log(budgets))
    if abs(sol.nsw - nsw_identity) > tol * (1.0 + abs(sol.nsw)):
        out.append("nsw identity violated")
    if sol.revenue > budgets.sum() + tol * (1.0 + budgets.sum()):
        out.append("revenue exceeds total budget")
    if (beta < 1 - 1e-9).all():
        if abs(sol.revenue - budgets.sum()) > 1e-8 * (1.0 + budgets.sum()):
            out.append("all buyers paced but revenue != total budget")
    return out
