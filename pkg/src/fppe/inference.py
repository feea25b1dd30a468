"""Asymptotic inference for observed pacing equilibria.

Follows the plug-in recipe: estimate which buyers sit at the pacing cap
(within a shrinking margin eps_t = t^-d), estimate the objective's Hessian by
a four-point numerical difference with the same smoothing, project it onto
the below-cap coordinates, form per-item influence estimates, and aggregate
their second moments into covariance estimates and confidence sets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import chi2, norm

from .market import ItemBatch
from .solver import EquilibriumSolution, dual_objective_batch

_BOUNDARY = 1.0 - 1e-12


def estimate_active_set(beta: np.ndarray, epsilon: float) -> np.ndarray:
    """Indicator of buyers treated as strictly below the pacing cap.

    Entry i is 1 iff beta_i < 1 - epsilon (budget binding); buyers at or near
    the cap get 0 and are dropped from every covariance.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return (np.asarray(beta, dtype=float) < 1.0 - epsilon).astype(int)


def _stencil_points(beta: np.ndarray, epsilon: float, i: int, j: int) -> np.ndarray:
    out = []
    for si in (+1, -1):
        for sj in (+1, -1):
            p = beta.copy()
            p[i] += si * epsilon
            p[j] += sj * epsilon
            out.append(p)
    return np.asarray(out)


def hessian_entry(
    batch: ItemBatch, budgets: np.ndarray, beta: np.ndarray, epsilon: float, i: int, j: int
) -> float:
    """One four-point-stencil entry of the Hessian estimate.

    The objective formula is evaluated directly, including points above the
    cap; only positivity of the perturbed coordinates is required.
    """
    beta = np.asarray(beta, dtype=float)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    need = 2.0 * epsilon if i == j else epsilon
    for k in {i, j}:
        if beta[k] - need <= 0:
            raise ValueError(
                f"beta[{k}] - {'2' if i == j else ''}epsilon <= 0; "
                "use a smaller epsilon (larger smoothing exponent)"
            )
    pts = _stencil_points(beta, epsilon, i, j)
    vals = dual_objective_batch(pts, batch.values, batch.supply_weight, budgets)
    return float((vals[0] - vals[1] - vals[2] + vals[3]) / (4.0 * epsilon**2))


def numerical_hessian(
    batch: ItemBatch, budgets: np.ndarray, beta: np.ndarray, epsilon: float
) -> np.ndarray:
    """Four-point numerical-difference Hessian of the dual objective at beta.

    Requires beta_i - 2*epsilon > 0 for every i so each stencil point stays
    inside the formula's domain. Each (i, j) pair is evaluated once, so the
    result is symmetric by construction.

    Stencil points only move rows i and j, so each evaluation reuses the
    per-item maximum over the remaining rows (tracked via each column's
    top-3 bids); the log-barrier terms of unperturbed coordinates cancel
    exactly in the four-point combination and are skipped.
    """
    beta = np.asarray(beta, dtype=float)
    budgets = np.asarray(budgets, dtype=float)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if (beta - 2.0 * epsilon <= 0).any():
        raise ValueError(
            "beta_i - 2*epsilon <= 0 for some buyer; use a smaller epsilon"
        )
    values, sigma = batch.values, batch.supply_weight
    n, t = values.shape
    bids = beta[:, None] * values
    k = min(n, 3)
    order = np.argsort(bids, axis=0)[::-1][:k]
    top_val = np.take_along_axis(bids, order, axis=0)
    if k < 3:  # pad; values are nonnegative so a 0.0 floor never overshoots
        pad_val = np.zeros((3 - k, t))
        pad_idx = np.full((3 - k, t), -1)
        top_val = np.vstack([top_val, pad_val])
        order = np.vstack([order, pad_idx])

    def max_excluding(i, j):
        base = top_val[0].copy()
        hit1 = (order[0] == i) | (order[0] == j)
        base[hit1] = top_val[1][hit1]
        hit2 = hit1 & ((order[1] == i) | (order[1] == j))
        base[hit2] = top_val[2][hit2]
        return base

    hess = np.zeros((n, n))
    eps2 = 4.0 * epsilon**2
    f0 = top_val[0].sum()
    for i in range(n):
        base = max_excluding(i, i)
        vi = values[i]
        f_plus = np.maximum(base, (beta[i] + 2.0 * epsilon) * vi).sum()
        f_minus = np.maximum(base, (beta[i] - 2.0 * epsilon) * vi).sum()
        log_part = -budgets[i] * (
            np.log(beta[i] + 2.0 * epsilon)
            - 2.0 * np.log(beta[i])
            + np.log(beta[i] - 2.0 * epsilon)
        )
        hess[i, i] = (sigma * (f_plus - 2.0 * f0 + f_minus) + log_part) / eps2
        for j in range(i + 1, n):
            base = max_excluding(i, j)
            up_i = np.maximum(base, (beta[i] + epsilon) * vi)
            dn_i = np.maximum(base, (beta[i] - epsilon) * vi)
            vj = values[j]
            bj_up = (beta[j] + epsilon) * vj
            bj_dn = (beta[j] - epsilon) * vj
            quad = (
                np.maximum(up_i, bj_up).sum()
                - np.maximum(up_i, bj_dn).sum()
                - np.maximum(dn_i, bj_up).sum()
                + np.maximum(dn_i, bj_dn).sum()
            )
            hess[i, j] = hess[j, i] = sigma * quad / eps2
    return hess


def projected_hessian_pinv(hessian: np.ndarray, indicator: np.ndarray) -> np.ndarray:
    """Pseudo-inverse of the Hessian projected on below-cap coordinates.

    Zero everywhere except the indicator==1 block, which holds the inverse of
    that submatrix (the block form of the projected pseudo-inverse).
    """
    hessian = np.asarray(hessian, dtype=float)
    idx = np.nonzero(np.asarray(indicator).astype(bool))[0]
    out = np.zeros_like(hessian)
    if idx.size == 0:
        return out
    sub = hessian[np.ix_(idx, idx)]
    cond = np.linalg.cond(sub)
    if not np.isfinite(cond) or cond > 1e14:
        raise np.linalg.LinAlgError(
            f"below-cap Hessian block is numerically singular (cond={cond:.3e})"
        )
    out[np.ix_(idx, idx)] = np.linalg.inv(sub)
    return out


def _check_unit_supply(batch: ItemBatch) -> None:
    if abs(batch.supply_weight * batch.t - 1.0) > 1e-8:
        raise ValueError(
            "inference assumes supply_weight == 1/t; rescale the market "
            "(values and supply inversely) before inferring"
        )


def influence_estimates(
    eqsol: EquilibriumSolution, batch: ItemBatch, projected_pinv: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-item influence estimates for the multipliers and for revenue.

    dbeta[:, tau] = -pinv @ (x(tau) * v(tau) - mean won value);
    drev[tau] = p(tau) - REV + <mean won value, dbeta[:, tau]>.
    Both sum to zero over items up to roundoff.
    """
    _check_unit_supply(batch)
    mu = eqsol.allocation * batch.values
    centered = mu - eqsol.item_utility[:, None]
    dbeta = -np.asarray(projected_pinv) @ centered
    drev = eqsol.prices - eqsol.revenue + eqsol.item_utility @ dbeta
    return dbeta, drev


@dataclass(frozen=True, eq=False)
class CovarianceEstimates:
    sigma_beta: np.ndarray
    sigma_u: np.ndarray
    sigma_delta: np.ndarray
    var_rev: float
    var_nsw: float


def plugin_covariances(
    dbeta: np.ndarray,
    drev: np.ndarray,
    eqsol: EquilibriumSolution,
    batch: ItemBatch,
    hessian: np.ndarray,
    projected_pinv: np.ndarray,
    budgets: np.ndarray,
) -> CovarianceEstimates:
    """Plug-in covariance estimates from influence second moments.

    sigma_beta is the mean outer product of the multiplier influences; the
    utility / welfare / leftover covariances are its delta-method images with
    solved quantities substituted for limit ones.
    """
    budgets = np.asarray(budgets, dtype=float)
    t = dbeta.shape[1]
    sigma_beta = dbeta @ dbeta.T / t
    sigma_beta = (sigma_beta + sigma_beta.T) / 2.0
    ratio = budgets / eqsol.beta**2
    sigma_u = ratio[:, None] * sigma_beta * ratio[None, :]
    weights = budgets / eqsol.beta
    var_nsw = float(weights @ sigma_beta @ weights)
    var_rev = float(drev @ drev / t)
    centered = eqsol.allocation * batch.values - eqsol.item_utility[:, None]
    omega = centered @ centered.T / t
    m = np.eye(budgets.size) - np.asarray(hessian) @ np.asarray(projected_pinv)
    sigma_delta = m @ omega @ m.T
    return CovarianceEstimates(
        sigma_beta=sigma_beta,
        sigma_u=sigma_u,
        sigma_delta=(sigma_delta + sigma_delta.T) / 2.0,
        var_rev=var_rev,
        var_nsw=var_nsw,
    )


def confidence_interval_rev(
    eqsol: EquilibriumSolution, var_rev: float, t: int, alpha: float
) -> tuple[float, float]:
    """Normal interval REV +- z_{alpha/2} * sqrt(var_rev / t)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if var_rev < 0:
        raise ValueError("revenue variance estimate is negative")
    half = norm.ppf(1.0 - alpha / 2.0) * np.sqrt(var_rev / t)
    return (eqsol.revenue - half, eqsol.revenue + half)


@dataclass(frozen=True, eq=False)
class ConfidenceEllipsoid:
    """Region {center + shape @ w : ||w|| <= radius}; shape = covariance^(1/2)."""

    center: np.ndarray
    shape: np.ndarray
    radius: float

    def contains(self, point: np.ndarray, null_atol: float = 1e-9) -> bool:
        """Membership via the minimum-norm preimage under the shape matrix.

        Directions outside the shape's range (zero-variance coordinates)
        must match the center to within null_atol.
        """
        y = np.asarray(point, dtype=float) - self.center
        w, u = np.linalg.eigh(self.shape)
        y_rot = u.T @ y
        cutoff = max(w.max(initial=0.0), 1.0) * 1e-12
        in_range = w > cutoff
        if np.any(np.abs(y_rot[~in_range]) > null_atol):
            return False
        coef = y_rot[in_range] / w[in_range]
        return float(np.linalg.norm(coef)) <= self.radius + 1e-12

    def to_json(self) -> dict:
        return {
            "center": self.center.tolist(),
            "shape": self.shape.tolist(),
            "radius": self.radius,
        }


def confidence_region_beta(
    beta: np.ndarray, sigma_beta: np.ndarray, t: int, alpha: float
) -> ConfidenceEllipsoid:
    """Ellipsoidal region beta + (chi_{n,alpha}/sqrt(t)) * sigma_beta^(1/2) * Ball.

    chi_{n,alpha} is the square root of the (1-alpha) quantile of a
    chi-square with n degrees of freedom.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    beta = np.asarray(beta, dtype=float)
    sigma_beta = np.asarray(sigma_beta, dtype=float)
    sym = (sigma_beta + sigma_beta.T) / 2.0
    w, u = np.linalg.eigh(sym)
    if w.min(initial=0.0) < -1e-8 * max(1.0, w.max(initial=0.0)):
        raise ValueError("sigma_beta is not positive semidefinite")
    root = (u * np.sqrt(np.clip(w, 0.0, None))) @ u.T
    radius = float(np.sqrt(chi2.ppf(1.0 - alpha, beta.size) / t))
    return ConfidenceEllipsoid(center=beta, shape=root, radius=radius)


@dataclass(frozen=True, eq=False)
class InferenceReport:
    """Active-set estimate, Hessian, covariances and confidence sets."""

    active_indicator: np.ndarray
    hessian: np.ndarray
    projected_pinv: np.ndarray
    sigma_beta: np.ndarray
    sigma_u: np.ndarray
    sigma_delta: np.ndarray
    var_rev: float
    var_nsw: float
    epsilon: float
    alpha: float
    ci_rev: tuple[float, float]
    cr_beta: ConfidenceEllipsoid

    def to_json(self) -> dict:
        return {
            "active_indicator": self.active_indicator.tolist(),
            "hessian": self.hessian.tolist(),
            "projected_pinv": self.projected_pinv.tolist(),
            "sigma_beta": self.sigma_beta.tolist(),
            "sigma_u": self.sigma_u.tolist(),
            "sigma_delta": self.sigma_delta.tolist(),
            "var_rev": self.var_rev,
            "var_nsw": self.var_nsw,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "ci_rev": list(self.ci_rev),
            "cr_beta": self.cr_beta.to_json(),
        }


def save_report(report: InferenceReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_json()))


def infer(
    eqsol: EquilibriumSolution,
    batch: ItemBatch,
    budgets: np.ndarray,
    alpha: float,
    d: float = 0.4,
    epsilon: float | None = None,
) -> InferenceReport:
    """Full inference pipeline at smoothing eps_t = t^-d.

    Stages: active-set estimate -> numerical Hessian -> projected
    pseudo-inverse -> influence estimates -> plug-in covariances ->
    confidence interval for revenue and confidence region for the
    multipliers.

    `epsilon` overrides the t^-d rule; experiment designs that analyze
    sub-batches of a larger item stream pass the smoothing of the full
    stream here.
    """
    if not 0 < d < 0.5:
        raise ValueError("d must lie in (0, 0.5)")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    _check_unit_supply(batch)
    budgets = np.asarray(budgets, dtype=float)
    t = batch.t
    if epsilon is None:
        epsilon = t ** (-d)
    elif not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    indicator = estimate_active_set(eqsol.beta, epsilon)
    hessian = numerical_hessian(batch, budgets, eqsol.beta, epsilon)
    pinv = projected_hessian_pinv(hessian, indicator)
    dbeta, drev = influence_estimates(eqsol, batch, pinv)
    covs = plugin_covariances(dbeta, drev, eqsol, batch, hessian, pinv, budgets)
    ci_rev = confidence_interval_rev(eqsol, covs.var_rev, t, alpha)
    cr_beta = confidence_region_beta(eqsol.beta, covs.sigma_beta, t, alpha)
    return InferenceReport(
        active_indicator=indicator,
        hessian=hessian,
        projected_pinv=pinv,
        sigma_beta=covs.sigma_beta,
        sigma_u=covs.sigma_u,
        sigma_delta=covs.sigma_delta,
        var_rev=covs.var_rev,
        var_nsw=covs.var_nsw,
        epsilon=epsilon,
        alpha=alpha,
        ci_rev=ci_rev,
        cr_beta=cr_beta,
    )
