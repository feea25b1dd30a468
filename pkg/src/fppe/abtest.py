"""Budget-splitting A/B experiments with item randomization.

Each sampled item draws one latent vector from which both potential value
processes are evaluated, and is assigned to the treated market with
probability pi. Buyer budgets are split pi / (1 - pi) across the two
markets; each arm's observed equilibrium only depends on the budget-supply
ratio, so arms are analyzed in their unit rescaling (full budgets, supply
1/t_w), which is the scale on which the treatment-effect estimators and
their variances are defined.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .inference import InferenceReport, infer
from .market import ItemBatch, ValueDistribution, _rng
from .solver import EquilibriumSolution, SolverConfig, solve_fppe


class ExperimentError(RuntimeError):
    """Raised when an experiment cannot produce estimates (e.g. empty arm)."""


@dataclass(frozen=True, eq=False)
class ABDesign:
    """Design of one budget-split experiment over a shared buyer set."""

    pi: float
    horizon: int
    seed: int
    budgets: np.ndarray
    control_process: ValueDistribution
    treatment_process: ValueDistribution

    def __post_init__(self):
        if not 0 < self.pi < 1:
            raise ValueError("pi must lie strictly between 0 and 1")
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2")
        b = np.asarray(self.budgets, dtype=float)
        if b.ndim != 1 or (b <= 0).any():
            raise ValueError("budgets must be a positive vector")
        object.__setattr__(self, "budgets", b)

    @property
    def n(self) -> int:
        return self.budgets.size

    def arm_budgets(self, arm: int) -> np.ndarray:
        """Budget split: pi * b to the treated market, (1 - pi) * b to control."""
        return self.budgets * (self.pi if arm == 1 else 1.0 - self.pi)

    def to_json(self) -> dict:
        return {
            "pi": self.pi,
            "horizon": self.horizon,
            "seed": self.seed,
            "budgets": self.budgets.tolist(),
            "control_process": self.control_process.to_json(),
            "treatment_process": self.treatment_process.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ABDesign":
        return cls(
            pi=float(obj["pi"]),
            horizon=int(obj["horizon"]),
            seed=int(obj["seed"]),
            budgets=np.asarray(obj["budgets"], dtype=float),
            control_process=ValueDistribution.from_json(obj["control_process"]),
            treatment_process=ValueDistribution.from_json(obj["treatment_process"]),
        )


def arm_item_values(design: ABDesign) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Realize the experiment's randomness: (control values, treated values,
    treatment assignment). Both value matrices are evaluated on the same
    per-item latents; column tau of each corresponds to the same item."""
    rng = _rng(design.seed)
    latent = rng.random((design.n, design.horizon))
    assign = rng.random(design.horizon) < design.pi
    v0 = design.control_process.values_from_latent(latent)
    v1 = design.treatment_process.values_from_latent(latent)
    return v0, v1, assign


@dataclass(frozen=True, eq=False)
class TreatmentEffectIntervals:
    alpha: float
    rev: tuple[float, float]
    nsw: tuple[float, float]
    beta: np.ndarray  # n x 2, per-coordinate intervals
    u: np.ndarray     # n x 2

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "rev": list(self.rev),
            "nsw": list(self.nsw),
            "beta": self.beta.tolist(),
            "u": self.u.tolist(),
        }


@dataclass(frozen=True, eq=False)
class ABTestResult:
    """Two observed equilibria plus treatment-effect estimates and CIs."""

    design: ABDesign
    t0: int
    t1: int
    solution0: EquilibriumSolution
    solution1: EquilibriumSolution
    report0: InferenceReport
    report1: InferenceReport
    tau_rev: float
    tau_nsw: float
    tau_beta: np.ndarray
    tau_u: np.ndarray
    intervals: TreatmentEffectIntervals

    @property
    def horizon(self) -> int:
        return self.t0 + self.t1

    def to_json(self) -> dict:
        return {
            "design": self.design.to_json(),
            "t0": self.t0,
            "t1": self.t1,
            "solution0": self.solution0.to_json(),
            "solution1": self.solution1.to_json(),
            "report0": self.report0.to_json(),
            "report1": self.report1.to_json(),
            "tau_rev": self.tau_rev,
            "tau_nsw": self.tau_nsw,
            "tau_beta": self.tau_beta.tolist(),
            "tau_u": self.tau_u.tolist(),
            "intervals": self.intervals.to_json(),
        }


def save_result(result: ABTestResult, path: str | Path) -> None:
    Path(path).write_text(json.dumps(result.to_json()))


def _combined_scalar_interval(tau, var1, var0, pi, t, alpha):
    if var1 < 0 or var0 < 0:
        raise ValueError("negative variance estimate")
    z = norm.ppf(1.0 - alpha / 2.0)
    half = z * np.sqrt((var1 / pi + var0 / (1.0 - pi)) / t)
    return (tau - half, tau + half)


def treatment_effect_ci(result: ABTestResult, alpha: float) -> TreatmentEffectIntervals:
    """Treatment-effect intervals at level alpha from the per-arm variances.

    tau_hat +- z_{alpha/2} * sqrt(var(1)/pi + var(0)/(1-pi)) / sqrt(t); the
    multiplier and utility effects get per-coordinate intervals from the
    diagonals of the per-arm covariances.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    pi, t = result.design.pi, result.horizon
    r0, r1 = result.report0, result.report1
    rev = _combined_scalar_interval(result.tau_rev, r1.var_rev, r0.var_rev, pi, t, alpha)
    nsw = _combined_scalar_interval(result.tau_nsw, r1.var_nsw, r0.var_nsw, pi, t, alpha)
    z = norm.ppf(1.0 - alpha / 2.0)
    var_beta = np.diag(r1.sigma_beta) / pi + np.diag(r0.sigma_beta) / (1.0 - pi)
    var_u = np.diag(r1.sigma_u) / pi + np.diag(r0.sigma_u) / (1.0 - pi)
    if (var_beta < -1e-12).any() or (var_u < -1e-12).any():
        raise ValueError("negative variance estimate")
    half_beta = z * np.sqrt(np.clip(var_beta, 0.0, None) / t)
    half_u = z * np.sqrt(np.clip(var_u, 0.0, None) / t)
    beta_iv = np.column_stack([result.tau_beta - half_beta, result.tau_beta + half_beta])
    u_iv = np.column_stack([result.tau_u - half_u, result.tau_u + half_u])
    return TreatmentEffectIntervals(alpha=alpha, rev=rev, nsw=nsw, beta=beta_iv, u=u_iv)


def run_ab_experiment(
    design: ABDesign,
    alpha: float = 0.1,
    d: float = 0.4,
    solver_cfg: SolverConfig | None = None,
) -> ABTestResult:
    """Run the budget-split experiment: draw items, randomize them into arms,
    solve both observed equilibria, and form effect estimates with CIs.

    Raises ExperimentError when an arm receives no items.
    """
    v0, v1, assign = arm_item_values(design)
    t1 = int(assign.sum())
    t0 = design.horizon - t1
    if t0 == 0 or t1 == 0:
        raise ExperimentError(
            f"empty arm (t0={t0}, t1={t1}); rerun with a larger horizon"
        )
    # Unit rescaling of each arm: budgets b with supply 1/t_w gives the same
    # equilibrium as budgets pi*b with supply pi/t_w.
    batch1 = ItemBatch(values=v1[:, assign], supply_weight=1.0 / t1, seed=design.seed)
    batch0 = ItemBatch(values=v0[:, ~assign], supply_weight=1.0 / t0, seed=design.seed)
    sol1 = solve_fppe(batch1, design.budgets, solver_cfg)
    sol0 = solve_fppe(batch0, design.budgets, solver_cfg)
    # Both arms share the smoothing of the full horizon: each arm holds a
    # constant fraction of the items, so the rate conditions still hold.
    eps = design.horizon ** (-d)
    rep1 = infer(sol1, batch1, design.budgets, alpha=alpha, d=d, epsilon=eps)
    rep0 = infer(sol0, batch0, design.budgets, alpha=alpha, d=d, epsilon=eps)
    result = ABTestResult(
        design=design,
        t0=t0,
        t1=t1,
        solution0=sol0,
        solution1=sol1,
        report0=rep0,
        report1=rep1,
        tau_rev=sol1.revenue - sol0.revenue,
        tau_nsw=sol1.nsw - sol0.nsw,
        tau_beta=sol1.beta - sol0.beta,
        tau_u=sol1.total_utility - sol0.total_utility,
        intervals=None,  # type: ignore[arg-type]
    )
    intervals = treatment_effect_ci(result, alpha)
    object.__setattr__(result, "intervals", intervals)
    return result


def decide(interval: tuple[float, float]) -> str:
    """Verdict from a treatment-effect CI: which side of zero it sits on."""
    lo, hi = interval
    if lo > hi:
        raise ValueError("malformed interval")
    if lo > 0:
        return "increase"
    if hi < 0:
        return "decrease"
    return "undecided"
