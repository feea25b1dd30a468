"""Monte Carlo experiment harness.

Reproduces the standard study battery: confidence-interval coverage for
revenue, coverage for A/B treatment effects, histograms of the scaled
multiplier errors, and the bias/variance sweep of the numerical-difference
Hessian over the smoothing exponent.

Ground truth for a configuration comes from a two-step oracle: dual
averaging for the limit multipliers (run twice; the runs must agree to 0.01
componentwise before any study proceeds) followed by a fresh large-sample
evaluation of the limit functionals. Trials are independent tasks seeded
`cell_seed + trial_index`, so results are reproducible regardless of worker
count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy
import scipy.stats

from . import __version__
from .abtest import ABDesign, ExperimentError, run_ab_experiment
from .inference import hessian_entry, infer
from .limit import estimate_limit_expectations, solve_limit_dual_averaging
from .market import ItemBatch, MarketDefinition, ValueDistribution, _rng, sample_items
from .solver import ConsistencyError, SolverError, solve_fppe

DEFAULT_T_GRID = (
    199, 223, 249, 279, 311, 348, 389, 434, 486, 543, 606, 678, 757, 846, 946,
    1057, 1181, 1319, 1474, 1647, 1841, 2057, 2298, 2568, 2870, 3207, 3583,
    4004, 4474, 5000,
)
DEFAULT_D_GRID = (0.10, 0.17, 0.25, 0.32, 0.40, 0.47, 0.55, 0.62, 0.70)
DEFAULT_BETA_EVAL = tuple(np.linspace(0.2, 1.0, 7))

# Support of the i.i.d. uniforms in the budget scheme (recorded in manifests).
BUDGET_UNIFORM_SUPPORT = (0.0, 1.0)

_TRIAL_ERRORS = (SolverError, ConsistencyError, ValueError, np.linalg.LinAlgError)


class GroundTruthError(RuntimeError):
    """The two dual-averaging runs disagreed; the oracle is not trustworthy."""


def process_for_family(family: str) -> ValueDistribution:
    if family == "uniform":
        return ValueDistribution.uniform()
    if family == "exponential":
        return ValueDistribution.exponential()
    if family == "truncated_normal":
        return ValueDistribution.truncated_normal()
    if family == "constant":
        return ValueDistribution.constant(1.0)
    raise ValueError(f"unsupported study family {family!r}")


def draw_budgets(n: int, active_fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Budget scheme: b_i = U_i + 1 for the first ceil(active_fraction * n)
    buyers (they keep leftover budget in the limit), b_i = U_i otherwise."""
    if not 0 <= active_fraction <= 1:
        raise ValueError("active_fraction must lie in [0, 1]")
    k = math.ceil(active_fraction * n)
    budgets = rng.random(n)
    budgets[:k] += 1.0
    return budgets


@dataclass(frozen=True, eq=False)
class GroundTruth:
    beta_star: np.ndarray
    revenue: float
    nsw: float
    utility: np.ndarray
    leftover: np.ndarray
    da_disagreement: float


def market_ground_truth(
    mdef: MarketDefinition,
    da_iterations: int,
    truth_items: int,
    seed: int,
    agreement_tol: float = 0.01,
) -> GroundTruth:
    """Two-run dual-averaging oracle plus a large-sample functional pass."""
    run_a = solve_limit_dual_averaging(mdef, da_iterations, seed=seed + 1)
    run_b = solve_limit_dual_averaging(mdef, da_iterations, seed=seed + 2)
    gap = float(np.abs(run_a - run_b).max())
    if gap > agreement_tol:
        raise GroundTruthError(
            f"dual-averaging runs disagree by {gap:.4f} > {agreement_tol}"
        )
    beta_star = (run_a + run_b) / 2.0
    limits = estimate_limit_expectations(mdef, beta_star, truth_items, seed=seed + 3)
    return GroundTruth(
        beta_star=beta_star,
        revenue=float(limits["revenue"]),
        nsw=float(limits["nsw"]),
        utility=limits["utility"],
        leftover=limits["leftover"],
        da_disagreement=gap,
    )


def _map_tasks(fn, tasks, jobs: int):
    if jobs <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


# ---------------------------------------------------------------------------
# Revenue-CI coverage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    """One coverage-study configuration (market is drawn once per config)."""

    n: int
    t_grid: tuple[int, ...]
    family: str = "uniform"
    active_fraction: float = 0.4
    d: float = 0.4
    alpha: float = 0.1
    trials: int = 100
    base_seed: int = 0
    da_iterations: int = 1_000_000
    truth_items: int = 1_000_000

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.t_grid:
            raise ValueError("t_grid must be nonempty")
        object.__setattr__(self, "t_grid", tuple(int(t) for t in self.t_grid))


@dataclass(frozen=True)
class CoverageRow:
    n: int
    family: str
    active_fraction: float
    t: int
    alpha: float
    d: float
    coverage: float
    covered: int
    trials: int
    failures: int
    mean_ci_width: float
    truth: float


def market_for_config(cfg: ScenarioConfig) -> MarketDefinition:
    budgets = draw_budgets(cfg.n, cfg.active_fraction, _rng(cfg.base_seed))
    return MarketDefinition(budgets=budgets, value_process=process_for_family(cfg.family))


def _coverage_trial(task):
    mdef, t, seed, alpha, d, rev_star = task
    try:
        batch = sample_items(mdef, t, seed)
        sol = solve_fppe(batch, mdef.budgets)
        report = infer(sol, batch, mdef.budgets, alpha=alpha, d=d)
    except _TRIAL_ERRORS as exc:
        return (False, float("nan"), repr(exc))
    lo, hi = report.ci_rev
    return (lo <= rev_star <= hi, hi - lo, None)


def run_coverage_study(cfg: ScenarioConfig, jobs: int = 1) -> list[CoverageRow]:
    """Coverage of the revenue CI across the config's t grid.

    Failed trials (solver or inference errors) are excluded from the
    coverage ratio and flagged in the row's failure count.
    """
    mdef = market_for_config(cfg)
    truth = market_ground_truth(
        mdef, cfg.da_iterations, cfg.truth_items, seed=cfg.base_seed + 777_000
    )
    rows = []
    for ti, t in enumerate(cfg.t_grid):
        cell_seed = cfg.base_seed + 100_003 * (ti + 1)
        tasks = [
            (mdef, t, cell_seed + k, cfg.alpha, cfg.d, truth.revenue)
            for k in range(cfg.trials)
        ]
        outcomes = _map_tasks(_coverage_trial, tasks, jobs)
        failures = sum(1 for _, _, err in outcomes if err is not None)
        ok = [(c, w) for c, w, err in outcomes if err is None]
        covered = sum(1 for c, _ in ok if c)
        denom = max(len(ok), 1)
        rows.append(
            CoverageRow(
                n=cfg.n,
                family=cfg.family,
                active_fraction=cfg.active_fraction,
                t=t,
                alpha=cfg.alpha,
                d=cfg.d,
                coverage=covered / denom,
                covered=covered,
                trials=cfg.trials,
                failures=failures,
                mean_ci_width=float(np.mean([w for _, w in ok])) if ok else float("nan"),
                truth=truth.revenue,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# A/B treatment-effect coverage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ABScenarioConfig:
    n: int
    t_grid: tuple[int, ...]
    pi_grid: tuple[float, ...]
    control_family: str = "uniform"
    treatment_family: str = "exponential"
    active_fraction: float = 0.3
    d: float = 0.4
    alpha: float = 0.1
    trials: int = 100
    base_seed: int = 0
    da_iterations: int = 1_000_000
    truth_items: int = 1_000_000

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.t_grid or not self.pi_grid:
            raise ValueError("grids must be nonempty")
        object.__setattr__(self, "t_grid", tuple(int(t) for t in self.t_grid))
        object.__setattr__(self, "pi_grid", tuple(float(p) for p in self.pi_grid))


@dataclass(frozen=True)
class ABCoverageRow:
    n: int
    t: int
    pi: float
    control_family: str
    treatment_family: str
    alpha: float
    coverage: float
    covered: int
    trials: int
    failures: int
    mean_ci_width: float
    truth: float


def _ab_trial(task):
    budgets, control, treatment, pi, t, seed, alpha, d, tau_star = task
    design = ABDesign(
        pi=pi,
        horizon=t,
        seed=seed,
        budgets=budgets,
        control_process=control,
        treatment_process=treatment,
    )
    try:
        result = run_ab_experiment(design, alpha=alpha, d=d)
    except (ExperimentError, *_TRIAL_ERRORS) as exc:
        return (False, float("nan"), repr(exc))
    lo, hi = result.intervals.rev
    return (lo <= tau_star <= hi, hi - lo, None)


def run_ab_coverage_study(cfg: ABScenarioConfig, jobs: int = 1) -> list[ABCoverageRow]:
    """Coverage of the treatment-effect CI over the (t, pi) grid.

    The true effect is the difference of the two limit-market revenues,
    each computed with the dual-averaging-plus-sampling oracle.
    """
    budgets = draw_budgets(cfg.n, cfg.active_fraction, _rng(cfg.base_seed))
    control = process_for_family(cfg.control_family)
    treatment = process_for_family(cfg.treatment_family)
    m0 = MarketDefinition(budgets=budgets, value_process=control)
    m1 = MarketDefinition(budgets=budgets, value_process=treatment)
    truth0 = market_ground_truth(
        m0, cfg.da_iterations, cfg.truth_items, seed=cfg.base_seed + 881_000
    )
    truth1 = market_ground_truth(
        m1, cfg.da_iterations, cfg.truth_items, seed=cfg.base_seed + 882_000
    )
    tau_star = truth1.revenue - truth0.revenue
    rows = []
    for ti, t in enumerate(cfg.t_grid):
        for pi_idx, pi in enumerate(cfg.pi_grid):
            cell_seed = cfg.base_seed + 100_003 * (ti + 1) + 611 * (pi_idx + 1)
            tasks = [
                (budgets, control, treatment, pi, t, cell_seed + k, cfg.alpha, cfg.d, tau_star)
                for k in range(cfg.trials)
            ]
            outcomes = _map_tasks(_ab_trial, tasks, jobs)
            failures = sum(1 for _, _, err in outcomes if err is not None)
            ok = [(c, w) for c, w, err in outcomes if err is None]
            covered = sum(1 for c, _ in ok if c)
            rows.append(
                ABCoverageRow(
                    n=cfg.n,
                    t=t,
                    pi=pi,
                    control_family=cfg.control_family,
                    treatment_family=cfg.treatment_family,
                    alpha=cfg.alpha,
                    coverage=covered / max(len(ok), 1),
                    covered=covered,
                    trials=cfg.trials,
                    failures=failures,
                    mean_ci_width=float(np.mean([w for _, w in ok])) if ok else float("nan"),
                    truth=tau_star,
                )
            )
    return rows


# ---------------------------------------------------------------------------
# CLT histogram data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HistogramConfig:
    n: int
    t: int
    family: str = "uniform"
    active_fraction: float = 0.2
    trials: int = 100
    base_seed: int = 0
    da_iterations: int = 1_000_000
    truth_items: int = 1_000_000
    budgets: tuple[float, ...] | None = None      # overrides the budget scheme
    beta_star: tuple[float, ...] | None = None    # overrides the oracle


@dataclass(frozen=True, eq=False)
class HistogramResult:
    """Per-trial samples of sqrt(t) * (solved beta - limit beta), with
    normality summaries and the boundary-mass statistic per buyer."""

    samples: np.ndarray  # trials x n
    beta_star: np.ndarray
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    boundary_mass: np.ndarray
    failures: int


def _hist_trial(task):
    mdef, t, seed = task
    try:
        batch = sample_items(mdef, t, seed)
        return solve_fppe(batch, mdef.budgets).beta
    except _TRIAL_ERRORS:
        return None


def run_clt_histogram(cfg: HistogramConfig, jobs: int = 1) -> HistogramResult:
    if cfg.budgets is not None:
        budgets = np.asarray(cfg.budgets, dtype=float)
    else:
        budgets = draw_budgets(cfg.n, cfg.active_fraction, _rng(cfg.base_seed))
    mdef = MarketDefinition(
        budgets=budgets, value_process=process_for_family(cfg.family)
    )
    if cfg.beta_star is not None:
        beta_star = np.asarray(cfg.beta_star, dtype=float)
    else:
        beta_star = market_ground_truth(
            mdef, cfg.da_iterations, cfg.truth_items, seed=cfg.base_seed + 777_000
        ).beta_star
    tasks = [(mdef, cfg.t, cfg.base_seed + k) for k in range(cfg.trials)]
    betas = [b for b in _map_tasks(_hist_trial, tasks, jobs) if b is not None]
    failures = cfg.trials - len(betas)
    betas = np.asarray(betas)
    root_t = math.sqrt(cfg.t)
    samples = root_t * (betas - beta_star[None, :])
    return HistogramResult(
        samples=samples,
        beta_star=beta_star,
        skewness=scipy.stats.skew(samples, axis=0),
        excess_kurtosis=scipy.stats.kurtosis(samples, axis=0),
        boundary_mass=(np.abs(root_t * (betas - 1.0)) <= 0.05).mean(axis=0),
        failures=failures,
    )


# ---------------------------------------------------------------------------
# Hessian smoothing sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothingConfig:
    d_grid: tuple[float, ...] = DEFAULT_D_GRID
    t_grid: tuple[int, ...] = DEFAULT_T_GRID
    family: str = "uniform"
    trials: int = 10
    base_seed: int = 0
    beta_eval: tuple[float, ...] = DEFAULT_BETA_EVAL
    # Budgets only shift the diagonal by the smooth b_i/beta_i^2 term; ones
    # keep the sweep focused on the price-term curvature.
    budgets: tuple[float, ...] | None = None


@dataclass(frozen=True)
class SmoothingRow:
    d: float
    t: int
    trial: int
    buyer: int
    estimate: float  # NaN when the stencil left the domain
    status: str      # "ok" | "domain_error"


def run_smoothing_study(cfg: SmoothingConfig) -> list[SmoothingRow]:
    """Diagonal Hessian estimates over the (d, t) grid at a fixed beta.

    Stencil evaluations whose perturbed point would leave the log domain are
    recorded as domain_error rows rather than silently shrinking epsilon.
    """
    beta = np.asarray(cfg.beta_eval, dtype=float)
    n = beta.size
    budgets = (
        np.asarray(cfg.budgets, dtype=float) if cfg.budgets is not None else np.ones(n)
    )
    process = process_for_family(cfg.family)
    rows = []
    for ti, t in enumerate(cfg.t_grid):
        for trial in range(cfg.trials):
            seed = cfg.base_seed + 100_003 * (ti + 1) + trial
            values = process.values_from_latent(_rng(seed).random((n, t)))
            batch = ItemBatch(values=values, supply_weight=1.0 / t, seed=seed)
            for d in cfg.d_grid:
                eps = t ** (-d)
                for i in range(n):
                    try:
                        est = hessian_entry(batch, budgets, beta, eps, i, i)
                        rows.append(SmoothingRow(d, t, trial, i, est, "ok"))
                    except ValueError:
                        rows.append(
                            SmoothingRow(d, t, trial, i, float("nan"), "domain_error")
                        )
    return rows


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------

def _write_rows_csv(rows, path: str | Path) -> None:
    rows = list(rows)
    if not rows:
        Path(path).write_text("")
        return
    names = list(asdict(rows[0]).keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=names)
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))


coverage_rows_to_csv = _write_rows_csv
ab_rows_to_csv = _write_rows_csv
smoothing_rows_to_csv = _write_rows_csv


def histogram_to_csv(result: HistogramResult, path: str | Path) -> None:
    """Raw samples in long format: one row per (trial, buyer)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "buyer", "scaled_error", "beta_star"])
        trials, n = result.samples.shape
        for k in range(trials):
            for i in range(n):
                writer.writerow(
                    [k, i, repr(float(result.samples[k, i])), repr(float(result.beta_star[i]))]
                )


def histogram_summary(result: HistogramResult) -> dict:
    return {
        "beta_star": result.beta_star.tolist(),
        "skewness": result.skewness.tolist(),
        "excess_kurtosis": result.excess_kurtosis.tolist(),
        "boundary_mass": result.boundary_mass.tolist(),
        "failures": result.failures,
    }


def config_digest(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, default=str).encode()
    ).hexdigest()


def write_manifest(out_dir: str | Path, config: dict, outputs: list[str]) -> Path:
    """Record the resolved config, its hash, and library versions next to the
    emitted files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": config,
        "config_sha256": config_digest(config),
        "outputs": outputs,
        "versions": {
            "fppe": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "notes": {
            "budget_uniform_support": list(BUDGET_UNIFORM_SUPPORT),
            "budget_rule": "b_i = U_i + 1 for the first ceil(active_fraction*n) buyers, else U_i",
        },
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path
