"""Command-line interface.

Subcommands: solve, infer, abtest, coverage, ab-coverage, clt-hist,
hessian-study. Study commands write CSV/JSON outputs plus a manifest
recording the resolved configuration, its hash, and library versions.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .abtest import ABDesign, decide, run_ab_experiment
from .experiments import (
    ABScenarioConfig,
    HistogramConfig,
    ScenarioConfig,
    SmoothingConfig,
    _write_rows_csv,
    histogram_summary,
    histogram_to_csv,
    run_ab_coverage_study,
    run_clt_histogram,
    run_coverage_study,
    run_smoothing_study,
    write_manifest,
)
from .inference import infer
from .market import load_problem
from .solver import SolverConfig, load_solution, solve_fppe


def _emit(payload: dict, output: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if output:
        Path(output).write_text(text)
    else:
        print(text)


def _load_config(path: str, cls, overrides: dict):
    obj = json.loads(Path(path).read_text()) if path else {}
    obj.update({k: v for k, v in overrides.items() if v is not None})
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(obj) - fields
    if unknown:
        raise SystemExit(f"unknown config keys for {cls.__name__}: {sorted(unknown)}")
    for key, value in list(obj.items()):
        if isinstance(value, list):
            obj[key] = tuple(value)
    return cls(**obj)


def _solution_table(sol, budgets) -> str:
    lines = [
        f"{'buyer':>5} {'budget':>10} {'beta':>10} {'utility':>10} {'leftover':>10}",
    ]
    for i, b in enumerate(budgets):
        lines.append(
            f"{i:>5} {b:>10.6f} {sol.beta[i]:>10.6f} "
            f"{sol.total_utility[i]:>10.6f} {sol.leftover[i]:>10.6f}"
        )
    lines.append(
        f"revenue={sol.revenue:.6f}  nsw={sol.nsw:.6f}  kkt_residual={sol.kkt_residual:.3e}"
    )
    return "\n".join(lines)


def _cmd_solve(args) -> int:
    budgets, batch = load_problem(args.input)
    cfg = SolverConfig(kkt_tolerance=args.kkt_tolerance, tie_tolerance=args.tie_tolerance)
    sol = solve_fppe(batch, budgets, cfg)
    print(_solution_table(sol, budgets))
    _emit(sol.to_json(), args.output)
    return 0


def _cmd_infer(args) -> int:
    budgets, batch = load_problem(args.input)
    sol = load_solution(args.solution) if args.solution else solve_fppe(batch, budgets)
    report = infer(sol, batch, budgets, alpha=args.alpha, d=args.d)
    lo, hi = report.ci_rev
    print(f"revenue={sol.revenue:.6f}  ci=[{lo:.6f}, {hi:.6f}]  alpha={args.alpha}")
    _emit(report.to_json(), args.output)
    return 0


def _cmd_abtest(args) -> int:
    obj = json.loads(Path(args.config).read_text())
    if args.pi is not None:
        obj["pi"] = args.pi
    if args.t is not None:
        obj["horizon"] = args.t
    if args.seed is not None:
        obj["seed"] = args.seed
    obj.setdefault("seed", 0)
    design = ABDesign.from_json(obj)
    result = run_ab_experiment(design, alpha=args.alpha, d=args.d)
    verdict = decide(result.intervals.rev)
    lo, hi = result.intervals.rev
    print(
        f"tau_rev={result.tau_rev:.6f}  ci=[{lo:.6f}, {hi:.6f}]  verdict={verdict}"
    )
    _emit(result.to_json(), args.output)
    return 0


def _study_out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_coverage(args) -> int:
    cfg = _load_config(
        args.config, ScenarioConfig, {"trials": args.trials, "base_seed": args.seed}
    )
    rows = run_coverage_study(cfg, jobs=args.jobs)
    out = _study_out_dir(args)
    _write_rows_csv(rows, out / "coverage.csv")
    write_manifest(out, dataclasses.asdict(cfg), ["coverage.csv"])
    for row in rows:
        print(f"t={row.t} coverage={row.coverage:.2f} failures={row.failures}")
    return 0


def _cmd_ab_coverage(args) -> int:
    cfg = _load_config(
        args.config, ABScenarioConfig, {"trials": args.trials, "base_seed": args.seed}
    )
    rows = run_ab_coverage_study(cfg, jobs=args.jobs)
    out = _study_out_dir(args)
    _write_rows_csv(rows, out / "ab_coverage.csv")
    write_manifest(out, dataclasses.asdict(cfg), ["ab_coverage.csv"])
    for row in rows:
        print(f"t={row.t} pi={row.pi} coverage={row.coverage:.2f} failures={row.failures}")
    return 0


def _cmd_clt_hist(args) -> int:
    cfg = _load_config(
        args.config, HistogramConfig, {"trials": args.trials, "base_seed": args.seed}
    )
    result = run_clt_histogram(cfg, jobs=args.jobs)
    out = _study_out_dir(args)
    histogram_to_csv(result, out / "clt_samples.csv")
    (out / "clt_summary.json").write_text(json.dumps(histogram_summary(result), indent=2))
    write_manifest(out, dataclasses.asdict(cfg), ["clt_samples.csv", "clt_summary.json"])
    print(f"wrote {result.samples.shape[0]}x{result.samples.shape[1]} samples")
    return 0


def _cmd_hessian_study(args) -> int:
    cfg = _load_config(
        args.config, SmoothingConfig, {"trials": args.trials, "base_seed": args.seed}
    )
    rows = run_smoothing_study(cfg)
    out = _study_out_dir(args)
    _write_rows_csv(rows, out / "hessian_study.csv")
    write_manifest(out, dataclasses.asdict(cfg), ["hessian_study.csv"])
    errors = sum(1 for r in rows if r.status != "ok")
    print(f"wrote {len(rows)} rows ({errors} domain errors)")
    return 0


def _add_study_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default="", help="JSON config file")
    p.add_argument("--out-dir", required=True, help="results directory")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="base seed override")
    p.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fppe",
        description="First-price pacing equilibria: solving, inference, A/B testing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one observed market from a problem JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None)
    p.add_argument("--kkt-tolerance", type=float, default=1e-9)
    p.add_argument("--tie-tolerance", type=float, default=1e-7)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("infer", help="confidence sets for one observed market")
    p.add_argument("--input", required=True)
    p.add_argument("--solution", default=None, help="reuse a saved solution JSON")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--d", type=float, default=0.4)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("abtest", help="run one budget-split experiment")
    p.add_argument("--config", required=True, help="experiment design JSON")
    p.add_argument("--pi", type=float, default=None)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--d", type=float, default=0.4)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_abtest)

    p = sub.add_parser("coverage", help="revenue-CI coverage study")
    _add_study_flags(p)
    p.set_defaults(func=_cmd_coverage)

    p = sub.add_parser("ab-coverage", help="treatment-effect CI coverage study")
    _add_study_flags(p)
    p.set_defaults(func=_cmd_ab_coverage)

    p = sub.add_parser("clt-hist", help="scaled multiplier-error histogram data")
    _add_study_flags(p)
    p.set_defaults(func=_cmd_clt_hist)

    p = sub.add_parser("hessian-study", help="smoothing-parameter sweep for the Hessian")
    _add_study_flags(p)
    p.set_defaults(func=_cmd_hessian_study)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
