"""Command-line entry point.

Subcommands: ``epsilon-sweep``, ``gamma-sweep``, ``energy-audit``,
``rate-fit``.  Exit codes: 0 success, 2 hypothesis violation, 3 solver
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import (
    DenominatorNotPositive,
    FrictionLabError,
    HypothesisHViolated,
    NonPositiveData,
)
from .harness import (
    ExperimentConfig,
    apply_overrides,
    emit,
    energy_audit,
    fit_rate,
    parse_config_file,
    parse_rows,
    run_epsilon_sweep,
    run_gamma_sweep,
)
from .snapshots import _atomic_write

EXIT_OK = 0
EXIT_HYPOTHESIS = 2
EXIT_SOLVER = 3


def _load_config(args) -> ExperimentConfig:
    config = parse_config_file(args.config) if args.config else ExperimentConfig()
    config = apply_overrides(config, args.override)
    if args.out:
        config.out_dir = args.out
    if args.threads:
        config.threads = args.threads
    return config.validate()


def _add_common(sub):
    sub.add_argument("--config", help="key = value configuration file")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--threads", type=int, default=0, help="worker pool size")
    sub.add_argument(
        "--override", action="append", default=[], metavar="KEY=VALUE",
        help="override one config entry (repeatable)",
    )


def _cmd_sweep(args, runner, kind: str) -> int:
    config = _load_config(args)
    rows, manifest, results = runner(config)
    paths = emit(rows, manifest, config.out_dir, results=results)
    print(f"{kind}: {len(rows)} rows -> {config.out_dir}")
    if manifest.fitted_rate:
        fr = manifest.fitted_rate
        print(f"fitted rate: slope={fr['slope']:.4f} r2={fr['r_squared']:.4f}")
    for b in manifest.bound_reports:
        if "satisfied" in b:
            print(f"bound[{b['kind']}] param={b['param']}: lhs={b['lhs']:.4e} "
                  f"rhs={b['rhs']:.4e} satisfied={b['satisfied']}")
    if manifest.failures:
        for fail in manifest.failures:
            print(f"FAILED param={fail['param']}: {fail['error']}", file=sys.stderr)
        return EXIT_SOLVER
    del paths
    return EXIT_OK


def _cmd_energy_audit(args) -> int:
    config = _load_config(args)
    out = energy_audit(config, epsilon=args.epsilon, refine=args.refine)
    os.makedirs(config.out_dir, exist_ok=True)
    base = out["base"]
    lines = ["t,residual"]
    for t, r in zip(base["times"], base["residuals"]):
        lines.append(f"{float(t)!r},{float(r)!r}")
    _atomic_write(os.path.join(config.out_dir, "audit.csv"), "\n".join(lines) + "\n")
    summary = {
        "epsilon": out["epsilon"],
        "base": {k: base[k] for k in ("nx", "nv", "dt", "sup_residual", "beta_D1_0", "final_mass")},
    }
    if "refined" in out:
        fine = out["refined"]
        summary["refined"] = {
            k: fine[k] for k in ("nx", "nv", "dt", "sup_residual", "beta_D1_0", "final_mass")
        }
        summary["ratio"] = out["ratio"]
    _atomic_write(
        os.path.join(config.out_dir, "audit.json"),
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
    )
    tol = 0.02 * base["beta_D1_0"]
    print(f"energy audit: sup|r| = {base['sup_residual']:.4e} (tolerance {tol:.4e})")
    if "ratio" in summary:
        print(f"refinement ratio: {summary['ratio']:.2f}")
    return EXIT_OK


def _cmd_rate_fit(args) -> int:
    rows = parse_rows(args.rows)
    slope, intercept, r2 = fit_rate(rows, args.x_field, args.y_field)
    print(json.dumps({
        "x": args.x_field, "y": args.y_field,
        "slope": slope, "intercept": intercept, "r_squared": r2,
    }, indent=2, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="frictionlab",
        description="Large-friction limit experiments for kinetic swarming models",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub_eps = subs.add_parser("epsilon-sweep", help="kinetic vs aggregation over epsilon")
    _add_common(sub_eps)
    sub_gam = subs.add_parser("gamma-sweep", help="damped Euler vs aggregation over gamma")
    _add_common(sub_gam)
    sub_aud = subs.add_parser("energy-audit", help="fine-step energy identity residual")
    _add_common(sub_aud)
    sub_aud.add_argument("--epsilon", type=float, default=0.1)
    sub_aud.add_argument("--refine", action="store_true", help="add a halved-resolution run")
    sub_fit = subs.add_parser("rate-fit", help="log-log rate fit over an emitted rows.csv")
    sub_fit.add_argument("--rows", required=True, help="path to rows.csv")
    sub_fit.add_argument("--x-field", default="param")
    sub_fit.add_argument("--y-field", default="int_w2sq")

    args = parser.parse_args(argv)
    try:
        if args.command == "epsilon-sweep":
            return _cmd_sweep(args, run_epsilon_sweep, "epsilon-sweep")
        if args.command == "gamma-sweep":
            return _cmd_sweep(args, run_gamma_sweep, "gamma-sweep")
        if args.command == "energy-audit":
            return _cmd_energy_audit(args)
        if args.command == "rate-fit":
            return _cmd_rate_fit(args)
        parser.error(f"unknown command {args.command!r}")
    except (HypothesisHViolated, DenominatorNotPositive) as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except NonPositiveData as exc:
        print(f"invalid data for fit: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FrictionLabError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
