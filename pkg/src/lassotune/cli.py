"""Command-line entry point.

Subcommands: ``simulate`` (scenario sweep), ``example1``, ``example2``,
``riskexp`` (oracle risk-estimation experiment), and ``summarize``.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import harness
from .errors import LassotuneError


def _add_common(sub, replications=True):
    sub.add_argument("--config", default=None, help="flat key = value config file")
    sub.add_argument("--out", default=".", help="output directory")
    sub.add_argument("--workers", type=int, default=None, help="parallel worker count")
    sub.add_argument("--seed", type=int, default=None, help="base seed")
    if replications:
        sub.add_argument("--replications", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lassotune",
        description="Lasso tuning-parameter selection experiments",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="run a scenario sweep over the method registry")
    _add_common(sim)
    sim.add_argument("--methods", default=None, help="comma-separated method ids")
    sim.add_argument(
        "--no-timings",
        action="store_true",
        help="emit runtime_ms as 0 so repeated runs produce byte-identical files",
    )
    sim.add_argument("--plot-data", action="store_true", help="also write long-format plot CSV")

    ex1 = subs.add_parser("example1", help="criterion traces on the rank-one toy dataset")
    ex1.add_argument("--out", default=".")

    ex2 = subs.add_parser("example2", help="risk criteria on the n=30, p=150 scenario")
    _add_common(ex2)

    risk = subs.add_parser("riskexp", help="oracle-OLS risk estimation experiment")
    _add_common(risk)

    summ = subs.add_parser("summarize", help="summarize a records CSV")
    summ.add_argument("records", help="records CSV produced by `simulate`")
    summ.add_argument("--out", default=".")
    return parser


def _spec_from_args(args, methods=None) -> harness.SweepSpec:
    return harness.sweep_spec_from_config(
        args.config,
        methods=methods,
        replications=args.replications,
        base_seed=args.seed,
        workers=args.workers,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except LassotuneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    os.makedirs(args.out, exist_ok=True)

    if args.command == "simulate":
        methods = tuple(args.methods.split(",")) if args.methods else None
        spec = _spec_from_args(args, methods=methods)
        rows = harness.run_sweep(spec, timings=not args.no_timings)
        path = os.path.join(args.out, "records.csv")
        harness.write_csv(rows, harness.RECORDS_HEADER, path)
        print(f"wrote {len(rows)} rows to {path}")
        if args.plot_data:
            plot_path = os.path.join(args.out, "plot_data.csv")
            harness.write_plot_csv(rows, plot_path)
            print(f"wrote {plot_path}")
        return 0

    if args.command == "example1":
        rows = harness.run_example1()
        path = os.path.join(args.out, "example1.csv")
        harness.write_csv(rows, "model,sigma,lambda,train_err,df,aic,bic,gcv", path)
        argmins = harness.example1_argmins(rows)
        for (model, sigma, crit), lam in sorted(argmins.items()):
            print(f"{model} sigma={sigma:g} {crit}: argmin lambda = {lam:g}")
        print(f"wrote {path}")
        return 0

    if args.command == "example2":
        reps = args.replications if args.replications is not None else 100
        seed = args.seed if args.seed is not None else 0
        workers = args.workers if args.workers is not None else 1
        rows, summary = harness.run_example2(reps, seed, workers=workers)
        rows_path = os.path.join(args.out, "example2_records.csv")
        harness.write_csv(
            rows, "sigma,replication,method,lambda,at_grid_min,pred_risk", rows_path
        )
        summary_path = os.path.join(args.out, "example2_summary.csv")
        harness.write_csv(
            summary,
            "sigma,method,median_lambda,frac_at_grid_min,median_pred_risk",
            summary_path,
        )
        print(f"wrote {rows_path} and {summary_path}")
        return 0

    if args.command == "riskexp":
        spec = _spec_from_args(args)
        rows, mse = harness.run_risk_experiment(spec)
        rows_path = os.path.join(args.out, "risk_records.csv")
        harness.write_csv(rows, harness.RISK_HEADER, rows_path)
        mse_path = os.path.join(args.out, "risk_mse.csv")
        harness.write_csv(
            mse, "snr,alpha,p,rho," + ",".join(harness.RISK_ESTIMATOR_IDS), mse_path
        )
        print(f"wrote {rows_path} and {mse_path}")
        return 0

    if args.command == "summarize":
        summary = harness.summarize(args.records)
        path = os.path.join(args.out, "summary.csv")
        harness.write_csv(summary, harness.SUMMARY_HEADER, path)
        print(f"wrote {len(summary)} rows to {path}")
        return 0

    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    raise SystemExit(main())
