"""Command line entry point: ``survbench <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from . import bench
from .core import SeededRng, dataset_split, read_dataset_csv, write_dataset_csv
from .impute import make_imputer
from .metrics import write_km_csv
from .missingness import ampute_mcar, ampute_self_masking
from .simulate import SimConfig, generate_dataset, load_sim_config


def _cmd_simulate(args):
    if args.config:
        cfg = load_sim_config(args.config, n=args.n, seed=args.seed)
    else:
        cfg = SimConfig(**{k: v for k, v in (("n", args.n), ("seed", args.seed)) if v is not None})
    write_dataset_csv(generate_dataset(cfg), args.out)
    return 0


def _cmd_ampute(args):
    ds = read_dataset_csv(args.inp)
    if args.mechanism == "mcar":
        if args.p is None:
            raise SystemExit("--p is required for mcar")
        out = ampute_mcar(ds, args.p, SeededRng(args.seed, SeededRng.AMPUTATION))
    else:
        if args.tau is None:
            raise SystemExit("--tau is required for selfmask")
        out = ampute_self_masking(ds, args.tau)
    write_dataset_csv(out, args.out)
    return 0


def _cmd_impute(args):
    ds = read_dataset_csv(args.inp)
    if args.train_rows:
        rows = np.loadtxt(args.train_rows, dtype=int, ndmin=1)
    else:
        rows = np.arange(ds.n)
    kwargs = {}
    if args.strategy == "knn":
        kwargs = {"k": args.k, "standardize": not args.no_standardize}
    imp = make_imputer(args.strategy, **kwargs).fit(dataset_split(ds, rows))
    write_dataset_csv(imp.transform(ds), args.out)
    return 0


def _cmd_run(args):
    cfg = bench.load_bench_config(args.config, seed=args.seed) if args.config else bench.BenchConfig()
    if args.seed is not None and not args.config:
        cfg = replace(cfg, seed=args.seed)
    if args.timing:
        cfg = replace(cfg, record_timing=True)
    results = bench.run_grid(cfg, workers=args.workers)
    bench.write_results_csv(results, args.out)
    return _exit_code(bench.summarize(results))


def _exit_code(summary):
    return 1 if any(row["n_ok"] == 0 for row in summary) else 0


def _cmd_report(args):
    if args.km:
        ds = read_dataset_csv(args.inp)
        write_km_csv(args.out, ds, by_group=args.by_group)
        return 0
    summary = bench.summarize(bench.read_results_csv(args.inp))
    bench.write_summary_csv(summary, args.out)
    if args.plot_data:
        bench.write_plot_data_csv(summary, args.plot_data)
    return _exit_code(summary)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="survbench", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a complete censored dataset")
    s.add_argument("--n", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--config", help="key=value simulation config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("ampute", help="introduce MCAR or self-masking missingness")
    s.add_argument("--mechanism", choices=("mcar", "selfmask"), required=True)
    s.add_argument("--p", type=float)
    s.add_argument("--tau", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_ampute)

    s = sub.add_parser("impute", help="fit an imputer on training rows and fill a dataset")
    s.add_argument("--strategy", choices=("median", "knn", "iterative"), required=True)
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--no-standardize", action="store_true", help="raw-scale KNN distances")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--train-rows", help="file with one training row index per line")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_impute)

    s = sub.add_parser("run", help="run the cross-validated benchmark grid")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--seed", type=int)
    s.add_argument("--timing", action="store_true", help="record wall-clock fit_seconds")
    s.set_defaults(func=_cmd_run)

    s = sub.add_parser("report", help="summarise results or emit Kaplan-Meier curves")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--plot-data")
    s.add_argument("--km", action="store_true")
    s.add_argument("--by-group", action="store_true")
    s.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
