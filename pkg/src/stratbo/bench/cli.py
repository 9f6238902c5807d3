"""Benchmark runner for stratified Bayesian optimization and its baselines.

Subcommands: run, sweep, plot.

Exit codes: 0 when every replication succeeded, 1 when any failed, 2 for an
invalid config or arguments.
"""
import argparse
import logging
import os
import sys

from .config import ConfigError, ExperimentConfig
from .experiment import read_csv, run_experiment, run_sweep, summarize


def _load(args):
    cfg = ExperimentConfig.load(args.config)
    d = cfg.to_dict()
    if args.seed is not None:
        d["seed"] = args.seed
    if args.output is not None:
        d["output"] = args.output
    if args.replications is not None:
        d["replications"] = args.replications
    if args.no_timing:
        d["timing"] = False
    return ExperimentConfig.from_dict(d)


def cmd_run(args):
    cfg = _load(args)
    res = run_experiment(cfg, jobs=args.jobs, plots=not args.no_plots)
    print(f"wrote {res.csv_path}")
    for p in res.plots:
        print(f"wrote {p}")
    for c in summarize(res.rows):
        if c.iteration == max(x.iteration for x in summarize(res.rows) if x.algorithm == c.algorithm):
            print(f"{c.algorithm}: final mean G = {c.mean:.6g} +- {c.half_width:.3g} over {c.count} runs")
    for algo, rep, err in res.failures:
        print(f"FAILED {algo} replication {rep}: {err.splitlines()[0]}", file=sys.stderr)
    return 0 if res.ok else 1


def cmd_sweep(args):
    cfg = _load(args)
    if not cfg.sweep:
        raise ConfigError("the sweep subcommand needs a 'sweep' section in the config")
    summary, failures, path, images = run_sweep(cfg, jobs=args.jobs, plots=not args.no_plots)
    print(f"wrote {path}")
    for p in images:
        print(f"wrote {p}")
    for s in summary:
        print(f"A={s['A_ratio']:g} log_beta={s['log_beta']:g}: normalized difference "
              f"{s['mean_norm_diff']:.4g} [{s['ci_low']:.4g}, {s['ci_high']:.4g}] n={s['count']}")
    for algo, rep, err in failures:
        print(f"FAILED {algo} replication {rep}: {err.splitlines()[0]}", file=sys.stderr)
    return 0 if not failures else 1


def cmd_plot(args):
    from .plotting import plot_curves
    rows = read_csv(args.metrics)
    out = args.output or os.path.splitext(args.metrics)[0] + ".png"
    plot_curves(summarize(rows), out, title=args.title or "")
    print(f"wrote {out}")
    return 0 if all(r.status == "ok" for r in rows) else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="stratbo-bench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (("run", cmd_run, "replicated runs of each algorithm on one problem"),
                               ("sweep", cmd_sweep, "run the Cartesian grid of the config's sweep section")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="experiment config (JSON)")
        p.add_argument("-o", "--output", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("-R", "--replications", type=int, help="replication count (overrides the config)")
        p.add_argument("-j", "--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--no-timing", action="store_true",
                       help="leave wall_ms empty so reruns produce byte-identical CSVs")
        p.add_argument("--no-plots", action="store_true")
        p.set_defaults(func=fn)
    p = sub.add_parser("plot", help="render mean curves from a metrics CSV")
    p.add_argument("metrics")
    p.add_argument("-o", "--output", help="image path (default: next to the CSV)")
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
