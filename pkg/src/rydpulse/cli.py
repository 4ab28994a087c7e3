"""Command-line interface: ``rydpulse run|resume|evaluate|plot|noise-dump``."""

from __future__ import annotations

import argparse
import logging
import sys

from rydpulse import runner
from rydpulse.config import ConfigError
from rydpulse.plotting import PlotError, plot_front


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rydpulse", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment in a config file")
    run.add_argument("config")
    run.add_argument("-o", "--output-dir", help="override run.output_dir")
    run.add_argument("--stop-after", type=int, help="stop (with checkpoint) after this generation")

    res = sub.add_parser("resume", help="continue from a checkpoint")
    res.add_argument("checkpoint")
    res.add_argument("--config", help="refuse to resume unless this config matches")

    ev = sub.add_parser("evaluate", help="Monte Carlo estimate of F and G for given genomes")
    ev.add_argument("config")
    ev.add_argument("--genome", help="file with one genome per line (phases [, T])")
    ev.add_argument("-o", "--output", help="output CSV (default: <output_dir>/evaluations.csv)")

    pl = sub.add_parser("plot", help="overlay front CSV files as an SVG")
    pl.add_argument("fronts", nargs="+")
    pl.add_argument("-o", "--output", required=True)
    pl.add_argument("--label", action="append", help="legend label per front (repeatable)")

    nd = sub.add_parser("noise-dump", help="write one noise realization as CSV")
    nd.add_argument("config")
    nd.add_argument("-o", "--output", required=True)
    nd.add_argument("--duration", type=float, default=10.0)
    nd.add_argument("--dt", type=float, default=1.0 / 512)
    nd.add_argument("--realization", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            outcome = runner.run_experiment(args.config, args.output_dir, args.stop_after)
            state = "finished" if outcome.completed else f"stopped at generation {outcome.generation}"
            print(f"{state}; results in {outcome.output_dir}")
        elif args.command == "resume":
            outcome = runner.resume(args.checkpoint, args.config)
            print(f"finished; results in {outcome.output_dir}")
        elif args.command == "evaluate":
            print(runner.evaluate_genomes(args.config, args.genome, args.output))
        elif args.command == "plot":
            if args.label and len(args.label) != len(args.fronts):
                raise PlotError("give one --label per front file")
            print(plot_front(args.fronts, args.output, args.label))
        elif args.command == "noise-dump":
            print(runner.noise_dump(args.config, args.output, args.duration, args.dt, args.realization))
    except (ConfigError, PlotError, runner.CheckpointMismatchError, FileNotFoundError, ValueError) as exc:
        print(f"rydpulse: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
