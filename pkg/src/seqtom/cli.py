"""Command-line entry point: ``seqtom run --scenario {frequency|process} ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import ConfigError, defaults_for, parse_config
from .harness import run_experiment, write_metrics_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="seqtom", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run a Monte-Carlo estimation experiment")
    run.add_argument("--scenario", choices=("frequency", "process"), required=True)
    run.add_argument("--config", metavar="FILE", help="TOML config file")
    run.add_argument("--runs", type=int, metavar="N")
    run.add_argument("--measurements", type=int, metavar="N")
    run.add_argument("--delta-p", type=float, metavar="X")
    run.add_argument("--tau-frac", type=float, metavar="X")
    run.add_argument("--seed", type=int, metavar="U64")
    run.add_argument("--out", metavar="FILE", help="aggregated CSV (default: stdout)")
    run.add_argument("--dump-posteriors", type=int, metavar="EVERY_K",
                     help="write run 0's posterior every K steps")
    run.add_argument("--posteriors-out", metavar="FILE",
                     help="posterior snapshot file (default: <out>.posteriors.csv)")
    run.add_argument("--dump-trajectory", metavar="FILE", help="write run 0's measurement record")
    run.add_argument("--threads", type=int, metavar="N",
                     help="worker processes (default: $SEQTOM_THREADS or 1)")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def _load_config(args):
    if args.config:
        with open(args.config, "rb") as fh:
            cfg = parse_config(fh.read(), scenario=args.scenario)
    else:
        cfg = defaults_for(args.scenario)
    changes = {}
    for attr, value in (("n_runs", args.runs), ("n_measurements", args.measurements),
                        ("delta_p", args.delta_p), ("tau_fraction", args.tau_frac),
                        ("master_seed", args.seed), ("out_path", args.out),
                        ("trajectory_path", args.dump_trajectory)):
        if value is not None:
            changes[attr] = value
    if args.dump_posteriors is not None:
        changes["dump_every"] = args.dump_posteriors
    if args.posteriors_out is not None:
        changes["posteriors_path"] = args.posteriors_out
    cfg = cfg.replace(**changes)
    if cfg.dump_every and not cfg.posteriors_path:
        if not cfg.out_path:
            raise ConfigError("--dump-posteriors: needs --out or --posteriors-out to name the file")
        stem = cfg.out_path[:-4] if cfg.out_path.endswith(".csv") else cfg.out_path
        cfg = cfg.replace(posteriors_path=stem + ".posteriors.csv")
    return cfg


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("SEQTOM_THREADS", "1")
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"SEQTOM_THREADS: expected an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError(f"--threads: must be at least 1, got {n}")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args)
        workers = _threads(args)
    except (ConfigError, OSError) as exc:
        print(f"seqtom: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_experiment(cfg, workers=workers)
        if not cfg.out_path:
            write_metrics_csv(sys.stdout, result.aggregate)
    except Exception as exc:  # noqa: BLE001 - any failure past config is a runtime error
        print(f"seqtom: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps(result.summary(), indent=2), file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
