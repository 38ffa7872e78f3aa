"""Command line: ``hybridlearn <subcommand> [options]``.

Exit status is 0 on success, 1 for usage or configuration errors and 2 for
failures while running a stage.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import dataset, evalkit, testgen
from . import pipeline as pl
from .config import ConfigError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config file (default: the shipped desk config)")
    common.add_argument("--seed", type=_u64, help="master seed, overrides the config")
    common.add_argument("--workers", type=_positive, default=1, help="worker processes within a stage")
    common.add_argument("--out", default="out", help="output directory")

    p = _Parser(prog="hybridlearn", description="Learn, test and model a platooning plant.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("learn", parents=[common], help="learn a Mealy model of the plant")

    g = sub.add_parser("generate", parents=[common], help="generate a test suite")
    g.add_argument("--strategy", choices=testgen.STRATEGIES)
    g.add_argument("--n-train", type=_positive)
    g.add_argument("--model", help="hypothesis file from 'learn'")
    g.add_argument("--validation", action="store_true",
                   help="generate the output-directed validation suite instead")
    g.add_argument("--exclude", nargs="*", default=[], help="suites whose tests the validation suite must avoid")

    r = sub.add_parser("run-suite", parents=[common], help="execute a suite and build its dataset")
    r.add_argument("--suite", required=True)
    r.add_argument("--name", default="dataset", help="file stem for outputs")

    t = sub.add_parser("train-eval", parents=[common], help="train models and score them")
    t.add_argument("--train", required=True, help="training dataset CSV")
    t.add_argument("--val", required=True, help="validation dataset CSV")
    t.add_argument("--strategy", default="custom", help="label used in result files")
    t.add_argument("--n-train", type=_positive)

    sub.add_parser("pipeline", parents=[common], help="run every stage")

    rp = sub.add_parser("report", parents=[common], help="aggregate result CSVs")
    rp.add_argument("results", nargs="*", help="result CSVs (default: OUT/results.csv)")
    return p


def _config(args) -> pl.PipelineConfig:
    if args.config is not None and not os.path.exists(args.config):
        raise ConfigError(f"config file not found: {args.config}")
    return pl.PipelineConfig.from_file(args.config).with_seed(args.seed)


def cmd_learn(args) -> None:
    cfg = _config(args)
    hyp, log = pl.stage_learn(cfg, args.out)
    print(f"{hyp.n_states} states, {len(log.rounds)} rounds, {log.total_tests} tests -> {args.out}")


def cmd_generate(args) -> None:
    cfg = _config(args)
    model = None
    if args.model is not None:
        if not os.path.exists(args.model):
            raise ConfigError(f"model file not found: {args.model}")
        model = pl.load_model(args.model)
    os.makedirs(args.out, exist_ok=True)
    if args.validation:
        if model is None:
            raise UsageError("--validation needs --model")
        exclude = [t for path in args.exclude for t in testgen.read_suite(path)]
        suite, seed, dropped = pl.generate_validation(cfg, model, exclude)
        path = os.path.join(args.out, "suite_validation.txt")
        pl.write_suite_with_manifest(path, suite, strategy="output-directed", seed=seed,
                                     n_train=cfg.validation_size, tests=len(suite), dropped_overlap=dropped)
    else:
        if args.strategy is None or args.n_train is None:
            raise UsageError("generate needs --strategy and --n-train")
        suite, seed = pl.generate_suite(cfg, args.strategy, args.n_train, model)
        path = os.path.join(args.out, pl.suite_name(args.strategy, args.n_train))
        pl.write_suite_with_manifest(path, suite, strategy=args.strategy, seed=seed,
                                     n_train=args.n_train, tests=len(suite))
    print(f"{len(suite)} tests -> {path}")


def cmd_run_suite(args) -> None:
    cfg = _config(args)
    if not os.path.exists(args.suite):
        raise ConfigError(f"suite file not found: {args.suite}")
    suite = testgen.read_suite(args.suite)
    pairs, skipped = pl.run_suite(cfg, suite, args.out, args.name, args.workers)
    print(f"{len(pairs)} pairs ({skipped} skipped) -> {os.path.join(args.out, args.name + '.csv')}")


def cmd_train_eval(args) -> None:
    cfg = _config(args)
    for path in (args.train, args.val):
        if not os.path.exists(path):
            raise ConfigError(f"dataset file not found: {path}")
    train_pairs = dataset.read_dataset(args.train)
    val_pairs = dataset.read_dataset(args.val)
    results, cdf, summary = pl.train_eval(cfg, train_pairs, val_pairs, args.out,
                                          args.strategy, args.n_train, args.workers)
    evalkit.write_results(os.path.join(args.out, "results.csv"), results)
    evalkit.write_cdf(os.path.join(args.out, "cdf.csv"), cdf)
    pl.write_summary(os.path.join(args.out, "summary.csv"), summary)
    print(pl.format_table(pl.SUMMARY_HEADER, summary))


def cmd_pipeline(args) -> None:
    cfg = _config(args)
    table = pl.run_pipeline(cfg, args.out, args.workers)
    print(pl.format_table(pl.REPORT_HEADER, table))


def cmd_report(args) -> None:
    paths = args.results or [os.path.join(args.out, "results.csv")]
    rows = []
    for path in paths:
        if not os.path.exists(path):
            raise ConfigError(f"results file not found: {path}")
        rows += evalkit.read_results(path)
    table = pl.report(rows)
    os.makedirs(args.out, exist_ok=True)
    out = os.path.join(args.out, "report.csv")
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(",".join(pl.REPORT_HEADER) + "\n")
        for r in table:
            fh.write(",".join(map(str, r)) + "\n")
    print(pl.format_table(pl.REPORT_HEADER, table))


COMMANDS = {
    "learn": cmd_learn, "generate": cmd_generate, "run-suite": cmd_run_suite,
    "train-eval": cmd_train_eval, "pipeline": cmd_pipeline, "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except (ConfigError, UsageError) as exc:
        print(f"hybridlearn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"hybridlearn: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
