"""Command-line front end.

Subcommands mirror the pipeline phases so trained checkpoints can be cached
between attack runs::

    idsadv synth-data --preset botiot-mini --out data.csv --seed 7
    idsadv train     --config exp.json
    idsadv attack    --config exp.json
    idsadv evaluate  --config exp.json
    idsadv report    --config exp.json --stdout
    idsadv run-all   --config exp.json --set train.epochs=5

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric divergence.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

from . import dataio, experiment
from .errors import ConfigError, DataError, DivergenceDetected, IdsAdvError

logger = logging.getLogger("idsadv")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p, config_required=True):
    p.add_argument("--config", required=config_required, metavar="PATH",
                   help="experiment config (JSON)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (dotted path, JSON value); repeatable")
    p.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
    p.add_argument("--threads", type=int, help="max parallel (regime, variant, seed) cells")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides out_dir)")
    p.add_argument("--stdout", action="store_true", help="also print results to standard output")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("-q", "--quiet", action="store_true")


def build_parser():
    parser = _Parser(prog="idsadv", description="FNN/SNN intrusion detection under "
                                                 "FGSM, BIM and PGD evasion attacks")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in (
        ("train", "train FNN/SNN models and save checkpoints"),
        ("attack", "craft adversarial test sets from saved checkpoints"),
        ("evaluate", "score checkpoints on clean and adversarial test sets"),
        ("run-all", "train, attack, evaluate and report in one go"),
        ("report", "emit figure tables and the FNN/SNN comparison from report.json"),
    ):
        p = sub.add_parser(name, help=help_text)
        _common(p)
        if name == "report":
            p.add_argument("--format", choices=("json", "csv-grid", "plot-data", "all"),
                           default="all")
    p = sub.add_parser("synth-data", help="write a synthetic BoT-IoT-style CSV")
    _common(p, config_required=False)
    p.add_argument("--preset", choices=dataio.PRESETS, help="built-in synthetic spec")
    return parser


def _setup_logging(args):
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose else logging.INFO)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)


def load_config(args):
    """Config file, then flag overrides, then --set overrides (later wins)."""
    try:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {args.config} is not valid JSON: {exc}") from None
    flags = []
    if args.seed is not None:
        flags.append(f"seeds=[{args.seed}]")
    if args.threads is not None:
        flags.append(f"threads={args.threads}")
    if args.out is not None:
        flags.append(f"out_dir={json.dumps(args.out)}")
    return experiment.ExperimentConfig.from_dict(
        experiment.apply_overrides(doc, flags + list(args.overrides)))


def _print(obj):
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_synth_data(args):
    if args.out is None:
        raise UsageError("synth-data needs --out FILE")
    if (args.preset is None) == (args.config is None):
        raise UsageError("synth-data needs exactly one of --preset or --config")
    spec = (dataio.load_preset(args.preset) if args.preset
            else dataio.load_spec_file(args.config))
    if args.overrides:
        spec = dataio.SyntheticSpec.from_dict(
            experiment.apply_overrides(spec.to_dict(), args.overrides))
    if args.seed is not None:
        spec.seed = args.seed
        spec.validate()
    ds = dataio.generate_synthetic(spec)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    dataio.write_csv(ds, args.out)
    logger.info("wrote %d rows to %s", ds.n, args.out)
    if args.stdout:
        _print(ds.fingerprint())


def cmd_train(args):
    cfg = load_config(args)
    paths = experiment.run_train(cfg, cfg.out_dir)
    logger.info("saved %d checkpoints under %s", len(paths), cfg.out_dir)
    if args.stdout:
        _print([str(p) for p in paths])


def cmd_attack(args):
    cfg = load_config(args)
    experiment.run_attacks(cfg, cfg.out_dir)
    logger.info("adversarial sets written under %s/adversarial", cfg.out_dir)


def cmd_evaluate(args):
    cfg = load_config(args)
    report = experiment.run_evaluate(cfg, cfg.out_dir)
    logger.info("report written to %s/report.json", cfg.out_dir)
    if args.stdout:
        _print(experiment.compare(report))


def cmd_run_all(args):
    cfg = load_config(args)
    report = experiment.run(cfg, out_dir=cfg.out_dir)
    logger.info("report written to %s/report.json", cfg.out_dir)
    if args.stdout:
        _print(experiment.compare(report))


def cmd_report(args):
    cfg = load_config(args)
    path = Path(cfg.out_dir) / "report.json"
    if not path.exists():
        raise UsageError(f"{path} not found; run evaluate or run-all first")
    report = experiment.ExperimentReport.load(path)
    formats = ("json", "csv-grid", "plot-data") if args.format == "all" else (args.format,)
    for fmt in formats:
        for p in experiment.emit(report, fmt, cfg.out_dir):
            logger.info("wrote %s", p)
    summary = experiment.compare(report)
    with open(Path(cfg.out_dir) / "comparison.json", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if args.stdout:
        _print(summary)


COMMANDS = {
    "synth-data": cmd_synth_data,
    "train": cmd_train,
    "attack": cmd_attack,
    "evaluate": cmd_evaluate,
    "run-all": cmd_run_all,
    "report": cmd_report,
}


def _fail(kind, message, code):
    line = json.dumps({"level": "error", "type": kind, "message": str(message),
                       "exit_code": code})
    sys.stderr.write(line + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("UsageError", exc, EXIT_USAGE)
    _setup_logging(args)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("UsageError", exc, EXIT_USAGE)
    except ConfigError as exc:
        return _fail(type(exc).__name__, exc, EXIT_USAGE)
    except DivergenceDetected as exc:
        return _fail(type(exc).__name__, exc, EXIT_DIVERGED)
    except DataError as exc:
        return _fail(type(exc).__name__, exc, EXIT_DATA)
    except IdsAdvError as exc:
        return _fail(type(exc).__name__, exc, EXIT_DATA)
    except OSError as exc:
        return _fail(type(exc).__name__, exc, EXIT_DATA)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
