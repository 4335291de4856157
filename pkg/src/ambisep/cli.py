"""Command-line entry point: ``ambisep {synth,train,separate,evaluate,report}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import glob
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import experiment
from .config import ExperimentConfig, load_config
from .errors import DataError, NumericError
from .synth import SPLITS

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment configuration")
    common.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, help="output directory (overrides the config)")
    common.add_argument("--size-profile", choices=["paper", "desk"])
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="ambisep", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("synth", parents=[common], help="generate the mixture dataset")

    t = sub.add_parser("train", parents=[common], help="train one model variant")
    t.add_argument("--variant", required=True, choices=["M1", "M1+", "M2", "M2+"])
    t.add_argument("--manifest", type=Path)
    t.add_argument("--resume", action="store_true", help="continue from the last epoch-boundary state")

    s = sub.add_parser("separate", parents=[common], help="write foreground/background estimates")
    group = s.add_mutually_exclusive_group(required=True)
    group.add_argument("--checkpoint", type=Path)
    group.add_argument("--oracle", action="store_true", help="use the ideal ratio mask")
    s.add_argument("--split", required=True, choices=SPLITS)
    s.add_argument("--manifest", type=Path)
    s.add_argument("--estimates", type=Path, help="output directory for estimate WAVs")
    s.add_argument("--dump-masks", action="store_true")

    e = sub.add_parser("evaluate", parents=[common], help="score estimates with BSS-eval")
    e.add_argument("--split", required=True, choices=SPLITS)
    e.add_argument("--variant", required=True, help="tag written to the CSV (M1..M2+ or IRM)")
    e.add_argument("--estimates", type=Path)
    e.add_argument("--manifest", type=Path)
    e.add_argument("--filter-len", type=int)
    e.add_argument("--csv", type=Path, help="output CSV path")

    r = sub.add_parser("report", parents=[common], help="aggregate per-scene CSVs")
    r.add_argument("csvs", nargs="*", type=Path, help="per-scene CSVs (default: <out>/metrics/*.csv)")
    return p


def _config(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = load_config(args.config, seed=args.seed)
    elif args.seed is not None:
        cfg = ExperimentConfig(seed=args.seed)
    else:
        raise UsageError("a master seed is required: pass --seed or --config")
    if args.out is not None:
        cfg.out = args.out
    if args.size_profile is not None:
        cfg.train = replace(cfg.train, profile=args.size_profile)
    return cfg


def _run(args) -> None:
    cfg = _config(args)
    if args.command == "synth":
        manifest = experiment.run_synth(cfg)
        for split, n in manifest.counts().items():
            print(f"{split}: {n} scenes")
        print(f"manifest: {manifest.path}")
    elif args.command == "train":
        result = experiment.run_train(cfg, args.variant, args.manifest, resume=args.resume)
        print(f"{args.variant}: best epoch {result.best_epoch}, val loss {result.best_val:.6g}")
        print(f"checkpoint: {cfg.checkpoint_path(args.variant)}")
    elif args.command == "separate":
        out = experiment.run_separate(cfg, args.split, checkpoint=args.checkpoint, oracle=args.oracle,
                                      manifest_path=args.manifest, out_dir=args.estimates,
                                      dump_masks=args.dump_masks)
        print(f"estimates: {out}")
    elif args.command == "evaluate":
        if args.filter_len is not None and args.filter_len < 1:
            raise UsageError("--filter-len must be >= 1")
        rows = experiment.run_evaluate(cfg, args.split, args.variant, args.estimates, args.manifest,
                                       args.filter_len, args.csv)
        flagged = sum(r["status"] != "ok" for r in rows)
        print(f"scored {len(rows) - flagged} of {len(rows)} scenes ({flagged} flagged)")
    elif args.command == "report":
        csvs = args.csvs or [Path(p) for p in glob.glob(str(cfg.out / "metrics" / "*.csv"))]
        if not csvs:
            raise DataError(f"no per-scene CSVs found under {cfg.out / 'metrics'}")
        summary = experiment.run_report(csvs, cfg.out)
        print(summary.to_text(), end="")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except UsageError as exc:
        print(f"ambisep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"ambisep: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as exc:
        print(f"ambisep: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"ambisep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
