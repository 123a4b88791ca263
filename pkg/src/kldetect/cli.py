"""Command-line entry point: ``kldetect {run,grid,select,explain,report,verify,fixture}``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

from . import errors
from .errors import DataError, KLDetectError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DATA = 2
EXIT_NOT_CONVERGED = 3

# which module raises each error, for "error[module.Name]" messages
_ERROR_MODULES = {
    "MissingLabelColumn": "flowdata", "MalformedRow": "flowdata", "EmptyFile": "flowdata",
    "EmptyTable": "flowdata", "DimensionMismatch": "flowdata", "SchemaMismatch": "explain",
    "InsufficientRows": "resample", "MinorityTooSmall": "resample", "SingleClass": "featsel",
    "IndexOutOfRange": "featsel", "LengthMismatch": "evaluate", "SingleClassLabels": "evaluate",
    "FoldTooSmall": "evaluate", "DegenerateHoldout": "ensemble", "EvenMemberCount": "ensemble",
    "TrainingSetTooLarge": "learners", "EmptyBackground": "explain", "EmptySample": "explain",
    "DegeneratePerturbations": "explain",
}


def error_code(exc):
    name = type(exc).__name__
    return f"{_ERROR_MODULES.get(name, 'kldetect')}.{name}"


def _add_common(p):
    p.add_argument("--config", help="JSON experiment config; command-line flags override it")
    p.add_argument("--data", help="flow CSV (default: $KLDETECT_DATA)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--smote", dest="smote", action="store_true", default=None, help="oversample the training split")
    p.add_argument("--no-smote", dest="smote", action="store_false")
    p.add_argument("--svg", action="store_true", default=None, help="also render SVG figures")
    p.add_argument("--strict", action="store_true", default=None,
                   help="exit with status 3 if any learner fails to converge")
    p.add_argument("--label-column")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="kldetect", description="Keylogger flow detection experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train and evaluate one (scenario, model) cell")
    _add_common(p)
    p.add_argument("--scenario", help="All, InfoGain, LassoL1 or FisherScore")
    p.add_argument("--model", help="learner or ensemble name")
    p.add_argument("--cv", action="store_true", default=None, help="also run stratified k-fold CV")
    p.add_argument("--tune", action="store_true", default=None, help="small CV grid search before fitting")

    p = sub.add_parser("grid", help="every scenario x model cell, then a comparison report")
    _add_common(p)
    p.add_argument("--scenario", action="append", help="restrict to these scenarios (repeatable)")
    p.add_argument("--model", action="append", help="restrict to these models (repeatable)")
    p.add_argument("--cv", action="store_true", default=None)
    p.add_argument("--jobs", type=int, default=1, help="grid cells to run in parallel")

    p = sub.add_parser("select", help="run the three feature selectors and write rankings")
    _add_common(p)

    p = sub.add_parser("explain", help="SHAP and LIME explanations for a saved model bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", help="dataset to explain (default: the one the bundle was trained on)")
    p.add_argument("--out", required=True)
    p.add_argument("--instance", type=int, help="row index in the loaded dataset")
    p.add_argument("--global", dest="global_", action="store_true", help="mean |SHAP| over a test sample")
    p.add_argument("--n-background", type=int, default=100)
    p.add_argument("--n-sample", type=int, default=20)
    p.add_argument("--n-coalitions", type=int, default=2048)
    p.add_argument("--perturbations", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--svg", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("report", help="aggregate run directories into results.csv and figures")
    p.add_argument("--runs", required=True, help="directory searched recursively for eval_report.json")
    p.add_argument("--data", help="also write per-class summary statistics for this dataset")
    p.add_argument("--svg", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("verify", help="check a downloaded flow CSV's header before running")
    p.add_argument("--data", required=True)
    p.add_argument("--expect", help="expected header checksum (hex)")

    p = sub.add_parser("fixture", help="write the synthetic flow CSV used by the tests")
    p.add_argument("--out", required=True)
    p.add_argument("--rows", type=int, default=2000)
    p.add_argument("--seed", type=int)
    return parser


def config_from_args(args):
    from .pipeline import ExperimentConfig

    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        cfg = ExperimentConfig.from_json(Path(args.config).read_text())
    updates = {}
    for key in ("data", "out", "seed", "smote", "svg", "strict", "cv", "tune", "label_column"):
        val = getattr(args, key, None)
        if val is not None:
            updates[key] = val
    for key in ("scenario", "model"):
        val = getattr(args, key, None)
        if isinstance(val, str):
            updates[key] = val
    if not cfg.data and "data" not in updates and os.environ.get("KLDETECT_DATA"):
        updates["data"] = os.environ["KLDETECT_DATA"]
    return dataclasses.replace(cfg, **updates)


def _cmd_run(args):
    from .pipeline import run_experiment

    cfg = config_from_args(args)
    res = run_experiment(cfg)
    r = res.report
    print(f"{res.out}: accuracy={r.accuracy:.4f} f1={r.f1 if r.f1 is None else round(r.f1, 4)} "
          f"auc={r.auc if r.auc is None else round(r.auc, 4)}")
    if not res.converged:
        for w in res.warnings:
            print(f"warning: {w}", file=sys.stderr)
        if cfg.strict:
            print("error[learners.NotConverged]: training did not converge", file=sys.stderr)
            return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_grid(args):
    from .pipeline import MODELS, SCENARIOS, run_grid

    cfg = config_from_args(args)
    results = run_grid(cfg, args.scenario or SCENARIOS, args.model or MODELS, args.jobs)
    for res in results:
        print(f"{res.out}: accuracy={res.report.accuracy:.4f}")
    bad = [res for res in results if not res.converged]
    if bad and cfg.strict:
        print(f"error[learners.NotConverged]: {len(bad)} cell(s) did not converge", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_select(args):
    from .pipeline import run_selectors

    rankings = run_selectors(config_from_args(args))
    for method, r in rankings.items():
        print(f"{method}: {len(r.selected)} of {len(r.scores)} features selected")
    return EXIT_OK


def _cmd_explain(args):
    from .pipeline import explain_run

    if args.instance is None and not args.global_:
        raise ValueError("pass --instance N and/or --global")
    explain_run(args.bundle, args.out, args.data, args.instance, args.global_, args.n_background,
                args.n_sample, args.n_coalitions, lime_perturbations=args.perturbations, seed=args.seed,
                svg=args.svg)
    print(f"explanations written to {args.out}")
    return EXIT_OK


def _cmd_report(args):
    from .pipeline import write_report, write_summary_stats

    rows = write_report(args.runs, svg=args.svg)
    if args.data:
        write_summary_stats(args.data, args.runs)
    print(f"{len(rows)} runs summarized in {Path(args.runs) / 'results.csv'}")
    return EXIT_OK


def _cmd_verify(args):
    from .pipeline import verify_dataset

    check = verify_dataset(args.data, args.expect)
    print(f"columns: {check.n_columns}")
    print(f"label column: {check.label_column}")
    print(f"header checksum: {check.checksum}")
    if check.missing:
        print(f"missing columns: {', '.join(check.missing)}")
    if check.matches_expected is not None:
        print(f"checksum matches: {'yes' if check.matches_expected else 'no'}")
    return EXIT_OK if check.ok else EXIT_DATA


def _cmd_fixture(args):
    from .fixture import FIXTURE_SEED, write_fixture

    path = write_fixture(args.out, args.rows, FIXTURE_SEED if args.seed is None else args.seed)
    print(path)
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "grid": _cmd_grid, "select": _cmd_select, "explain": _cmd_explain,
            "report": _cmd_report, "verify": _cmd_verify, "fixture": _cmd_fixture}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DataError as exc:
        print(f"error[{error_code(exc)}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (KLDetectError, ValueError, OSError) as exc:
        print(f"error[{error_code(exc)}]: {exc}", file=sys.stderr)
        return EXIT_ERROR


assert set(_ERROR_MODULES) <= set(dir(errors))

if __name__ == "__main__":
    sys.exit(main())
