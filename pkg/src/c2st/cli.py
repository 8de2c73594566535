"""Command-line front end: test, power, bench, causal, interpret.

Every successful run emits a result envelope ``{schema_version,
toolkit_version, command, config, outcome, wall_time_s}`` where ``config``
carries all resolved defaults, including the seed actually used, so any run
can be reproduced bit-for-bit from its own output.  Statistical decisions
never affect the exit status.

Exit codes: 0 success; 2 usage or flag-validation errors; 3 unreadable or
malformed data files; 1 other operational failures.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .causal import CauseEffectConfig, CganConfig, cause_effect, read_pair_file
from .classifiers import KnnClassifier, MlpClassifier
from .core import C2stConfig, C2stOutcome, PowerQuery, c2st_interpret, c2st_power, c2st_run
from .experiments import MULTID_TESTS, TEST_NAMES, TrialGrid, run_experiment
from .numerics import Rng

SCHEMA_VERSION = "1"
EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_DATA = 3

ONE_D_TESTS = ("ks", "kuiper", "wmw")


class DataFileError(Exception):
    """A data file is missing, unreadable, or malformed."""


def read_data_file(path) -> np.ndarray:
    """Parse a delimiter-separated numeric matrix, one example per row.

    Comma or whitespace separated; a single leading header row is skipped
    when its first field does not parse as a number.  NaN/Inf tokens and
    ragged rows are rejected outright rather than filtered, so sample sizes
    are never silently altered.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFileError(f"cannot read {path}: {exc}") from exc
    rows = []
    width = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        tokens = [t for t in stripped.replace(",", " ").split() if t]
        try:
            values = [float(t) for t in tokens]
        except ValueError:
            if not rows and width is None:
                continue  # header row
            raise DataFileError(f"{path}:{line_no}: non-numeric value")
        if not all(math.isfinite(v) for v in values):
            raise DataFileError(f"{path}:{line_no}: NaN or Inf rejected")
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise DataFileError(
                f"{path}:{line_no}: expected {width} columns, got {len(values)}")
        rows.append(values)
    if not rows:
        raise DataFileError(f"{path}: no numeric rows")
    return np.asarray(rows, dtype=np.float64)


def atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _resolve_seed(seed) -> int:
    if seed is not None:
        return int(seed)
    return int.from_bytes(os.urandom(8), "big") % (2 ** 63)


def _envelope(command: str, config: dict, outcome: dict, started: float) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "toolkit_version": __version__,
        "command": command,
        "config": config,
        "outcome": outcome,
        "wall_time_s": time.perf_counter() - started,
    }


def _emit(envelope: dict, as_json: bool, human_lines) -> None:
    if as_json:
        print(json.dumps(envelope, indent=2, sort_keys=True))
    else:
        for line in human_lines:
            print(line)


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


# ---------------------------------------------------------------- test

def _save_model(path: Path, outcome: C2stOutcome, classifier, config: dict) -> None:
    record = {
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "classifier": classifier.flat_record(),
        "outcome": {
            "test": outcome.test,
            "statistic": outcome.statistic,
            "n_te": outcome.n_te,
            "p_value": outcome.pvalue,
            "alpha": outcome.alpha,
            "reject": outcome.reject,
            "per_example": {
                "index": outcome.per_example.index.tolist(),
                "label": outcome.per_example.label.tolist(),
                "prob": outcome.per_example.prob.tolist(),
            },
            "test_x": outcome.test_x.tolist(),
        },
    }
    atomic_write_text(path, json.dumps(record))


def cmd_test(args) -> int:
    started = time.perf_counter()
    x = read_data_file(args.x)
    y = read_data_file(args.y)
    seed = _resolve_seed(args.seed)
    if args.test in ONE_D_TESTS and x.shape[1] != 1:
        raise UsageError(f"--test {args.test} requires one-dimensional data, "
                         f"got d={x.shape[1]}")
    config = {
        "test": args.test, "x": str(args.x), "y": str(args.y),
        "alpha": args.alpha, "split": args.split, "seed": seed,
        "exact_null": bool(args.exact_null),
    }
    from .experiments import run_named_test  # late import avoids cycles

    if args.test in ("c2st-nn", "c2st-knn"):
        cfg = C2stConfig(
            classifier=args.test.removeprefix("c2st-"),
            train_fraction=args.split, alpha=args.alpha, seed=seed,
            exact_null=bool(args.exact_null),
        )
        outcome = c2st_run(x, y, cfg)
        record = outcome.to_record(include_per_example=args.per_example)
        if args.save_model:
            _save_model(Path(args.save_model), outcome, outcome._classifier, config)
    else:
        if args.exact_null:
            raise UsageError("--exact-null applies only to c2st tests")
        if args.save_model:
            raise UsageError("--save-model applies only to c2st tests")
        outcome = run_named_test(args.test, Rng(seed), x, y, args.alpha)
        record = outcome.to_record()
    env = _envelope("test", config, record, started)
    _emit(env, args.json, [
        f"test={outcome.test} statistic={outcome.statistic:.6f} "
        f"p={outcome.pvalue:.6f} alpha={args.alpha} "
        f"reject={'yes' if outcome.reject else 'no'} seed={seed}",
    ])
    return EXIT_OK


# ---------------------------------------------------------------- power

def cmd_power(args) -> int:
    started = time.perf_counter()
    try:
        query = PowerQuery(alpha=args.alpha, n_te=args.n_te, epsilon=args.epsilon)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    value = c2st_power(query)
    config = {"alpha": args.alpha, "n_te": args.n_te, "epsilon": args.epsilon}
    env = _envelope("power", config, {"power": value}, started)
    _emit(env, args.json, [f"{value:.6f}"])
    return EXIT_OK


# ---------------------------------------------------------------- bench

def cmd_bench(args) -> int:
    started = time.perf_counter()
    seed = _resolve_seed(args.seed)
    tests = tuple(args.tests.split(",")) if args.tests else (
        MULTID_TESTS if args.experiment == "sinusoid" else TEST_NAMES)
    try:
        grid = TrialGrid(
            experiment=args.experiment,
            n_values=_parse_int_list(args.n) if args.n else TrialGrid.n_values,
            nu_values=_parse_float_list(args.nu) if args.nu else TrialGrid.nu_values,
            delta_values=_parse_float_list(args.delta) if args.delta else TrialGrid.delta_values,
            gamma_values=_parse_float_list(args.gamma) if args.gamma else TrialGrid.gamma_values,
            trials=args.trials, base_seed=seed, tests=tests, alpha=args.alpha,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    table = run_experiment(grid)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    txt_path = out_dir / f"{args.experiment}_table.txt"
    json_path = out_dir / f"{args.experiment}_table.json"
    atomic_write_text(txt_path, table.to_text())
    atomic_write_text(json_path, json.dumps(table.to_records(), indent=2, sort_keys=True))
    config = {
        "experiment": grid.experiment, "n": list(grid.n_values),
        "nu": list(grid.nu_values), "delta": list(grid.delta_values),
        "gamma": list(grid.gamma_values), "trials": grid.trials,
        "tests": list(grid.tests), "alpha": grid.alpha, "seed": seed,
        "out": str(out_dir),
    }
    outcome = {"files": [str(txt_path), str(json_path)],
               "cells": len(table.cells)}
    env = _envelope("bench", config, outcome, started)
    _emit(env, args.json, [
        f"experiment={grid.experiment} cells={len(table.cells)} "
        f"trials={grid.trials} seed={seed}",
        f"wrote {txt_path}",
        f"wrote {json_path}",
    ])
    return EXIT_OK


# ---------------------------------------------------------------- causal

_TRUTH_TOKENS = {"x->y": "x->y", "->": "x->y", "1": "x->y",
                 "y->x": "y->x", "<-": "y->x", "-1": "y->x"}


def _read_truth(path) -> dict[str, str]:
    truth = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFileError(f"cannot read {path}: {exc}") from exc
    for line_no, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 2 or tokens[1] not in _TRUTH_TOKENS:
            raise DataFileError(
                f"{path}:{line_no}: expected '<name> <x->y|y->x|1|-1>'")
        truth[tokens[0]] = _TRUTH_TOKENS[tokens[1]]
    return truth


def cmd_causal(args) -> int:
    started = time.perf_counter()
    seed = _resolve_seed(args.seed)
    target = Path(args.pairs)
    if target.is_dir():
        files = sorted(p for p in target.iterdir() if p.is_file())
    elif target.exists():
        files = [target]
    else:
        raise DataFileError(f"cannot read {target}: no such file or directory")
    if not files:
        raise DataFileError(f"{target}: no pair files found")
    truth = _read_truth(args.truth) if args.truth else None
    cfg = CauseEffectConfig(
        ensemble=args.ensemble,
        cgan=CganConfig(iterations=args.iterations),
        scoring=args.scoring,
    )
    records = []
    correct = 0
    scored = 0
    human = []
    for i, path in enumerate(sorted(files)):
        try:
            pairs = read_pair_file(path)
            verdict = cause_effect(Rng(seed).child(i), pairs, cfg)
        except (ValueError, FloatingPointError) as exc:
            records.append({"file": path.name, "error": str(exc)})
            human.append(f"{path.name}: error: {exc}")
            continue
        rec = {"file": path.name, **verdict.to_record()}
        if truth is not None and path.name in truth:
            rec["truth"] = truth[path.name]
            rec["correct"] = verdict.direction == truth[path.name]
            scored += 1
            correct += int(rec["correct"])
        records.append(rec)
        human.append(f"{path.name}: direction={verdict.direction} "
                     f"t_xy={verdict.t_xy:.6f} t_yx={verdict.t_yx:.6f}")
    outcome = {"verdicts": records}
    if truth is not None and scored:
        outcome["accuracy"] = correct / scored
        outcome["scored"] = scored
        human.append(f"accuracy={correct / scored:.3f} over {scored} annotated pairs")
    config = {"pairs": str(target), "truth": args.truth, "ensemble": args.ensemble,
              "iterations": args.iterations, "scoring": args.scoring, "seed": seed}
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out_dir / "verdicts.json",
                          json.dumps(outcome, indent=2, sort_keys=True))
    env = _envelope("causal", config, outcome, started)
    _emit(env, args.json, human)
    return EXIT_OK


# ---------------------------------------------------------------- interpret

def _write_interpret_files(report, out_dir: Path) -> list[str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["rank,pool_index,true_label,prob,predicted,correct,confidence"]
    for rank in range(len(report)):
        lines.append(
            f"{rank},{report.index[rank]},{report.label[rank]},"
            f"{report.prob[rank]:.6f},{report.predicted[rank]},"
            f"{int(report.correct[rank])},{report.confidence[rank]:.6f}")
    files = [out_dir / "examples_ranked.csv"]
    atomic_write_text(files[0], "\n".join(lines) + "\n")
    if report.first_layer_weights is not None:
        w_lines = [",".join(f"{v:.9g}" for v in row)
                   for row in report.first_layer_weights]
        files.append(out_dir / "first_layer_weights.csv")
        atomic_write_text(files[-1], "\n".join(w_lines) + "\n")
        if report.discriminative_feature is not None:
            f_lines = [
                "feature," + ",".join(f"f{i}" for i in range(
                    report.first_layer_weights.shape[1])),
                "positive," + ",".join(f"{v:.9g}" for v in report.positive_feature),
                "negative," + ",".join(f"{v:.9g}" for v in report.negative_feature),
                "discriminative," + ",".join(
                    f"{v:.9g}" for v in report.discriminative_feature),
            ]
            files.append(out_dir / "features.csv")
            atomic_write_text(files[-1], "\n".join(f_lines) + "\n")
    return [str(f) for f in files]


def cmd_interpret(args) -> int:
    started = time.perf_counter()
    if args.model:
        try:
            record = json.loads(Path(args.model).read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataFileError(f"cannot read {args.model}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataFileError(f"{args.model}: invalid JSON: {exc}") from exc
        kind = record.get("classifier", {}).get("kind")
        if kind == "nn":
            classifier = MlpClassifier.from_flat_record(record["classifier"])
        elif kind == "knn":
            classifier = KnnClassifier.from_flat_record(record["classifier"])
        else:
            raise UsageError(f"{args.model}: no saved classifier to interpret")
        saved = record["outcome"]
        from .core import PerExample
        outcome = C2stOutcome(
            test=saved["test"], statistic=saved["statistic"], pvalue=saved["p_value"],
            alpha=saved["alpha"], reject=saved["reject"], n_te=saved["n_te"],
            per_example=PerExample(
                index=np.asarray(saved["per_example"]["index"]),
                label=np.asarray(saved["per_example"]["label"]),
                prob=np.asarray(saved["per_example"]["prob"]),
            ),
            test_x=np.asarray(saved["test_x"], dtype=np.float64),
        )
        config = {"model": str(args.model), "out": str(args.out)}
    else:
        if not (args.x and args.y and args.test):
            raise UsageError("interpret needs either --model or --x/--y/--test")
        if args.test not in ("c2st-nn", "c2st-knn"):
            raise UsageError("interpret applies only to c2st tests")
        x = read_data_file(args.x)
        y = read_data_file(args.y)
        seed = _resolve_seed(args.seed)
        cfg = C2stConfig(classifier=args.test.removeprefix("c2st-"),
                         train_fraction=args.split, alpha=args.alpha, seed=seed)
        outcome = c2st_run(x, y, cfg)
        classifier = outcome._classifier
        config = {"test": args.test, "x": str(args.x), "y": str(args.y),
                  "alpha": args.alpha, "split": args.split, "seed": seed,
                  "out": str(args.out)}
    report = c2st_interpret(outcome, classifier)
    files = _write_interpret_files(report, Path(args.out))
    env = _envelope("interpret", config, {"files": files,
                                          "records": len(report)}, started)
    _emit(env, args.json, [f"wrote {f}" for f in files])
    return EXIT_OK


# ---------------------------------------------------------------- wiring

class UsageError(Exception):
    """Invalid flag combination detected after parsing."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="c2st",
        description="Two-sample testing via binary classifiers, with classical "
                    "baselines, benchmarks, and cause-effect discovery.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="run one two-sample test on two data files")
    p.add_argument("--x", required=True, help="first sample (rows = examples)")
    p.add_argument("--y", required=True, help="second sample")
    p.add_argument("--test", required=True, choices=TEST_NAMES)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--split", type=float, default=0.5,
                   help="train fraction of the pooled rows (c2st only)")
    p.add_argument("--seed", type=int, default=None,
                   help="default: drawn from entropy, echoed in the envelope")
    p.add_argument("--exact-null", action="store_true",
                   help="exact Binomial tail instead of the Gaussian p-value")
    p.add_argument("--per-example", action="store_true",
                   help="include per-example records in the envelope")
    p.add_argument("--save-model", default=None, metavar="PATH",
                   help="save the trained classifier and outcome for interpret")
    p.add_argument("--json", action="store_true", help="emit the JSON envelope")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("power", help="closed-form power of the accuracy test")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--n-te", type=int, required=True, dest="n_te")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("bench", help="run a synthetic benchmark grid")
    p.add_argument("--experiment", required=True,
                   choices=("type1", "gauss-student", "sinusoid"))
    p.add_argument("--n", default=None, help="comma list, e.g. 25,50,100")
    p.add_argument("--nu", default=None, help="comma list of degrees of freedom")
    p.add_argument("--delta", default=None, help="comma list of frequencies")
    p.add_argument("--gamma", default=None, help="comma list of noise sds")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--tests", default=None, help="comma list of test names")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="directory for table files")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("causal", help="cause-effect direction for pair files")
    p.add_argument("--pairs", required=True,
                   help="two-column pair file, or a directory of them")
    p.add_argument("--truth", default=None,
                   help="annotation file: '<filename> <x->y|y->x|1|-1>' per line")
    p.add_argument("--ensemble", type=int, default=10)
    p.add_argument("--iterations", type=int, default=CganConfig.iterations)
    p.add_argument("--scoring", default="knn", choices=("knn", "nn", "mmd"))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="directory for verdicts.json")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_causal)

    p = sub.add_parser("interpret", help="per-example and feature reports")
    p.add_argument("--model", default=None, help="file written by test --save-model")
    p.add_argument("--x", default=None)
    p.add_argument("--y", default=None)
    p.add_argument("--test", default=None, choices=("c2st-nn", "c2st-knn"))
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--split", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="directory for report files")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_interpret)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def entrypoint() -> None:  # console-script shim
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
