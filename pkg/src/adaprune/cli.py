"""Command-line surface: prune, soup, attack, eval, report.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or
malformed files), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .archive import load_archive, load_tensors, save_archive
from .attack import evaluate_robustness
from .dataset import load_dataset
from .errors import (
    ArchiveError,
    DatasetError,
    NumericalError,
    ShapeError,
    SingularMatrixError,
    SoupEvalError,
)
from .pipeline import PruneReport, prune_model, weight_sparsity
from .pruner import SparsityTarget
from .soup import SoupCandidate, greedy_weight_average
from .textmodel import clean_accuracy

PRUNE_CSV_COLUMNS = ["layer", "sparsity", "mse_before", "mse_after", "step_loss_sum", "seconds"]
RESULTS_CSV_COLUMNS = ["model", "sparsity", "acc", "aua", "asr", "attempted", "succeeded"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def write_prune_report(report: PruneReport, path) -> None:
    """Write the per-layer pruning records as CSV with the fixed column set."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PRUNE_CSV_COLUMNS)
        for rec in report.layers:
            writer.writerow(
                [
                    rec.layer,
                    f"{rec.sparsity:.6f}",
                    f"{rec.mse_before_recalibration:.12g}",
                    f"{rec.mse_after_pruning:.12g}",
                    f"{rec.step_loss_sum:.12g}",
                    f"{rec.seconds:.6f}",
                ]
            )


def _append_results_row(path, row: dict) -> None:
    path = Path(path)
    fresh = not path.exists()
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULTS_CSV_COLUMNS)
        if fresh:
            writer.writeheader()
        writer.writerow(row)


def _parse_nm(text: str) -> SparsityTarget:
    parts = text.split(":")
    if len(parts) != 2:
        raise UsageError(f"--nm expects N:M, got {text!r}")
    try:
        n_keep, bank = int(parts[0]), int(parts[1])
    except ValueError:
        raise UsageError(f"--nm expects integers N:M, got {text!r}") from None
    try:
        return SparsityTarget.structured(n_keep, bank)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_calibration(path):
    tensors = load_tensors(path)
    if "calibration" in tensors:
        return tensors["calibration"]
    if len(tensors) == 1:
        return next(iter(tensors.values()))
    raise ArchiveError(
        f"{path}: expected a tensor named 'calibration' (found {sorted(tensors)})"
    )


def cmd_prune(args) -> int:
    ckpt = load_archive(args.model)
    calibration = _load_calibration(args.calib)
    if args.nm is not None:
        target = _parse_nm(args.nm)
    elif args.sparsity is not None:
        try:
            target = SparsityTarget.unstructured(args.sparsity)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        raise UsageError("prune needs --sparsity or --nm")

    sparse, report = prune_model(
        ckpt, calibration, target, damping=args.damping, adaptive=not args.independent
    )
    save_archive(sparse, args.out)
    if args.report:
        write_prune_report(report, args.report)
    mode = "independent" if args.independent else "adaptive"
    print(f"pruned {args.model} -> {args.out} ({mode})")
    for rec in report.layers:
        print(
            f"  layer {rec.layer}: sparsity={rec.sparsity:.4f} "
            f"mse_before={rec.mse_before_recalibration:.6g} "
            f"mse_after={rec.mse_after_pruning:.6g} seconds={rec.seconds:.3f}"
        )
    print(f"final_output_mse={report.final_output_mse:.6g}")
    return 0


def cmd_soup(args) -> int:
    ds = load_dataset(args.data)
    if args.eval == "clean":
        scorer = lambda ckpt: clean_accuracy(ckpt, ds)  # noqa: E731
    else:
        scorer = lambda ckpt: evaluate_robustness(ckpt, ds, args.max_subs).aua  # noqa: E731
    candidates = []
    for path in args.models:
        ckpt = load_archive(path)
        candidates.append(SoupCandidate(ckpt=ckpt, score=scorer(ckpt)))
    final, chosen = greedy_weight_average(candidates, scorer)
    save_archive(final, args.out)
    picked = ", ".join(args.models[i] for i in chosen)
    print(f"averaged {len(chosen)}/{len(candidates)} models -> {args.out}")
    print(f"included: {picked}")
    print(f"{args.eval} score: {scorer(final):.4f}")
    return 0


def cmd_attack(args) -> int:
    model = load_archive(args.model)
    ds = load_dataset(args.data)
    result = evaluate_robustness(model, ds, args.max_subs)
    print(
        f"acc={result.acc:.2f} aua={result.aua:.2f} asr={result.asr:.2f} "
        f"(attempted={result.attempted} succeeded={result.succeeded})"
    )
    if args.out:
        _append_results_row(
            args.out,
            {
                "model": str(args.model),
                "sparsity": f"{weight_sparsity(model):.6f}",
                "acc": f"{result.acc:.4f}",
                "aua": f"{result.aua:.4f}",
                "asr": f"{result.asr:.4f}",
                "attempted": result.attempted,
                "succeeded": result.succeeded,
            },
        )
    return 0


def cmd_eval(args) -> int:
    model = load_archive(args.model)
    ds = load_dataset(args.data)
    acc = clean_accuracy(model, ds)
    print(f"acc={acc:.2f} over {len(ds.examples)} examples "
          f"(sparsity={weight_sparsity(model):.4f})")
    return 0


def cmd_report(args) -> int:
    with open(args.input, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        header = reader.fieldnames or []
    missing = [c for c in RESULTS_CSV_COLUMNS if c not in header]
    if missing:
        raise DatasetError(f"{args.input}: results csv is missing columns {missing}")
    try:
        rows.sort(key=lambda r: float(r["sparsity"]))
    except ValueError as exc:
        raise DatasetError(f"{args.input}: non-numeric sparsity column: {exc}") from exc
    lines = [
        "# Robustness versus sparsity",
        "",
        "| sparsity | acc | aua | asr | model |",
        "|---:|---:|---:|---:|:---|",
    ]
    for row in rows:
        lines.append(
            f"| {float(row['sparsity']):.4f} | {float(row['acc']):.2f} "
            f"| {float(row['aua']):.2f} | {float(row['asr']):.2f} | {row['model']} |"
        )
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="adaprune", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prune", help="prune a checkpoint against calibration data")
    p.add_argument("--model", required=True)
    p.add_argument("--calib", required=True, help="archive with a 'calibration' tensor")
    p.add_argument("--sparsity", type=float, default=None)
    p.add_argument("--nm", default=None, help="structured target as N:M, e.g. 32:64")
    p.add_argument("--lambda", dest="damping", type=float, default=1e-4,
                   help="diagonal damping added to gram matrices (default 1e-4)")
    p.add_argument("--independent", action="store_true",
                   help="prune each layer against original dense inputs, no recalibration")
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None, help="write per-layer CSV here")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("soup", help="greedy weight averaging over candidate models")
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--eval", choices=["clean", "attack"], required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--max-subs", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_soup)

    p = sub.add_parser("attack", help="run the synonym attack and report Acc/Aua/Asr")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--max-subs", type=int, default=5)
    p.add_argument("--out", default=None, help="append a summary row to this CSV")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("eval", help="clean accuracy of a model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="summarize a results CSV as markdown")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    try:
        return args.func(args) or 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ArchiveError, DatasetError, ShapeError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (SingularMatrixError, NumericalError, SoupEvalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
