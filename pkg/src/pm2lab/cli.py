"""Command line entry points: generate, run, evaluate, table.

The output directory resolves in order: --out flag, the PM2LAB_OUTPUT_DIR
environment variable, then the config's output_dir (for run) or the
current directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .datagen import flatten_triples, generate, load_dataset, save_dataset
from .experiment import load_spec, run_cells
from .metrics import evaluate, write_report
from .model import load_checkpoint
from .tables import TABLE_KINDS, build_table, write_table
from .trainer import MODES

OUTPUT_DIR_ENV = "PM2LAB_OUTPUT_DIR"


def _resolve_out(flag_value, fallback="."):
    return Path(flag_value or os.environ.get(OUTPUT_DIR_ENV) or fallback)


def cmd_generate(args) -> int:
    spec = load_spec(args.config)
    out = _resolve_out(args.out)
    out.mkdir(parents=True, exist_ok=True)
    triples, targets = generate(spec.gen)
    save_dataset(flatten_triples(triples), out / "source.dat")
    save_dataset(targets, out / "target.dat")
    print(f"wrote {out / 'source.dat'} ({3 * len(triples)} samples) and "
          f"{out / 'target.dat'} ({len(targets)} samples)")
    return 0


def cmd_run(args) -> int:
    spec = load_spec(args.config)
    out = _resolve_out(args.out, fallback=spec.output_dir)
    modes = tuple(m.strip() for m in args.modes.split(",")) if args.modes else None
    if modes:
        for m in modes:
            if m not in MODES:
                raise ValueError(f"unknown mode {m!r} (choose from {', '.join(MODES)})")
    results = run_cells(spec, out, modes=modes, seeds=args.seeds,
                        ablation=args.ablation)
    failed = [r for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} cells succeeded; "
          f"outputs under {out}")
    for r in failed:
        print(f"  failed: {r.name} seed={r.seed}: {r.error}", file=sys.stderr)
    return 1 if failed else 0


def cmd_evaluate(args) -> int:
    params = load_checkpoint(args.checkpoint)
    samples = load_dataset(args.data)
    labeled = [s for s in samples if s.labels is not None]
    if not labeled:
        raise ValueError(f"{args.data}: no labeled samples to evaluate")
    report = evaluate(params, labeled)
    out = _resolve_out(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(report, out / "report.csv",
                 meta={"checkpoint": str(args.checkpoint), "data": str(args.data)})
    print(f"macro_f1={report.macro_f1:.4f} mean_eo={report.mean_eo:.4f} "
          f"mean_spd={report.mean_spd:.4f} -> {out / 'report.csv'}")
    return 0


def cmd_table(args) -> int:
    table = build_table(args.reports, args.kind)
    out = _resolve_out(args.out)
    paths = write_table(table, out, figures=not args.no_figures)
    sys.stdout.write(paths["txt"].read_text())
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pm2lab",
        description="Paired moment matching laboratory: synthetic benchmark "
                    "generation, adaptation training and fairness tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write source/target dataset files")
    p.add_argument("--config", required=True, help="key=value config file")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="train and evaluate every (mode, seed) cell")
    p.add_argument("--config", required=True, help="key=value experiment config")
    p.add_argument("--out", help="output directory (default: config output_dir)")
    p.add_argument("--seeds", type=int, help="override the number of seeds")
    p.add_argument("--modes", help="comma-separated mode subset")
    p.add_argument("--ablation", action="store_true",
                   help="also run the loss-weight ablation grid")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("table", help="aggregate reports into a table and figure")
    p.add_argument("--reports", required=True,
                   help="glob over report sidecars, e.g. 'runs/**/report.json'")
    p.add_argument("--kind", required=True, choices=TABLE_KINDS)
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_table)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
