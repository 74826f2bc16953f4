"""Command line interface.

Subcommands: ``analyze`` (manifest -> records JSONL + CSV projection),
``stats`` (records -> grouped summaries + hypothesis tests), ``report``
(records -> tables and SVG plots), ``fixtures`` (emit the synthetic corpus).
Exit code 0 on success (per-image skips included), 1 on fatal errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import pipeline, report
from .errors import ToneAuditError
from .stats import ContingencyTable, chi_square, mann_whitney_u, summarize, t_test


def _cmd_analyze(args) -> int:
    config = pipeline.load_config(args.config)
    if args.palettes:
        config.palettes_path = args.palettes
    if args.topology:
        config.topology_path = args.topology
    manifest = pipeline.load_manifest(args.manifest)
    lines, summary = pipeline.run_corpus(manifest, config, jobs=args.jobs)
    pipeline.write_records(lines, args.out)
    print(json.dumps(summary, sort_keys=True))
    return 0


def _category_counts(records: list[dict], field: str, models: list[str]) -> ContingencyTable:
    cats = sorted({r[field] for r in records})
    counts = [[sum(1 for r in records if r["model"] == m and r[field] == c)
               for c in cats] for m in models]
    return ContingencyTable(row_labels=models, col_labels=cats,
                            counts=np.asarray(counts))


def _cmd_stats(args) -> int:
    lines = pipeline.read_records(args.records)
    records = report.flatten_records(lines)
    group_by = [g.strip() for g in args.group_by.split(",") if g.strip()]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    summaries = summarize(records, group_by,
                          ["gender", "race", "age", "mst", "perla", "fst"])
    summary_path = out / "summary.json"
    summary_path.write_text(
        json.dumps([asdict(s) for s in summaries], indent=2, sort_keys=True) + "\n",
        encoding="utf-8")

    tests: dict[str, dict] = {}
    models = sorted({r["model"] for r in records})
    if len(models) >= 2:
        for field in ("gender", "race"):
            table = _category_counts(records, field, models)
            if table.counts.sum(axis=0).min() > 0 and table.counts.sum(axis=1).min() > 0:
                r = chi_square(table, yates=table.counts.shape == (2, 2))
                tests[f"{field}_by_model"] = asdict(r)
        if len(models) == 2:
            a = [r["age"] for r in records if r["model"] == models[0]]
            b = [r["age"] for r in records if r["model"] == models[1]]
            if len(a) >= 2 and len(b) >= 2:
                tests["age_by_model"] = asdict(t_test(a, b))
            ma = [r["mst"] for r in records if r["model"] == models[0]]
            mb = [r["mst"] for r in records if r["model"] == models[1]]
            if ma and mb:
                tests["mst_by_model"] = asdict(mann_whitney_u(ma, mb))
    if tests:
        report.write_test_results(tests, out)
    print(f"wrote {summary_path}")
    return 0


def _cmd_report(args) -> int:
    lines = pipeline.read_records(args.records)
    records = report.flatten_records(lines)
    written = report.emit_tables(records, args.out)
    written += report.emit_plots(records, args.out)
    for path in written:
        print(path)
    return 0


def _cmd_fixtures(args) -> int:
    from .fixtures import build_fixture_corpus
    manifest = build_fixture_corpus(args.out, cast_seed=args.cast_seed)
    print(manifest)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toneaudit",
                                     description="Corpus-scale skin tone auditing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="analyze a corpus manifest into records")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--palettes", default=None)
    p.add_argument("--topology", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("stats", help="grouped summaries and hypothesis tests")
    p.add_argument("--records", required=True)
    p.add_argument("--group-by", default="model,prompt")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("report", help="render tables and plots from records")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("fixtures", help="emit the synthetic fixture corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--cast-seed", type=int, default=None)
    p.set_defaults(func=_cmd_fixtures)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ToneAuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
