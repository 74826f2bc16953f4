"""Table and plot rendering over analysis records.

Tables are emitted as CSV + Markdown pairs under ``tables/``; plots as
self-contained SVG bar charts under ``plots/``. Every number is recomputed
from the records alone. Percentages are printed to one decimal with Python's
float formatting of count/total*100, counts get comma thousands separators in
Markdown only, and p-values below 1e-12 render as "<1e-12" in Markdown while
machine outputs keep the exact value.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .stats import DEFAULT_ORDINAL_ORDERS

PREFERRED_CATEGORY_ORDERS = {
    "gender": ["Man", "Woman"],
    "fst": DEFAULT_ORDINAL_ORDERS["fst"],
}


def flatten_record(record: dict) -> dict:
    """Project a pipeline record onto the flat fields tables consume."""
    return {
        "image_id": record["image_id"],
        "model": record["model"],
        "prompt": record["prompt"],
        "gender": record["gender"],
        "race": record["race"],
        "age": record["age"],
        "mst": record["mst"]["index"],
        "perla": record["perla"]["index"],
        "fst": record["fst"]["label"],
    }


def flatten_records(lines: list[dict]) -> list[dict]:
    return [flatten_record(r) for r in lines if not r.get("skip")]


def format_percent(count: float, total: float) -> str:
    return f"{count / total * 100:.1f}" if total else "0.0"


def format_mean_sd(values) -> tuple[str, str]:
    arr = np.asarray(values, dtype=np.float64)
    return f"{arr.mean():.2f}", f"{arr.std(ddof=0):.2f}"


def format_p_value(p: float) -> str:
    return "<1e-12" if p < 1e-12 else f"{p:.4g}"


@dataclass
class TableSpec:
    table_id: str               # e.g. "T1"
    name: str                   # file-name fragment
    title: str
    kind: str                   # count_percent | percent | mean_sd | dist_percent
    group_by: list[str]
    value_field: str
    category_order: list[str] = field(default_factory=list)


DEFAULT_TABLES = [
    TableSpec("T1", "gender_by_model", "Predicted gender by model",
              "count_percent", ["model"], "gender"),
    TableSpec("T2", "gender_by_prompt_model", "Predicted gender by prompt and model (%)",
              "percent", ["model", "prompt"], "gender"),
    TableSpec("T3", "race_by_model", "Predicted race by model",
              "count_percent", ["model"], "race"),
    TableSpec("T4", "age_by_model", "Predicted age by model",
              "mean_sd", ["model"], "age"),
    TableSpec("T5", "mst_by_prompt_model", "Mean Monk Skin Tone by prompt and model",
              "mean_sd", ["model", "prompt"], "mst"),
    TableSpec("T6", "perla_by_prompt_model", "Mean PERLA by prompt and model",
              "mean_sd", ["model", "prompt"], "perla"),
    TableSpec("T7", "fst_by_prompt_model", "Fitzpatrick type distribution by prompt and model (%)",
              "dist_percent", ["model", "prompt"], "fst"),
]


def _group(records: list[dict], keys: list[str]) -> list[tuple[tuple, list[dict]]]:
    groups: dict[tuple, list[dict]] = {}
    for r in records:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    return sorted(groups.items(), key=lambda kv: tuple(str(v) for v in kv[0]))


def _category_columns(records: list[dict], spec: TableSpec) -> list[str]:
    preferred = spec.category_order or PREFERRED_CATEGORY_ORDERS.get(spec.value_field)
    present = {r[spec.value_field] for r in records}
    if preferred:
        cols = [c for c in preferred if c in present]
        cols += sorted(c for c in present if c not in preferred)
        return cols
    # fall back to overall frequency, largest first
    counts: dict[str, int] = {}
    for r in records:
        counts[r[spec.value_field]] = counts.get(r[spec.value_field], 0) + 1
    return sorted(counts, key=lambda c: (-counts[c], str(c)))


def render_table(records: list[dict], spec: TableSpec) -> tuple[list[str], list[list], list[list[str]]]:
    """Returns (csv_header, csv_rows, md_rows). md_rows includes no header."""
    missing = [k for k in spec.group_by + [spec.value_field]
               if records and k not in records[0]]
    if missing:
        raise ValueError(f"table {spec.table_id}: records lack field(s) {missing}")

    groups = _group(records, spec.group_by)
    header: list[str] = list(spec.group_by)
    csv_rows: list[list] = []
    md_rows: list[list[str]] = []

    if spec.kind in ("count_percent", "percent", "dist_percent"):
        cats = _category_columns(records, spec)
        if spec.kind == "count_percent":
            for c in cats:
                header += [f"{c}_count", f"{c}_percent"]
        else:
            header += [str(c) for c in cats]
        header += ["n"]
        for key, members in groups:
            n = len(members)
            counts = {c: sum(1 for m in members if m[spec.value_field] == c) for c in cats}
            crow: list = list(key)
            mrow: list[str] = [str(v) for v in key]
            for c in cats:
                pct = format_percent(counts[c], n)
                if spec.kind == "count_percent":
                    crow += [counts[c], pct]
                    mrow.append(f"{counts[c]:,} ({pct}%)")
                else:
                    crow.append(pct)
                    mrow.append(pct)
            crow.append(n)
            mrow.append(f"{n:,}")
            csv_rows.append(crow)
            md_rows.append(mrow)
    elif spec.kind == "mean_sd":
        header += ["mean", "sd", "n"]
        for key, members in groups:
            values = [m[spec.value_field] for m in members]
            mean_s, sd_s = format_mean_sd(values)
            csv_rows.append(list(key) + [mean_s, sd_s, len(members)])
            md_rows.append([str(v) for v in key] + [f"{mean_s} ± {sd_s}", f"{len(members):,}"])
    else:
        raise ValueError(f"unknown table kind {spec.kind!r}")
    return header, csv_rows, md_rows


def _md_header(spec: TableSpec, csv_header: list[str]) -> list[str]:
    if spec.kind == "mean_sd":
        return list(spec.group_by) + [f"{spec.value_field} (mean ± sd)", "n"]
    cols = []
    for h in csv_header:
        if h.endswith("_count"):
            cols.append(h[:-6])
        elif h.endswith("_percent"):
            continue
        else:
            cols.append(h)
    return cols


def emit_tables(records: list[dict], out_dir: str | Path,
                tables: list[TableSpec] | None = None) -> list[Path]:
    """One CSV + one Markdown file per table spec; returns written paths."""
    out = Path(out_dir) / "tables"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for spec in tables or DEFAULT_TABLES:
        csv_header, csv_rows, md_rows = render_table(records, spec)

        csv_path = out / f"{spec.table_id}_{spec.name}.csv"
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(csv_header)
            writer.writerows(csv_rows)

        md_header = _md_header(spec, csv_header)
        lines = [f"# {spec.table_id}: {spec.title}", ""]
        lines.append("| " + " | ".join(md_header) + " |")
        lines.append("|" + "|".join([" --- "] * len(md_header)) + "|")
        for row in md_rows:
            lines.append("| " + " | ".join(row) + " |")
        md_path = out / f"{spec.table_id}_{spec.name}.md"
        md_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written += [csv_path, md_path]
    return written


# ---------------------------------------------------------------------------
# SVG plots
# ---------------------------------------------------------------------------

_SVG_W, _SVG_H = 960, 420
_MARGIN_L, _MARGIN_B, _MARGIN_T = 60, 70, 30
_PALETTE = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"]


def _svg_open(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<title>{title}</title>',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
    ]


def _y_scale(max_value: float):
    span = _SVG_H - _MARGIN_B - _MARGIN_T
    max_value = max(max_value, 1e-9)

    def to_y(v: float) -> float:
        return _SVG_H - _MARGIN_B - v / max_value * span
    return to_y


def grouped_bar_svg(title: str, groups: list[str], series: list[str],
                    values: dict[tuple[str, str], float],
                    errors: dict[tuple[str, str], float] | None = None,
                    y_label: str = "") -> str:
    """Grouped bar chart; each bar carries data-* attributes for scraping."""
    parts = _svg_open(title)
    vmax = max([v + (errors or {}).get(k, 0.0) for k, v in values.items()], default=1.0)
    to_y = _y_scale(vmax * 1.1)
    plot_w = _SVG_W - _MARGIN_L - 20
    group_w = plot_w / max(len(groups), 1)
    bar_w = group_w * 0.8 / max(len(series), 1)
    base_y = _SVG_H - _MARGIN_B

    parts.append(f'<text x="{_MARGIN_L}" y="18" font-size="14">{title}</text>')
    if y_label:
        parts.append(f'<text x="12" y="{_MARGIN_T + 12}" font-size="11">{y_label}</text>')
    for gi, g in enumerate(groups):
        gx = _MARGIN_L + gi * group_w
        parts.append(
            f'<text x="{gx + group_w / 2:.1f}" y="{base_y + 18}" font-size="11" '
            f'text-anchor="middle">{g}</text>')
        for si, s in enumerate(series):
            v = values.get((g, s))
            if v is None:
                continue
            x = gx + group_w * 0.1 + si * bar_w
            y = to_y(v)
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" '
                f'height="{base_y - y:.2f}" fill="{_PALETTE[si % len(_PALETTE)]}" '
                f'data-group="{g}" data-series="{s}" data-value="{v!r}"/>')
            if errors and (g, s) in errors:
                e = errors[(g, s)]
                cx = x + bar_w / 2
                parts.append(
                    f'<line x1="{cx:.2f}" y1="{to_y(v - e):.2f}" x2="{cx:.2f}" '
                    f'y2="{to_y(max(v + e, 0)):.2f}" stroke="black" '
                    f'data-group="{g}" data-series="{s}" data-sd="{e!r}"/>')
    for si, s in enumerate(series):
        lx = _MARGIN_L + si * 150
        ly = _SVG_H - 24
        parts.append(f'<rect x="{lx}" y="{ly - 10}" width="12" height="12" '
                     f'fill="{_PALETTE[si % len(_PALETTE)]}"/>')
        parts.append(f'<text x="{lx + 16}" y="{ly}" font-size="11">{s}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def stacked_bar_svg(title: str, groups: list[str], segments: list[str],
                    values: dict[tuple[str, str], float]) -> str:
    """Stacked percentage bars; every segment carries data-* attributes."""
    parts = _svg_open(title)
    to_y = _y_scale(100.0)
    plot_w = _SVG_W - _MARGIN_L - 20
    group_w = plot_w / max(len(groups), 1)
    bar_w = group_w * 0.6
    base_y = _SVG_H - _MARGIN_B

    parts.append(f'<text x="{_MARGIN_L}" y="18" font-size="14">{title}</text>')
    for gi, g in enumerate(groups):
        x = _MARGIN_L + gi * group_w + group_w * 0.2
        acc = 0.0
        for si, seg in enumerate(segments):
            v = values.get((g, seg), 0.0)
            if v <= 0:
                continue
            y_top = to_y(acc + v)
            y_bot = to_y(acc)
            parts.append(
                f'<rect x="{x:.2f}" y="{y_top:.2f}" width="{bar_w:.2f}" '
                f'height="{y_bot - y_top:.2f}" fill="{_PALETTE[si % len(_PALETTE)]}" '
                f'data-group="{g}" data-segment="{seg}" data-value="{v!r}"/>')
            acc += v
        parts.append(
            f'<text x="{x + bar_w / 2:.1f}" y="{base_y + 18}" font-size="11" '
            f'text-anchor="middle">{g}</text>')
    for si, seg in enumerate(segments):
        lx = _MARGIN_L + si * 110
        ly = _SVG_H - 24
        parts.append(f'<rect x="{lx}" y="{ly - 10}" width="12" height="12" '
                     f'fill="{_PALETTE[si % len(_PALETTE)]}"/>')
        parts.append(f'<text x="{lx + 16}" y="{ly}" font-size="11">{seg}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def emit_plots(records: list[dict], out_dir: str | Path) -> list[Path]:
    """Gender share, MST/PERLA means with sd whiskers, stacked FST distribution."""
    out = Path(out_dir) / "plots"
    out.mkdir(parents=True, exist_ok=True)
    written = []

    models = sorted({r["model"] for r in records})
    prompts = sorted({r["prompt"] for r in records})
    by_mp = {key: members for key, members in _group(records, ["model", "prompt"])}

    gender_pct: dict[tuple[str, str], float] = {}
    for (m, p), members in by_mp.items():
        men = sum(1 for r in members if r["gender"] == "Man")
        gender_pct[(p, m)] = men / len(members) * 100.0
    path = out / "F4_gender_percent_man.svg"
    path.write_text(grouped_bar_svg(
        "Share of subjects classified as men (%)", prompts, models, gender_pct,
        y_label="%"), encoding="utf-8")
    written.append(path)

    for k, fname, label in (("mst", "F5_mst_mean.svg", "MST mean ± sd"),
                            ("perla", "F5_perla_mean.svg", "PERLA mean ± sd")):
        vals, errs = {}, {}
        for (m, p), members in by_mp.items():
            arr = np.asarray([r[k] for r in members], dtype=np.float64)
            vals[(p, m)] = float(arr.mean())
            errs[(p, m)] = float(arr.std(ddof=0))
        path = out / fname
        path.write_text(grouped_bar_svg(label, prompts, models, vals, errs), encoding="utf-8")
        written.append(path)

    fst_order = PREFERRED_CATEGORY_ORDERS["fst"]
    fst_pct: dict[tuple[str, str], float] = {}
    bar_names = []
    for (m, p), members in sorted(by_mp.items()):
        name = f"{m}/{p}"
        bar_names.append(name)
        for cat in fst_order:
            cnt = sum(1 for r in members if r["fst"] == cat)
            fst_pct[(name, cat)] = cnt / len(members) * 100.0
    path = out / "F6_fst_stacked.svg"
    path.write_text(stacked_bar_svg(
        "Fitzpatrick type distribution (%)", bar_names, fst_order, fst_pct),
        encoding="utf-8")
    written.append(path)
    return written


def scrape_svg_values(svg_text: str, attr: str = "data-value") -> dict[tuple[str, str], float]:
    """Recover plotted values from the data attributes (test support)."""
    import re
    out: dict[tuple[str, str], float] = {}
    for m in re.finditer(r'<(?:rect|line)\b[^>]*>', svg_text):
        tag = m.group(0)
        kv = dict(re.findall(r'(data-[a-z]+)="([^"]*)"', tag))
        if attr in kv:
            key = (kv.get("data-group", ""), kv.get("data-series", kv.get("data-segment", "")))
            out[key] = float(kv[attr])
    return out


def write_test_results(results: dict[str, dict], out_dir: str | Path) -> list[Path]:
    """Hypothesis-test output: exact JSON plus a Markdown rendering."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "tests.json"
    json_path.write_text(json.dumps(results, indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
    lines = ["# Hypothesis tests", "", "| test | statistic | df | p |",
             "| --- | --- | --- | --- |"]
    for name in sorted(results):
        r = results[name]
        df = "" if r.get("df") is None else f"{r['df']:.4g}"
        lines.append(f"| {name} ({r['method']}) | {r['statistic']:.4f} | {df} "
                     f"| {format_p_value(r['p_value'])} |")
    md_path = out / "tests.md"
    md_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return [json_path, md_path]
