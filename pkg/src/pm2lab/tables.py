"""Aggregate per-cell reports into paper-style tables.

Every number shown is read from a report sidecar field (per-label vectors
and their report-level averages); the only arithmetic done here is the
mean and standard deviation across seeds and the percent formatting.
"""

from __future__ import annotations

import glob
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import read_report_sidecar
from .trainer import MODES

TABLE_KINDS = ("f1", "eo", "spd", "ablation")

# report fields backing each table kind: (per-label vector, report average)
_KIND_FIELDS = {
    "f1": ("per_au_f1", "macro_f1"),
    "eo": ("per_au_eo", "mean_eo"),
    "spd": ("per_au_spd", "mean_spd"),
    "ablation": ("per_au_f1", "macro_f1"),
}

# row order of the loss-weight ablation grid
_ABLATION_ORDER = (
    (0.0, 0.0),
    (1.0, 0.0), (0.3, 0.0),
    (0.0, 1.0), (0.0, 0.5),
    (1.0, 1.0), (1.0, 0.5), (0.3, 1.0), (0.3, 0.5),
)


@dataclass
class TableRow:
    label: str
    alpha: float
    beta: float
    mean: np.ndarray   # per-label means followed by the average column
    std: np.ndarray
    n_seeds: int


@dataclass
class Table:
    kind: str
    n_aus: int
    rows: list

    @property
    def columns(self):
        return [f"AU{i + 1}" for i in range(self.n_aus)] + ["Avg."]


def _load_reports(reports_glob):
    paths = sorted(glob.glob(str(reports_glob), recursive=True))
    reports = [read_report_sidecar(p) for p in paths]
    if not reports:
        raise ValueError(f"no reports match {reports_glob!r}")
    n_aus = {r["n_aus"] for r in reports}
    if len(n_aus) > 1:
        raise ValueError(f"mixed n_aus across reports: {sorted(n_aus)}")
    return reports, n_aus.pop()


def build_table(reports_glob, kind: str) -> Table:
    if kind not in TABLE_KINDS:
        raise ValueError(f"unknown table kind {kind!r}")
    reports, n_aus = _load_reports(reports_glob)
    vec_field, avg_field = _KIND_FIELDS[kind]

    if kind == "ablation":
        reports = [r for r in reports if r["meta"].get("cell", "").startswith("ablation_")]
        if not reports:
            raise ValueError("no ablation cells among the matched reports")
        keyed = {}
        for r in reports:
            keyed.setdefault((r["meta"]["alpha"], r["meta"]["beta"]), []).append(r)
        ordered = [(f"{mode_label(a, b)}", a, b, keyed[(a, b)])
                   for a, b in _ABLATION_ORDER if (a, b) in keyed]
        extras = sorted(k for k in keyed if k not in set(_ABLATION_ORDER))
        ordered += [(mode_label(a, b), a, b, keyed[(a, b)]) for a, b in extras]
    else:
        reports = [r for r in reports if not r["meta"].get("cell", "").startswith("ablation_")]
        if not reports:
            raise ValueError("no non-ablation cells among the matched reports")
        keyed = {}
        for r in reports:
            keyed.setdefault(r["meta"].get("cell", r["meta"].get("mode", "?")), []).append(r)
        order = [m for m in MODES if m in keyed] + sorted(set(keyed) - set(MODES))
        ordered = [(name, keyed[name][0]["meta"].get("alpha", float("nan")),
                    keyed[name][0]["meta"].get("beta", float("nan")), keyed[name])
                   for name in order]

    rows = []
    for label, alpha, beta, group in ordered:
        values = np.array([[*r[vec_field], r[avg_field]] for r in group], dtype=float)
        rows.append(TableRow(
            label=label, alpha=alpha, beta=beta,
            mean=values.mean(axis=0), std=values.std(axis=0),
            n_seeds=len(group),
        ))
    return Table(kind=kind, n_aus=n_aus, rows=rows)


def mode_label(alpha: float, beta: float) -> str:
    from .experiment import mode_for_weights

    return mode_for_weights(alpha, beta)


def _cell_text(mean: float, std: float) -> str:
    return f"{100 * mean:.1f}±{100 * std:.1f}"


def render_text(table: Table) -> str:
    show_weights = table.kind == "ablation"
    header = ["cell"] + (["alpha", "beta"] if show_weights else []) + table.columns
    body = []
    for row in table.rows:
        cells = [row.label]
        if show_weights:
            cells += [f"{row.alpha:g}", f"{row.beta:g}"]
        cells += [_cell_text(m, s) for m, s in zip(row.mean, row.std)]
        body.append(cells)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    seeds = max((r.n_seeds for r in table.rows), default=0)
    lines = [f"{table.kind} (%), mean±std over {seeds} seed(s)"]
    for cells in [header] + body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip())
    return "\n".join(lines) + "\n"


def render_csv(table: Table) -> str:
    show_weights = table.kind == "ablation"
    header = ["cell"] + (["alpha", "beta"] if show_weights else [])
    for col in table.columns:
        header += [f"{col}_mean", f"{col}_std"]
    header.append("n_seeds")
    lines = [",".join(header)]
    for row in table.rows:
        cells = [row.label]
        if show_weights:
            cells += [f"{row.alpha:g}", f"{row.beta:g}"]
        for m, s in zip(row.mean, row.std):
            cells += [f"{100 * m:.1f}", f"{100 * s:.1f}"]
        cells.append(str(row.n_seeds))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_table(table: Table, out_dir, figures: bool = True) -> dict:
    """Write the text, CSV and figure renderings; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = out / f"table_{table.kind}"
    paths = {"txt": base.with_suffix(".txt"), "csv": base.with_suffix(".csv")}
    paths["txt"].write_text(render_text(table))
    paths["csv"].write_text(render_csv(table))
    if figures:
        from .figures import ablation_heatmap, metric_bars

        paths["png"] = base.with_suffix(".png")
        if table.kind == "ablation":
            ablation_heatmap(table, paths["png"])
        else:
            metric_bars(table, paths["png"])
    return paths
