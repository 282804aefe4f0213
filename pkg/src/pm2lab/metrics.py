"""Detection performance and group fairness measurement.

F1 is computed per label from frame-level confusion counts, overall and
conditioned on the binary group attribute. Equal opportunity is the ratio
of the lower to the higher group-conditional F1 (1 is perfectly fair).
Statistical parity difference is the absolute gap between the groups'
predicted-positive rates (0 is perfectly fair). Undefined cases never
inflate a score: an F1 with an empty denominator is 0 and flagged, an
equal-opportunity ratio with both groups at 0 is 1 and flagged, and both
fairness metrics are flagged when a group has no samples. Flagged labels
are skipped in the summary means and the skip counts are reported.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import ModelParams, predict

REPORT_HEADER = (
    "au,f1,f1_g0,f1_g1,eo,spd,tp,fp,fn,tn,"
    "tp0,fp0,fn0,tn0,tp1,fp1,fn1,tn1"
)


class MetricValue(NamedTuple):
    value: float
    defined: bool


def _check_binary(name, values):
    a = np.asarray(values)
    if not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name}: inputs must be binary 0/1 vectors")
    return a.astype(np.int64)


def confusion(preds, labels):
    """(tp, fp, fn, tn) for one label."""
    p = _check_binary("confusion", preds)
    y = _check_binary("confusion", labels)
    if p.shape != y.shape:
        raise ValueError(f"confusion: length mismatch {p.shape} vs {y.shape}")
    tp = int(np.sum((p == 1) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    tn = int(np.sum((p == 0) & (y == 0)))
    return tp, fp, fn, tn


def f1_from_counts(tp, fp, fn) -> MetricValue:
    denom = 2 * tp + fp + fn
    if denom == 0:
        return MetricValue(0.0, False)
    return MetricValue(2.0 * tp / denom, True)


def f1(preds, labels) -> MetricValue:
    """2TP / (2TP + FP + FN); 0 with a cleared flag when the denominator is 0."""
    p = _check_binary("f1", preds)
    y = _check_binary("f1", labels)
    if p.shape != y.shape:
        raise ValueError(f"f1: length mismatch {p.shape} vs {y.shape}")
    tp, fp, fn, _ = confusion(p, y)
    return f1_from_counts(tp, fp, fn)


def equal_opportunity(f0: float, f1_: float) -> MetricValue:
    """min/max of the two group-conditional F1 scores; 1 flagged when both are 0."""
    for v in (f0, f1_):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"equal_opportunity: scores must lie in [0, 1], got {v}")
    hi = max(f0, f1_)
    if hi == 0.0:
        return MetricValue(1.0, False)
    return MetricValue(min(f0, f1_) / hi, True)


def statistical_parity_difference(rate0: float, rate1: float) -> MetricValue:
    """Absolute gap between the groups' predicted-positive rates."""
    for v in (rate0, rate1):
        if not 0.0 <= v <= 1.0:
            raise ValueError(
                f"statistical_parity_difference: rates must lie in [0, 1], got {v}"
            )
    return MetricValue(abs(rate1 - rate0), True)


@dataclass
class MetricsReport:
    n_aus: int
    per_au_f1: np.ndarray          # (n,)
    per_au_f1_defined: np.ndarray
    macro_f1: float
    per_au_group_f1: np.ndarray    # (n, 2), columns are groups 0 and 1
    per_au_group_f1_defined: np.ndarray
    per_au_eo: np.ndarray
    per_au_eo_defined: np.ndarray
    per_au_spd: np.ndarray
    per_au_spd_defined: np.ndarray
    mean_eo: float
    mean_spd: float
    eo_skipped: int
    spd_skipped: int
    counts: np.ndarray             # (n, 4) tp fp fn tn
    group_counts: np.ndarray       # (n, 2, 4)


def _flag_mean(values, defined):
    kept = values[defined]
    if kept.size == 0:
        return float("nan"), int(values.size)
    return float(kept.mean()), int(values.size - kept.size)


def report_from_predictions(preds, labels, groups) -> MetricsReport:
    """Aggregate confusion counts and fairness metrics per label."""
    p = _check_binary("evaluate", preds)
    y = _check_binary("evaluate", labels)
    g = _check_binary("evaluate", groups)
    if p.shape != y.shape or p.ndim != 2 or g.shape != (p.shape[0],):
        raise ValueError("evaluate: predictions, labels and groups do not line up")
    n = p.shape[1]
    masks = [g == 0, g == 1]

    per_f1 = np.zeros(n)
    per_f1_def = np.zeros(n, dtype=bool)
    grp_f1 = np.zeros((n, 2))
    grp_f1_def = np.zeros((n, 2), dtype=bool)
    eo = np.zeros(n)
    eo_def = np.zeros(n, dtype=bool)
    spd = np.zeros(n)
    spd_def = np.zeros(n, dtype=bool)
    counts = np.zeros((n, 4), dtype=np.int64)
    grp_counts = np.zeros((n, 2, 4), dtype=np.int64)

    for i in range(n):
        counts[i] = confusion(p[:, i], y[:, i])
        per_f1[i], per_f1_def[i] = f1_from_counts(*counts[i, :3])
        rates = [0.0, 0.0]
        for a in (0, 1):
            grp_counts[i, a] = confusion(p[masks[a], i], y[masks[a], i])
            grp_f1[i, a], grp_f1_def[i, a] = f1_from_counts(*grp_counts[i, a, :3])
            if masks[a].any():
                rates[a] = float(p[masks[a], i].mean())
        both_present = masks[0].any() and masks[1].any()
        eo_val = equal_opportunity(grp_f1[i, 0], grp_f1[i, 1])
        eo[i] = eo_val.value
        eo_def[i] = eo_val.defined and both_present
        if both_present:
            spd[i], spd_def[i] = statistical_parity_difference(rates[0], rates[1])
        else:
            spd[i], spd_def[i] = 0.0, False

    mean_eo, eo_skipped = _flag_mean(eo, eo_def)
    mean_spd, spd_skipped = _flag_mean(spd, spd_def)
    return MetricsReport(
        n_aus=n,
        per_au_f1=per_f1,
        per_au_f1_defined=per_f1_def,
        macro_f1=float(per_f1.mean()),
        per_au_group_f1=grp_f1,
        per_au_group_f1_defined=grp_f1_def,
        per_au_eo=eo,
        per_au_eo_defined=eo_def,
        per_au_spd=spd,
        per_au_spd_defined=spd_def,
        mean_eo=mean_eo,
        mean_spd=mean_spd,
        eo_skipped=eo_skipped,
        spd_skipped=spd_skipped,
        counts=counts,
        group_counts=grp_counts,
    )


def evaluate(params: ModelParams, samples) -> MetricsReport:
    """Predict with the averaged heads and measure performance and fairness."""
    samples = list(samples)
    if not samples:
        raise ValueError("evaluate: no samples")
    if any(s.labels is None for s in samples):
        raise ValueError("evaluate: all samples must be labeled")
    x = np.stack([s.features for s in samples])
    y = np.stack([s.labels for s in samples])
    g = np.array([s.group for s in samples])
    _, preds = predict(params, x)
    return report_from_predictions(preds, y, g)


# -- report files ---------------------------------------------------------------


def write_report(report: MetricsReport, csv_path, meta: dict | None = None) -> None:
    """Write the per-label CSV (4 decimals) plus a full-precision JSON sidecar."""
    lines = [REPORT_HEADER]
    for i in range(report.n_aus):
        row = [
            str(i + 1),
            f"{report.per_au_f1[i]:.4f}",
            f"{report.per_au_group_f1[i, 0]:.4f}",
            f"{report.per_au_group_f1[i, 1]:.4f}",
            f"{report.per_au_eo[i]:.4f}",
            f"{report.per_au_spd[i]:.4f}",
            *[str(int(v)) for v in report.counts[i]],
            *[str(int(v)) for v in report.group_counts[i, 0]],
            *[str(int(v)) for v in report.group_counts[i, 1]],
        ]
        lines.append(",".join(row))
    summary = [
        "mean",
        f"{report.macro_f1:.4f}",
        f"{report.per_au_group_f1[:, 0].mean():.4f}",
        f"{report.per_au_group_f1[:, 1].mean():.4f}",
        f"{report.mean_eo:.4f}",
        f"{report.mean_spd:.4f}",
        *[str(int(v)) for v in report.counts.sum(axis=0)],
        *[str(int(v)) for v in report.group_counts[:, 0].sum(axis=0)],
        *[str(int(v)) for v in report.group_counts[:, 1].sum(axis=0)],
    ]
    lines.append(",".join(summary))
    with open(csv_path, "w") as f:
        f.write("\n".join(lines) + "\n")
    payload = {
        "n_aus": report.n_aus,
        "per_au_f1": list(report.per_au_f1),
        "per_au_f1_defined": [bool(v) for v in report.per_au_f1_defined],
        "macro_f1": report.macro_f1,
        "per_au_group_f1": [list(r) for r in report.per_au_group_f1],
        "per_au_group_f1_defined": [[bool(v) for v in r]
                                    for r in report.per_au_group_f1_defined],
        "per_au_eo": list(report.per_au_eo),
        "per_au_eo_defined": [bool(v) for v in report.per_au_eo_defined],
        "per_au_spd": list(report.per_au_spd),
        "per_au_spd_defined": [bool(v) for v in report.per_au_spd_defined],
        "mean_eo": report.mean_eo,
        "mean_spd": report.mean_spd,
        "eo_skipped": report.eo_skipped,
        "spd_skipped": report.spd_skipped,
        "counts": [[int(v) for v in r] for r in report.counts],
        "group_counts": [[[int(v) for v in r] for r in g]
                         for g in report.group_counts],
        "meta": meta or {},
    }
    with open(_sidecar_path(csv_path), "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")


def _sidecar_path(csv_path) -> str:
    text = str(csv_path)
    return (text[: -len(".csv")] if text.endswith(".csv") else text) + ".json"


def read_report_sidecar(path) -> dict:
    with open(path) as f:
        return json.load(f)
