"""Aggregation of externally produced evaluation results.

Ingests result tables (this package never runs models), computes
robustness deltas against clean scores, grouped means, and tie-corrected
Kendall rank correlations between model rankings.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GROUP_KEYS = ("model", "corruption", "severity", "metric")


@dataclass(frozen=True)
class ResultRow:
    model: str
    corruption: str
    severity: str
    metric: str
    value: float


@dataclass
class ResultTable:
    rows: list[ResultRow]

    def __post_init__(self) -> None:
        seen = set()
        for row in self.rows:
            key = (row.model, row.corruption, row.severity, row.metric)
            if key in seen:
                raise ValueError(f"duplicate result key {key}")
            seen.add(key)
            if not math.isfinite(row.value) or not 0.0 <= row.value <= 100.0:
                raise ValueError(f"value out of [0, 100] for {key}: {row.value}")

    @classmethod
    def from_csv(cls, path: str | Path) -> "ResultTable":
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.append(
                    ResultRow(
                        model=rec["model"],
                        corruption=rec["corruption"],
                        severity=rec["severity"],
                        metric=rec["metric"],
                        value=float(rec["value"]),
                    )
                )
        return cls(rows)


def read_clean_csv(path: str | Path) -> dict[tuple[str, str], float]:
    clean = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            clean[(rec["model"], rec["metric"])] = float(rec["clean_value"])
    return clean


@dataclass(frozen=True)
class RankCorrelation:
    tau_b: float
    p_value: float
    n: int


def _tie_sums(values) -> tuple[float, float, float]:
    counts: dict = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    s1 = sum(t * (t - 1) / 2.0 for t in counts.values())
    s2 = sum(t * (t - 1) * (2 * t + 5) for t in counts.values())
    s3 = sum(t * (t - 1) * (t - 2) for t in counts.values())
    return s1, s2, s3


def _count_inversions(seq: list) -> int:
    # Strict inversions (left > right) by merge counting.
    if len(seq) < 2:
        return 0
    mid = len(seq) // 2
    left, right = seq[:mid], seq[mid:]
    inv = _count_inversions(left) + _count_inversions(right)
    merged = []
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            inv += len(left) - i
            merged.append(right[j])
            j += 1
    seq[:] = merged + left[i:] + right[j:]
    return inv


def kendall_tau_b(x, y) -> RankCorrelation:
    """Tie-corrected Kendall tau_b with a normal-approximation p-value.

    The statistic is computed by merge counting after a (x, y) sort, not
    by explicit pair enumeration; the variance uses the standard tie
    correction.  All-tied input on either side has no defined correlation.
    """
    x = list(x)
    y = list(y)
    n = len(x)
    if n != len(y):
        raise ValueError("x and y must have equal length")
    if n < 2:
        raise ValueError("need at least two observations")
    order = sorted(range(n), key=lambda i: (x[i], y[i]))
    xs = [x[i] for i in order]
    ys = [y[i] for i in order]
    n0 = n * (n - 1) / 2.0
    xtie, xv, xd = _tie_sums(xs)
    ytie, yv, yd = _tie_sums(ys)
    jtie, _, _ = _tie_sums(zip(xs, ys))
    if xtie == n0 or ytie == n0:
        raise ValueError("all values tied on one side; tau_b is undefined")
    dis = _count_inversions(list(ys))
    s = n0 - xtie - ytie + jtie - 2.0 * dis
    tau = s / math.sqrt((n0 - xtie) * (n0 - ytie))
    var = (n * (n - 1) * (2 * n + 5) - xv - yv) / 18.0
    var += (2.0 * xtie) * (2.0 * ytie) / (2.0 * n * (n - 1))
    if n > 2:
        var += xd * yd / (9.0 * n * (n - 1) * (n - 2))
    z = s / math.sqrt(var) if var > 0 else 0.0
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return RankCorrelation(tau_b=float(tau), p_value=float(min(1.0, p)), n=n)


def robustness_delta(table: ResultTable, clean: dict[tuple[str, str], float]) -> dict:
    """Per-row (corrupted - clean) deltas plus per-model summary means."""
    rows = []
    for r in table.rows:
        key = (r.model, r.metric)
        if key not in clean:
            raise KeyError(f"no clean entry for model {r.model!r} metric {r.metric!r}")
        rows.append(
            {
                "model": r.model,
                "corruption": r.corruption,
                "severity": r.severity,
                "metric": r.metric,
                "delta": r.value - clean[key],
            }
        )
    summary = []
    groups: dict[tuple[str, str], list[float]] = {}
    for row in rows:
        groups.setdefault((row["model"], row["metric"]), []).append(row["delta"])
    for (model, metric), deltas in sorted(groups.items()):
        summary.append(
            {"model": model, "metric": metric, "mean_delta": float(np.mean(deltas))}
        )
    return {"rows": rows, "summary": summary}


def aggregate(table: ResultTable, group_by) -> list[dict]:
    """Mean value per group; `group_by` is a list of key names ([] = overall)."""
    if not table.rows:
        raise ValueError("empty result table")
    group_by = list(group_by)
    for key in group_by:
        if key not in GROUP_KEYS:
            raise ValueError(f"unknown grouping key {key!r}; choose from {GROUP_KEYS}")
    groups: dict[tuple, list[float]] = {}
    for r in table.rows:
        key = tuple(getattr(r, k) for k in group_by)
        groups.setdefault(key, []).append(r.value)
    out = []
    for key, values in sorted(groups.items(), key=lambda kv: tuple(map(str, kv[0]))):
        rec = dict(zip(group_by, key))
        rec["mean_value"] = float(np.mean(values))
        rec["count"] = len(values)
        out.append(rec)
    return out


def rank_correlations(
    table: ResultTable, baseline_corruption: str, metric: str = "accuracy"
) -> list[dict]:
    """tau_b between the baseline's model ranking and every other corruption.

    Rankings are compared per severity on the models present in both; the
    per-severity correlations are also averaged per corruption.
    """
    by_key: dict[tuple[str, str], dict[str, float]] = {}
    for r in table.rows:
        if r.metric != metric:
            continue
        by_key.setdefault((r.corruption, r.severity), {})[r.model] = r.value
    out = []
    corruptions = sorted({c for c, _ in by_key if c != baseline_corruption})
    for corruption in corruptions:
        severities = sorted(s for c, s in by_key if c == corruption)
        for severity in severities:
            base = by_key.get((baseline_corruption, severity))
            other = by_key[(corruption, severity)]
            if base is None:
                continue
            models = sorted(set(base) & set(other))
            if len(models) < 2:
                continue
            rc = kendall_tau_b([base[m] for m in models], [other[m] for m in models])
            out.append(
                {
                    "corruption": corruption,
                    "severity": severity,
                    "tau_b": rc.tau_b,
                    "p_value": rc.p_value,
                    "n_models": rc.n,
                }
            )
    return out
