"""Human-facing report rendering: aligned tables, delimited files, figures.

Percentages show one decimal place in tables; the JSON output keeps full
precision. Figures are rendered with matplotlib (Agg) next to the delimited
output.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import MetricsSummary


def _pct(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.1f}"


def _mean(values: Sequence[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


def metrics_table(summary: MetricsSummary, facts_format: str) -> str:
    """Aligned text table with Format / EA / FVR / Cc columns, one row per
    scope (overall plus each split)."""
    header = ("Format", "Scope", "EA", "FVR", "FI", "Cc")
    rows = [header]
    scopes = [("overall", summary.overall)] + sorted(summary.per_split.items())
    for scope, m in scopes:
        rows.append((facts_format, scope,
                     _pct(m.entity_accuracy if summary.with_gold else None),
                     _pct(m.fact_verification_rate),
                     _pct(m.factual_improvement),
                     _pct(_mean(m.coherence_annotations))))
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
             for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def metrics_tsv(summary: MetricsSummary, facts_format: str) -> str:
    cols = ["format", "scope", "records", "NEC", "NLC", "NAC", "NRC", "NCV", "NTC",
            "FVR", "baseline_hallucinations", "corrected_hallucinations", "FI"]
    if summary.with_gold:
        cols += ["NME", "NHC", "NTE", "EA"]
    lines = ["\t".join(cols)]
    scopes = [("overall", summary.overall)] + sorted(summary.per_split.items())
    for scope, m in scopes:
        row = dict(m.as_dict(summary.with_gold), format=facts_format, scope=scope)
        lines.append("\t".join("" if row.get(c) is None else str(row.get(c))
                               for c in cols))
    return "\n".join(lines) + "\n"


def comparison_tsv(rows: List[dict]) -> str:
    lines = ["\t".join(("format", "EA", "FVR", "Cc"))]
    for row in rows:
        lines.append("\t".join(
            "" if row[c] is None else (row[c] if c == "format" else f"{row[c]:.6f}")
            for c in ("format", "EA", "FVR", "Cc")))
    return "\n".join(lines) + "\n"


def comparison_table(rows: List[dict]) -> str:
    header = ("Format", "EA", "FVR", "Cc")
    body = [(r["format"], _pct(r["EA"]), _pct(r["FVR"]), _pct(r["Cc"])) for r in rows]
    all_rows = [header] + body
    widths = [max(len(row[i]) for row in all_rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
             for row in all_rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def save_metrics_figures(summary: MetricsSummary, out_dir) -> List[Path]:
    """Claim-count and rate bar charts; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(6, 4))
    counts = summary.overall
    labels = ["NEC", "NLC", "NAC", "NRC", "NCV"]
    values = [counts.nec, counts.nlc, counts.nac, counts.nrc, counts.ncv]
    ax.bar(labels, values, color="#4878cf")
    ax.set_ylabel("count")
    ax.set_title("Claim decomposition")
    fig.tight_layout()
    path = out / "claim_counts.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    names, values = [], []
    for name, value in (("EA", counts.entity_accuracy if summary.with_gold else None),
                        ("FVR", counts.fact_verification_rate),
                        ("FI", counts.factual_improvement)):
        if value is not None:
            names.append(name)
            values.append(value)
    ax.bar(names, values, color="#6acc65")
    ax.set_ylim(0, 100)
    ax.set_ylabel("percent")
    ax.set_title("Summary rates")
    fig.tight_layout()
    path = out / "summary_rates.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)
    return written


def save_comparison_figure(rows: List[dict], path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    formats = [r["format"] for r in rows]
    fvr = [r["FVR"] or 0.0 for r in rows]
    bars = ax.bar(formats, fvr, color="#d65f5f")
    if any(r["EA"] is not None for r in rows):
        ax.bar([f"{f} (EA)" for f in formats],
               [r["EA"] or 0.0 for r in rows], color="#4878cf")
    ax.set_ylim(0, 100)
    ax.set_ylabel("FVR (%)")
    ax.set_title("Fact verification rate by representation format")
    ax.bar_label(bars, fmt="%.1f")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path
