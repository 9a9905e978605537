"""Paper-style regression tables: Markdown for reading, CSV for machines.

One table per outcome, one column per trait-source family, rows for the
intercept, the five traits, and the founder count. Cells read "coef (se)"
with significance stars; the CSV twin carries full-precision values so a
round trip loses nothing.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence

from .calibration import TRAITS
from .errors import InputFormatError
from .learners import FAMILIES
from .regression import FitResult, TERMS

REPORT_CSV_HEADER = [
    "outcome",
    "trait_source",
    "term",
    "coefficient",
    "std_error",
    "p_value",
    "stars",
    "fit_statistic_name",
    "fit_statistic",
    "n",
]

VERDICT_CSV_HEADER = ["outcome", "term", "verdict"]


def significance_stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def format_cell(coefficient: float, std_error: float, p_value: float) -> str:
    return f"{coefficient:.2f}{significance_stars(p_value)} ({std_error:.2f})"


def render_outcome_table(outcome: str, fits: Mapping) -> str:
    """One Markdown table over the four trait-source columns."""
    sources = [f for f in FAMILIES if f in fits]
    lines = [f"### Outcome: {outcome}", ""]
    lines.append("| Term | " + " | ".join(sources) + " |")
    lines.append("|" + "---|" * (len(sources) + 1))
    for term in TERMS:
        cells = []
        for source in sources:
            fit = fits[source]
            idx = fit.term_index(term)
            cells.append(
                format_cell(fit.coefficients[idx], fit.standard_errors[idx], fit.p_values[idx])
            )
        lines.append(f"| {term} | " + " | ".join(cells) + " |")
    stat_name = fits[sources[0]].fit_statistic_name
    stat_cells = [f"{fits[s].fit_statistic:.3f}" for s in sources]
    n_cells = [str(fits[s].n) for s in sources]
    lines.append(f"| {stat_name} | " + " | ".join(stat_cells) + " |")
    lines.append("| N | " + " | ".join(n_cells) + " |")
    lines.append("")
    lines.append("Significance: * p<0.1, ** p<0.05, *** p<0.01")
    lines.append("")
    return "\n".join(lines)


def render_verdicts(outcome: str, verdicts: Mapping) -> str:
    lines = [f"### Ensemble verdicts: {outcome}", "", "| Term | Verdict |", "|---|---|"]
    for term in TRAITS + ("n_founders",):
        if term in verdicts:
            lines.append(f"| {term} | {verdicts[term]} |")
    lines.append("")
    return "\n".join(lines)


def render_report(
    fits_by_outcome: Mapping, verdicts_by_outcome: Mapping | None = None
) -> str:
    """Full Markdown document across outcomes (insertion order preserved)."""
    parts = ["# Founder-trait outcome regressions", ""]
    for outcome, fits in fits_by_outcome.items():
        parts.append(render_outcome_table(outcome, fits))
        if verdicts_by_outcome and outcome in verdicts_by_outcome:
            parts.append(render_verdicts(outcome, verdicts_by_outcome[outcome]))
    return "\n".join(parts)


def report_csv_rows(fits_by_outcome: Mapping) -> list:
    rows = []
    for outcome, fits in fits_by_outcome.items():
        for source in FAMILIES:
            if source not in fits:
                continue
            fit = fits[source]
            for idx, term in enumerate(fit.terms):
                rows.append(
                    {
                        "outcome": outcome,
                        "trait_source": source,
                        "term": term,
                        "coefficient": repr(float(fit.coefficients[idx])),
                        "std_error": repr(float(fit.standard_errors[idx])),
                        "p_value": repr(float(fit.p_values[idx])),
                        "stars": significance_stars(float(fit.p_values[idx])),
                        "fit_statistic_name": fit.fit_statistic_name,
                        "fit_statistic": repr(float(fit.fit_statistic)),
                        "n": str(fit.n),
                    }
                )
    return rows


def write_report(
    fits_by_outcome: Mapping,
    verdicts_by_outcome: Mapping | None,
    markdown_path: Path | str,
    csv_path: Path | str,
):
    Path(markdown_path).write_text(render_report(fits_by_outcome, verdicts_by_outcome))
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_CSV_HEADER)
        writer.writeheader()
        writer.writerows(report_csv_rows(fits_by_outcome))


def write_verdicts_csv(verdicts_by_outcome: Mapping, path: Path | str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(VERDICT_CSV_HEADER)
        for outcome, verdicts in verdicts_by_outcome.items():
            for term, verdict in verdicts.items():
                writer.writerow([outcome, term, verdict])


def load_report_csv(path: Path | str) -> list:
    """Rows with numeric fields parsed back to floats/ints."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != REPORT_CSV_HEADER:
            raise InputFormatError("unexpected report CSV header", path=str(path), line=1)
        for row in reader:
            parsed = dict(row)
            for key in ("coefficient", "std_error", "p_value", "fit_statistic"):
                parsed[key] = float(row[key])
            parsed["n"] = int(row["n"])
            out.append(parsed)
    return out
