"""Report rendering: canonical plain text, CSV, and LaTeX table bodies.

The plain form is the wire format: a versioned key/value table whose
bytes are identical for identical inputs, shared by the CLI and the
submission service.
"""

from __future__ import annotations

import io
import csv

from fibench import metrics
from fibench.harness.evaluate import MetricsReport

FORMATS = ("plain", "csv", "latex")
_OCC_COLUMNS = ("all", "occ0", "occ1", "occ2")


def _fmt_value(value: float | int) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return f"{value:.6f}"


def render_report(report: MetricsReport | list[MetricsReport], fmt: str = "plain") -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")
    reports = report if isinstance(report, list) else [report]
    if fmt == "plain":
        if len(reports) != 1:
            return "\n".join(render_report(r, "plain") for r in reports)
        return _render_plain(reports[0])
    if fmt == "csv":
        if len(reports) != 1:
            return "".join(render_report(r, "csv") for r in reports)
        return _render_csv(reports[0])
    return _render_latex(reports)


def _render_plain(report: MetricsReport) -> str:
    lines = [
        f"fibench-report {report.schema_version}",
        f"method {report.method}",
        f"ensembling {'true' if report.ensembling else 'false'}",
        f"toolkit {report.toolkit_version}",
    ]
    for key, value in report.values.items():
        lines.append(f"{key} {_fmt_value(value)}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> MetricsReport:
    """Inverse of the plain rendering; rejects unknown schema versions."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("fibench-report "):
        raise ValueError("not a fibench report")
    version = int(lines[0].split()[1])
    if version != 1:
        raise ValueError(f"unsupported report schema version {version}")
    header = {"method": "", "ensembling": False, "toolkit": ""}
    values: dict[str, float | int] = {}
    for line in lines[1:]:
        key, _, raw = line.partition(" ")
        if key in ("method", "toolkit"):
            header[key] = raw
        elif key == "ensembling":
            header["ensembling"] = raw == "true"
        else:
            values[key] = int(raw) if raw.lstrip("-").isdigit() else float(raw)
    return MetricsReport(
        method=str(header["method"]),
        ensembling=bool(header["ensembling"]),
        toolkit_version=str(header["toolkit"]),
        schema_version=version,
        values=values,
    )


def _render_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    writer.writerow(["schema_version", report.schema_version])
    writer.writerow(["method", report.method])
    writer.writerow(["ensembling", "true" if report.ensembling else "false"])
    writer.writerow(["toolkit", report.toolkit_version])
    for key, value in report.values.items():
        writer.writerow([key, _fmt_value(value)])
    return buf.getvalue()


def _report_tiers(reports: list[MetricsReport]) -> list[str]:
    tiers: list[str] = []
    for rep in reports:
        for key in rep.values:
            tier = key.split(".", 1)[0]
            if tier not in tiers:
                tiers.append(tier)
    return tiers


def _render_latex(reports: list[MetricsReport]) -> str:
    """Tabular body with rank / all / 0-occ / 1-occ / 2-occ columns per tier."""
    tiers = _report_tiers(reports)
    ranks: dict[str, list[int | None]] = {}
    for tier in tiers:
        scores = [rep.sort_key(tier) for rep in reports]
        present = [s for s in scores if s is not None]
        rank_present = metrics.competition_ranks(present) if present else []
        tier_ranks: list[int | None] = []
        it = iter(rank_present)
        for s in scores:
            tier_ranks.append(next(it) if s is not None else None)
        ranks[tier] = tier_ranks

    lines = []
    for row, rep in enumerate(reports):
        cells = [rep.method.replace("_", r"\_")]
        for tier in tiers:
            rank = ranks[tier][row]
            cells.append("-" if rank is None else str(rank))
            for col in _OCC_COLUMNS:
                key = f"{tier}.single.{col}.psnr_star"
                value = rep.values.get(key)
                cells.append("-" if value is None else f"{value:.2f}")
        lines.append(" & ".join(cells) + r" \\")
    return "\n".join(lines) + "\n"
