"""Report serialisation: canonical JSON and a leaderboard-style markdown table."""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from pathlib import Path

DASH = "–"

COLUMNS = (
    "Model", "Valid", "Unique", "Novel", "E_f", "E_hull", "RMSD", "Stable", "SUN", "Metastable", "MSUN",
    "JS", "MMD", "FID", "ElemDiv", "SGDiv", "SizeDiv", "SiteDiv", "Prod", "Res",
)


def to_json(report: Mapping) -> str:
    """Stable serialisation: insertion-ordered keys, no timestamps, trailing newline."""
    return json.dumps(report, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(report: Mapping, path: str | Path) -> None:
    Path(path).write_text(to_json(report))


def load_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def _num(x, digits: int = 1) -> str:
    return DASH if x is None else f"{x:.{digits}f}"


def _mean_std(mean, std, digits: int = 2) -> str:
    if mean is None:
        return DASH
    return f"{mean:.{digits}f}" if std is None else f"{mean:.{digits}f} ± {std:.{digits}f}"


def _with_count(rate, count) -> str:
    return DASH if rate is None else f"{rate:.1f} ({count})"


def _get(d, *path):
    for key in path:
        if d is None:
            return None
        d = d.get(key)
    return d


def markdown_row(report: Mapping) -> list[str]:
    funnel = report.get("funnel") or {}
    rates = funnel.get("rates") or {}
    energy = report.get("energy") or {}
    rmsd = energy.get("rmsd") or {}
    return [
        str(_get(report, "model", "name") or "model"),
        _num(_get(report, "validity", "rate")),
        _num(rates.get("unique")),
        _num(rates.get("novel")),
        _mean_std(energy.get("e_form_mean"), energy.get("e_form_std")),
        _mean_std(energy.get("e_hull_mean"), energy.get("e_hull_std")),
        _mean_std(rmsd.get("mean"), rmsd.get("std")),
        _num(rates.get("stable")),
        _with_count(rates.get("sun"), funnel.get("n_sun")),
        _num(rates.get("metastable")),
        _with_count(rates.get("msun"), funnel.get("n_msun")),
        _num(_get(report, "distribution", "js"), 3),
        _num(_get(report, "distribution", "mmd"), 3),
        _num(_get(report, "distribution", "fid"), 2),
        _num(_get(report, "diversity", "elem_div"), 3),
        _num(_get(report, "diversity", "sg_div"), 3),
        _num(_get(report, "diversity", "size_div"), 3),
        _num(_get(report, "diversity", "site_div"), 2),
        _num(_get(report, "hhi", "production_mean"), 2),
        _num(_get(report, "hhi", "reserve_mean"), 2),
    ]


def emit_markdown(reports: Mapping | Sequence[Mapping]) -> str:
    """Markdown table, one row per report; rates in percent, SUN/MSUN counts in parentheses."""
    if isinstance(reports, Mapping):
        reports = [reports]
    lines = [
        "| " + " | ".join(COLUMNS) + " |",
        "|" + "|".join(["---"] + ["---:"] * (len(COLUMNS) - 1)) + "|",
    ]
    for rep in reports:
        lines.append("| " + " | ".join(markdown_row(rep)) + " |")
    return "\n".join(lines) + "\n"
