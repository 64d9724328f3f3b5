"""CSV formatter: metric reports and leaderboards."""

import csv
import io
from collections.abc import Mapping, Sequence
from typing import Any

from core.domain.constants import AGGREGATE_ROW_NAME, METRIC_CSV_HEADER, REPORT_DECIMALS
from core.domain.types import LeaderboardEntry

from .base_formatter import BaseFormatter

METRIC_COLUMNS = METRIC_CSV_HEADER[1:]


def _fmt(value: float) -> str:
    return f"{value:.{REPORT_DECIMALS}f}"


def render_report_csv(rows: Sequence[Mapping[str, Any]], aggregate: Mapping[str, Any]) -> str:
    """``name,dsc,miou,jsc,score`` rows with a final AGGREGATE row."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(METRIC_CSV_HEADER)
    for row in rows:
        writer.writerow([row["name"], *(_fmt(row[c]) for c in METRIC_COLUMNS)])
    writer.writerow([AGGREGATE_ROW_NAME, *(_fmt(aggregate[c]) for c in METRIC_COLUMNS)])
    return buffer.getvalue()


def render_leaderboard_csv(entries: Sequence[LeaderboardEntry]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["rank", "name", "score"])
    for entry in entries:
        writer.writerow([entry["rank"], entry["name"], _fmt(entry["score"])])
    return buffer.getvalue()


class CsvFormatter(BaseFormatter):
    """Renders the tabular part of a result; other results become key,value lines."""

    def format(self, result: Mapping[str, Any]) -> str:
        if "rows" in result and "aggregate" in result:
            return render_report_csv(result["rows"], result["aggregate"])
        if "leaderboard" in result:
            return render_leaderboard_csv(result["leaderboard"])

        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["key", "value"])
        for key, value in result.items():
            writer.writerow([key, value])
        return buffer.getvalue()
