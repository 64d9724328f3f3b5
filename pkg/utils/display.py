"""Rich console tables for run headers, parameter reports and leaderboards."""

from collections.abc import Mapping, Sequence
from typing import Any

from rich.console import Console
from rich.table import Table

from core.domain.types import DomainSummary, LeaderboardEntry, ParamReportDict


class RunDisplay:
    """Human-facing tables, written to stderr so stdout stays machine-readable."""

    def __init__(self, enabled: bool = True, console: Console | None = None) -> None:
        self.enabled = enabled
        self.console = console or Console(stderr=True)

    def show_run_header(self, header: Mapping[str, Any]) -> None:
        if not self.enabled:
            return
        table = Table(title="Run configuration", show_header=False)
        table.add_column("key", style="bold")
        table.add_column("value")
        for key, value in header.items():
            table.add_row(key, str(value))
        self.console.print(table)

    def show_param_report(self, report: ParamReportDict) -> None:
        if not self.enabled:
            return
        table = Table(title="Parameters")
        table.add_column("group")
        table.add_column("count", justify="right")
        table.add_column("trainable")
        table.add_column("lr", justify="right")
        for group in report["groups"]:
            table.add_row(
                group["name"],
                f"{group['count']:,}",
                "yes" if group["trainable"] else "no",
                f"{group['learning_rate']:g}",
            )
        table.add_row("total", f"{report['total']:,}", f"{report['trainable']:,}", "", style="bold")
        self.console.print(table)
        self.console.print(f"Trainable fraction: {report['trainable_fraction']:.2%}")

    def show_leaderboard(self, entries: Sequence[LeaderboardEntry]) -> None:
        if not self.enabled:
            return
        table = Table(title="Leaderboard")
        table.add_column("#", justify="right")
        table.add_column("team")
        table.add_column("score", justify="right")
        for entry in entries:
            table.add_row(str(entry["rank"]), entry["name"], f"{entry['score']:.4f}")
        self.console.print(table)

    def show_domain_summary(self, domains: Sequence[DomainSummary]) -> None:
        if not self.enabled:
            return
        table = Table(title="Per-domain results")
        for column in ("domain", "seen", "images", "dsc", "miou", "jsc", "score"):
            table.add_column(column, justify="left" if column in ("domain", "seen") else "right")
        for row in domains:
            table.add_row(
                row["domain_id"],
                "seen" if row["seen"] else "unseen",
                str(row["images"]),
                f"{row['dsc']:.4f}",
                f"{row['miou']:.4f}",
                f"{row['jsc']:.4f}",
                f"{row['score']:.4f}",
            )
        self.console.print(table)
