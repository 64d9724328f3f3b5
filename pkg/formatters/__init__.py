"""Output formatters for command results."""

from .base_formatter import BaseFormatter
from .csv_formatter import CsvFormatter, render_leaderboard_csv, render_report_csv
from .json_formatter import JsonFormatter
from .text_formatter import TextFormatter

__all__ = [
    "BaseFormatter",
    "CsvFormatter",
    "JsonFormatter",
    "TextFormatter",
    "render_leaderboard_csv",
    "render_report_csv",
]
