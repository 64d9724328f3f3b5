"""Leaderboard service: ranks teams from a scores CSV."""

import csv
from pathlib import Path
from typing import Any

from core.algorithms.metrics import rank_teams
from core.domain.constants import AGGREGATE_ROW_NAME
from core.domain.errors import IngestionError, InputValidationError
from utils.display import RunDisplay
from utils.logging_config import get_logger


def read_scores(path: Path) -> dict[str, float]:
    """Read ``name,...,score`` rows; an AGGREGATE row is ignored.

    Raises:
        IngestionError: If the file is missing or lacks name/score columns
        InputValidationError: If a score is not a number or a name repeats
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"Scores file not found: {path}")
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if not reader.fieldnames or not {"name", "score"} <= set(reader.fieldnames):
            raise IngestionError(f"{path}: expected 'name' and 'score' columns")
        scores: dict[str, float] = {}
        for line_number, row in enumerate(reader, 2):
            name = row["name"]
            if name == AGGREGATE_ROW_NAME:
                continue
            if name in scores:
                raise InputValidationError(f"{path}:{line_number}: duplicate team {name!r}")
            try:
                scores[name] = float(row["score"])
            except (TypeError, ValueError) as e:
                raise InputValidationError(
                    f"{path}:{line_number}: score {row['score']!r} is not a number"
                ) from e
    return scores


class LeaderboardService:
    """Service for rank-cmd."""

    def __init__(self, display: RunDisplay | None = None) -> None:
        self.display = display or RunDisplay(enabled=False)
        self.logger = get_logger(__name__)

    def rank(self, scores_path: Path) -> dict[str, Any]:
        scores = read_scores(scores_path)
        leaderboard = rank_teams(scores)
        self.display.show_leaderboard(leaderboard)
        self.logger.info(f"Ranked {len(leaderboard)} teams from {scores_path}")
        return {"command": "rank", "leaderboard": leaderboard}
