"""Text formatter for command results."""

from collections.abc import Mapping
from typing import Any

from .base_formatter import BaseFormatter


class TextFormatter(BaseFormatter):
    """Text output formatter."""

    def format(self, result: Mapping[str, Any]) -> str:
        """Format the result as text.

        Args:
            result: The result to format

        Returns:
            Text formatted string
        """
        output_lines = []
        command = result.get("command", "")

        if command == "gen-data":
            output_lines.append(f"Dataset written to {result['out']}")
            for split, info in result["splits"].items():
                output_lines.append(
                    f"  {split}: {info['images']} images, domains {','.join(info['domains'])}"
                )

        elif command == "train":
            if result.get("dry_run"):
                output_lines.append("Dry run: configuration only")
            else:
                output_lines.append(f"Run directory: {result['run_dir']}")
                output_lines.append(
                    f"Loss: {result['initial_loss']:.4f} -> {result['final_loss']:.4f}"
                )
                if result.get("best_score") is not None:
                    output_lines.append(
                        f"Best validation score: {result['best_score']:.4f} "
                        f"(iteration {result['best_iteration']})"
                    )
            for key, value in result["header"].items():
                output_lines.append(f"  {key}: {value}")

        elif command in ("eval", "score"):
            aggregate = result["aggregate"]
            output_lines.append(
                f"{len(result['rows'])} images ({result['aggregation']}): "
                f"DSC {aggregate['dsc']:.4f} | mIoU {aggregate['miou']:.4f} | "
                f"JSC {aggregate['jsc']:.4f} | score {aggregate['score']:.4f}"
            )
            for label, row in result.get("seen_unseen", {}).items():
                output_lines.append(f"  {label}: DSC {row['dsc']:.4f} | score {row['score']:.4f}")
            if result.get("report_path"):
                output_lines.append(f"Report: {result['report_path']}")

        elif command == "rank":
            for entry in result["leaderboard"]:
                output_lines.append(f"{entry['rank']:3d}. {entry['name']}  {entry['score']:.4f}")

        elif command == "param-report":
            for group in result["groups"]:
                state = "trainable" if group["trainable"] else "frozen"
                output_lines.append(
                    f"{group['name']:<10} {group['count']:>10,}  {state:<9} lr={group['learning_rate']:g}"
                )
            output_lines.append(
                f"Trainable: {result['trainable']:,} / {result['total']:,} "
                f"({result['trainable_fraction']:.2%})"
            )

        else:
            for key, value in result.items():
                output_lines.append(f"{key}: {value}")

        return "\n".join(output_lines) + "\n"
