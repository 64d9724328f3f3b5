"""Application factory for rein-seg."""

import argparse
from collections.abc import Mapping, Sequence
from typing import Any

from cli import ArgumentParser, CommandRouter
from config.settings import Settings
from core.domain.constants import EXIT_OK, EXIT_RUNTIME_ABORT, EXIT_VALIDATION_ERROR
from core.domain.errors import TrainingAbortedError, ValidationFailure
from formatters import BaseFormatter, CsvFormatter, JsonFormatter, TextFormatter
from utils.display import RunDisplay
from utils.logging_config import get_logger, setup_logging

FORMATTERS: dict[str, type[BaseFormatter]] = {
    "text": TextFormatter,
    "json": JsonFormatter,
    "csv": CsvFormatter,
}


class AppFactory:
    """Factory for creating application components."""

    @staticmethod
    def create_app() -> "ReinSegApp":
        """Create a new rein-seg application instance.

        Returns:
            Configured application instance
        """
        return ReinSegApp()


class ReinSegApp:
    """Main rein-seg application."""

    def __init__(self) -> None:
        """Initialize the application."""
        self.logger = get_logger(__name__)
        self.debug = False

    def run(self, argv: Sequence[str] | None = None) -> int:
        """Run one command.

        Returns:
            Exit code: 0 success, 1 validation error, 2 runtime abort
        """
        arg_parser = ArgumentParser()
        try:
            args = arg_parser.parse_arguments(argv)
        except SystemExit as e:
            # argparse exits 0 for --help/--version and 2 for usage errors
            return EXIT_OK if e.code in (0, None) else EXIT_VALIDATION_ERROR

        try:
            # Build runtime settings overrides from CLI flags
            overrides = arg_parser.get_runtime_settings_overrides(args)
            runtime_settings = Settings.from_env(overrides=overrides)
            self.debug = runtime_settings.DEBUG_MODE

            setup_logging(runtime_settings)

            spec = arg_parser.get_run_spec(args)
            display = RunDisplay(enabled=not args.no_display)
            result = CommandRouter(runtime_settings, display).route_command(args, spec)

            self._output_results(result, args)
            return EXIT_OK

        except ValidationFailure as e:
            self.logger.error(f"Invalid input: {e}")
            self._log_details()
            return EXIT_VALIDATION_ERROR
        except TrainingAbortedError as e:
            self.logger.error(f"Training aborted: {e}")
            if "path" in e.diagnostics:
                self.logger.error(f"Diagnostics: {e.diagnostics['path']}")
            return EXIT_RUNTIME_ABORT
        except KeyboardInterrupt:
            self.logger.info("Operation cancelled by user")
            return EXIT_RUNTIME_ABORT
        except Exception as e:
            self.logger.error(f"Application error: {e}")
            self._log_details()
            return EXIT_RUNTIME_ABORT

    def _log_details(self) -> None:
        if self.debug:
            self.logger.exception("Full error details:")

    def _output_results(self, result: Mapping[str, Any], args: argparse.Namespace) -> None:
        """Print the result, or save it when --output is given.

        Args:
            result: The result to output
            args: Command line arguments
        """
        formatter = FORMATTERS[args.output_format]()
        if args.output:
            formatter.save_to_file(result, args.output)
        else:
            print(formatter.format(result), end="")
