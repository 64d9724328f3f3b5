"""Main entry point for rein-seg."""

import sys

from app import AppFactory
from core.domain.constants import EXIT_RUNTIME_ABORT
from utils.logging_config import get_logger


def main() -> int:
    """Main application entry point.

    Returns:
        Exit code (0 success, 1 validation error, 2 runtime abort)
    """
    logger = get_logger(__name__)

    try:
        app = AppFactory.create_app()
        return app.run()
    except Exception as e:
        logger.error(f"Application error: {e}")
        return EXIT_RUNTIME_ABORT


if __name__ == "__main__":
    exit_code = main()
    sys.exit(exit_code)
