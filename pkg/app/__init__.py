"""Application module for rein-seg.

This module handles application initialization and high-level
orchestration of one CLI command.
"""

from .app_factory import AppFactory

__all__ = ["AppFactory"]
