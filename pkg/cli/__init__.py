"""CLI module for rein-seg.

This module handles command line interface functionality including
argument parsing and command routing.
"""

from .argument_parser import ArgumentParser
from .command_router import CommandRouter

__all__ = ["ArgumentParser", "CommandRouter"]
