import sys

from . import cli
from .core import __version__


def main():
    """Main entry point for the package."""
    sys.exit(cli.main())


__all__ = ['main', 'cli', '__version__']
