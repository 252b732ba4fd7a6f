"""
Shared helpers for the command-line surface and the experiment harness
"""

from typing import Optional

from .config import Settings


def resolve_thread_count(requested: Optional[int] = None) -> int:
    """Resolve the worker count: explicit value, then QSING_THREADS, then 1.

    Settings are re-read so a value exported after import (or loaded from
    .env by the CLI) is honoured.
    """
    if requested is None:
        requested = Settings().threads
    if requested < 1:
        raise ValueError(f"Thread count must be at least 1, got {requested}")
    return requested


def format_elapsed(seconds: float) -> str:
    """Format a wall-clock duration for log lines"""
    if seconds < 1.0:
        return f"{seconds * 1000:.0f} ms"
    minutes, secs = divmod(seconds, 60.0)
    if minutes:
        return f"{int(minutes)} min {secs:.1f} s"
    return f"{secs:.2f} s"
