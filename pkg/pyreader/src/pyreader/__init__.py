"""Minimal adapter exposing schedule files as iterables of index batches."""

__version__ = "0.1.0"

from .reader import (
    ScheduleIterator,
    ScheduleReadError,
    as_index_batches,
    open_schedule,
)

__all__ = [
    "ScheduleIterator",
    "ScheduleReadError",
    "as_index_batches",
    "open_schedule",
]
