"""Streaming reader for schedule files.

A schedule file is JSON Lines: a header object on the first line
(sampler, metric, batch_size, total_steps, seed, corpus_hash) followed
by one {"step": t, "ids": [...]} record per batch, steps counting up
from 0. The reader validates the header when the file is opened and
each batch record as it is reached, so a malformed record fails at that
record rather than up front, and arbitrarily long schedules stream in
constant memory.

Typical use:

    with open_schedule("cb.jsonl") as it:
        for batch in it:
            step(model, dataset[batch])
"""

from __future__ import annotations

import json
import os
from typing import Iterator

HEADER_FIELDS = ("sampler", "metric", "batch_size", "total_steps", "seed", "corpus_hash")


class ScheduleReadError(ValueError):
    """The schedule file is malformed at the reported position."""


class ScheduleIterator:
    """Single-pass iterator over the batches of one schedule file.

    Header metadata is available as attributes after construction.
    Iteration yields each batch exactly once, in step order, as a list
    of document indices. Re-reading a file requires a new iterator.
    """

    def __init__(self, path: str | os.PathLike[str]) -> None:
        self._path = str(path)
        self._handle = open(path, encoding="utf-8")
        try:
            header_line = self._handle.readline()
            if not header_line.strip():
                raise ScheduleReadError(f"{self._path}: missing header")
            header = self._parse(header_line, lineno=1)
            missing = [field for field in HEADER_FIELDS if field not in header]
            if missing or "step" in header:
                raise ScheduleReadError(
                    f"{self._path}: missing header (expected fields "
                    f"{', '.join(HEADER_FIELDS)})"
                )
        except Exception:
            self._handle.close()
            raise
        self.sampler: str = str(header["sampler"])
        self.metric: str | None = (
            None if header["metric"] is None else str(header["metric"])
        )
        self.batch_size: int = int(header["batch_size"])
        self.total_steps: int = int(header["total_steps"])
        self.seed: int = int(header["seed"])
        self.corpus_hash: str = str(header["corpus_hash"])
        self._next_step = 0
        self._lineno = 1

    def _parse(self, line: str, lineno: int) -> dict:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScheduleReadError(
                f"{self._path}: line {lineno}: invalid JSON ({exc.msg})"
            ) from None
        if not isinstance(obj, dict):
            raise ScheduleReadError(
                f"{self._path}: line {lineno}: expected a JSON object"
            )
        return obj

    def __iter__(self) -> Iterator[list[int]]:
        return self

    def __next__(self) -> list[int]:
        if self._handle.closed:
            raise StopIteration
        while True:
            line = self._handle.readline()
            if not line:
                self.close()
                raise StopIteration
            self._lineno += 1
            if line.strip():
                break
        record = self._parse(line, self._lineno)
        if record.get("step") != self._next_step:
            raise ScheduleReadError(
                f"{self._path}: line {self._lineno}: expected step "
                f"{self._next_step}, got {record.get('step')!r}"
            )
        ids = record.get("ids")
        if not isinstance(ids, list) or not ids:
            raise ScheduleReadError(
                f"{self._path}: line {self._lineno}: 'ids' must be a non-empty list"
            )
        for value in ids:
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ScheduleReadError(
                    f"{self._path}: line {self._lineno}: invalid document index "
                    f"{value!r}"
                )
        self._next_step += 1
        return list(ids)

    def close(self) -> None:
        if not self._handle.closed:
            self._handle.close()

    def __enter__(self) -> "ScheduleIterator":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


def open_schedule(path: str | os.PathLike[str]) -> ScheduleIterator:
    """Open a schedule file and return a validated, single-pass iterator."""
    return ScheduleIterator(path)


def as_index_batches(iterator: ScheduleIterator) -> list[list[int]]:
    """Drain the iterator into a list of index lists (small schedules)."""
    return list(iterator)
